"""Tests for the one-dimensional generalized Jacobi engine."""

import numpy as np
import pytest
from scipy.integrate import quad

from stretchpoly.genjacobi import (
    BandedMatrix, InvalidFactorError, InvalidWeightError, LinearFactor,
    Polynomial, QuadraticFactor, TruncationError, WeightSpec,
    christoffel_lift_linear, christoffel_lift_quadratic,
    classical_jacobi_recurrence, differential, embedding, evaluate,
    evaluate_derivative, gauss_quadrature, multiplication, operator_entries,
    recurrence_for_weight, stieltjes_recurrence,
)

TWO_PLUS_T = Polynomial((2.0, 1.0))
T_SQ_PLUS_4 = Polynomial((4.0, 0.0, 1.0))
BICONCAVE = Polynomial((3 / 9, 4 / 9, 2 / 9))       # (2(1+t)**2 + 1)/9


def reference_recurrence_by_moments(a, b, extra_fn, n_terms):
    """Independent oracle: scipy Gauss-Jacobi proxy measure + Stieltjes.

    Adaptive quadrature cross-checks the proxy mass so the discretization
    itself is verified against an integration oracle.
    """
    nodes, w = __import__('scipy.special', fromlist=['roots_jacobi']).roots_jacobi(600, a, b)
    dmu = w * extra_fn(nodes)
    weight_fn = lambda z: (1 - z) ** a * (1 + z) ** b * extra_fn(z)
    mass_adaptive, _ = quad(weight_fn, -1, 1, limit=400)
    assert abs(np.sum(dmu) - mass_adaptive) < 1e-12 * abs(mass_adaptive)
    alpha = np.zeros(n_terms)
    beta = np.zeros(n_terms)
    p_prev = np.zeros_like(nodes)
    p = np.ones_like(nodes) / np.sqrt(np.sum(dmu))
    b_prev = 0.0
    for j in range(n_terms):
        alpha[j] = np.sum(dmu * nodes * p * p)
        tilde = (nodes - alpha[j]) * p - b_prev * p_prev
        beta[j] = np.sqrt(np.sum(dmu * tilde * tilde))
        p_prev, p = p, tilde / beta[j]
        b_prev = beta[j]
    return alpha, beta, np.sum(dmu)


class TestClassicalJacobi:
    def test_legendre_coefficients(self):
        rec = classical_jacobi_recurrence(0, 0, 3)
        assert np.allclose(rec.alpha, 0.0)
        assert abs(rec.beta[0] - 1 / np.sqrt(3)) < 1e-15
        assert rec.mass == pytest.approx(2.0, abs=1e-15)

    def test_chebyshev_mass(self):
        rec = classical_jacobi_recurrence(-0.5, -0.5, 2)
        assert rec.mass == pytest.approx(np.pi, rel=1e-15)

    def test_against_moment_oracle(self):
        a, b = 0.5, 1.25
        rec = classical_jacobi_recurrence(a, b, 12)
        alpha, beta, mass = reference_recurrence_by_moments(
            a, b, lambda z: np.ones_like(z), 12)
        assert np.max(np.abs(rec.alpha.astype(float) - alpha)) < 1e-13
        assert np.max(np.abs(rec.beta.astype(float) - beta)) < 1e-13
        assert rec.mass == pytest.approx(mass, rel=1e-13)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidWeightError):
            classical_jacobi_recurrence(-1.0, 0, 4)


class TestStieltjes:
    def test_matches_classical(self):
        st = stieltjes_recurrence(WeightSpec(0, 0), 30)
        cl = classical_jacobi_recurrence(0, 0, 30)
        assert np.max(np.abs(st.alpha - cl.alpha)) < 1e-13
        assert np.max(np.abs(st.beta - cl.beta)) < 1e-13

    def test_matches_christoffel_lift(self):
        st = stieltjes_recurrence(WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),)), 30)
        lifted = christoffel_lift_linear(classical_jacobi_recurrence(0, 0, 40),
                                         LinearFactor(1.0, 2.0), 30)
        assert np.max(np.abs(st.alpha - lifted.alpha)) < 1e-12
        assert np.max(np.abs(st.beta - lifted.beta)) < 1e-12

    def test_fractional_beta0_from_moments(self):
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 0.5),))
        rec = stieltjes_recurrence(weight, 4)
        w = lambda z: np.sqrt(2 + z)
        mass, _ = quad(w, -1, 1)
        m1, _ = quad(lambda z: z * w(z), -1, 1)
        m2, _ = quad(lambda z: z * z * w(z), -1, 1)
        mean = m1 / mass
        var = m2 / mass - mean ** 2
        assert float(rec.beta[0]) ** 2 == pytest.approx(var, abs=1e-10)
        assert rec.mass == pytest.approx(mass, rel=1e-12)

    def test_nonpositive_factor_rejected(self):
        with pytest.raises(InvalidWeightError):
            WeightSpec(0, 0, ((Polynomial((0.0, 1.0)), 1.0),))


class TestChristoffelLift:
    def test_gram_identity_after_lift(self):
        lifted = christoffel_lift_linear(classical_jacobi_recurrence(0, 0, 40),
                                         LinearFactor(1.0, 2.0), 31)
        rule = gauss_quadrature(lifted, 31)
        P = evaluate(lifted, rule.nodes, 30)
        gram = (P * rule.weights) @ P.T
        assert np.max(np.abs(gram - np.eye(31))) < 1e-12

    def test_mass_after_linear_lift(self):
        lifted = christoffel_lift_linear(classical_jacobi_recurrence(0, 0, 12),
                                         LinearFactor(1.0, 2.0), 8)
        assert lifted.mass == pytest.approx(4.0, rel=1e-14)
        assert float(evaluate(lifted, [0.3], 0)[0, 0]) == pytest.approx(0.5, rel=1e-14)

    def test_degree_preservation(self):
        # Orthonormal P_n has degree exactly n: leading coefficient grows as
        # prod(1/beta), so the n-th finite difference of P_n is nonzero while
        # P_n is exactly reproduced by interpolation of degree n.
        lifted = christoffel_lift_linear(classical_jacobi_recurrence(0, 0, 20),
                                         LinearFactor(1.0, 2.0), 12)
        z = np.linspace(-1, 1, 25)
        P = lifted.evaluate(z, 10).astype(float)
        for n in range(11):
            coeffs = np.polynomial.polynomial.polyfit(z, P[n], n)
            resid = P[n] - np.polynomial.polynomial.polyval(z, coeffs)
            assert np.max(np.abs(resid)) < 1e-10
            assert abs(coeffs[-1]) > 1e-12

    def test_insufficient_base_length(self):
        with pytest.raises(TruncationError):
            christoffel_lift_linear(classical_jacobi_recurrence(0, 0, 5),
                                    LinearFactor(1.0, 2.0), 5)

    def test_interior_root_rejected(self):
        with pytest.raises(InvalidFactorError):
            LinearFactor(1.0, 0.5)

    def test_quadratic_matches_stieltjes(self):
        st = stieltjes_recurrence(WeightSpec(0, 0, ((T_SQ_PLUS_4, 1.0),)), 30)
        lifted = christoffel_lift_quadratic(classical_jacobi_recurrence(0, 0, 40),
                                            QuadraticFactor(2j), 30)
        assert np.max(np.abs(st.alpha - lifted.alpha)) < 1e-11
        assert np.max(np.abs(st.beta - lifted.beta)) < 1e-11
        assert lifted.mass == pytest.approx(26 / 3, rel=1e-13)

    def test_two_quadratic_lifts_compose(self):
        base = classical_jacobi_recurrence(0, 0, 44)
        once = christoffel_lift_quadratic(base, QuadraticFactor(2j), 40)
        twice = christoffel_lift_quadratic(once, QuadraticFactor(2j), 30)
        st = stieltjes_recurrence(
            WeightSpec(0, 0, ((T_SQ_PLUS_4, 1.0), (T_SQ_PLUS_4, 1.0))), 30)
        assert np.max(np.abs(st.alpha - twice.alpha)) < 1e-11
        assert np.max(np.abs(st.beta - twice.beta)) < 1e-11


class TestRecurrenceForWeight:
    def test_cubic_factor_equals_three_lifts(self):
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 3.0),))
        rec = recurrence_for_weight(weight, 25)
        chain = classical_jacobi_recurrence(0, 0, 40)
        for _ in range(3):
            chain = christoffel_lift_linear(chain, LinearFactor(1.0, 2.0),
                                            chain.n_terms - 1)
        assert np.max(np.abs(rec.alpha - chain.alpha[:25])) < 1e-12
        assert np.max(np.abs(rec.beta - chain.beta[:25])) < 1e-12

    def test_fractional_quadratic_gram(self):
        weight = WeightSpec(0, 0, ((BICONCAVE, 2.5),))
        rec = recurrence_for_weight(weight, 41)
        rule = gauss_quadrature(rec, 41)
        P = evaluate(rec, rule.nodes, 40)
        gram = (P * rule.weights) @ P.T
        assert np.max(np.abs(gram - np.eye(41))) < 1e-10

    def test_empty_factor_list_is_classical(self):
        rec = recurrence_for_weight(WeightSpec(1.5, 0.5), 20)
        cl = classical_jacobi_recurrence(1.5, 0.5, 20)
        assert np.max(np.abs(rec.alpha - cl.alpha)) < 1e-15
        assert np.max(np.abs(rec.beta - cl.beta)) < 1e-15

    def test_cross_method_panel(self):
        panel = [
            WeightSpec(0, 0, ((TWO_PLUS_T, 2.0),)),
            WeightSpec(0.5, 1.0, ((TWO_PLUS_T, 1.0),)),
            WeightSpec(0, 2, ((T_SQ_PLUS_4, 1.0),)),
            WeightSpec(0, 0, ((TWO_PLUS_T, 0.5),)),
            WeightSpec(1, 1, ((BICONCAVE, 1.5),)),
        ]
        for weight in panel:
            rec = recurrence_for_weight(weight, 31)
            st = stieltjes_recurrence(weight, 31)
            assert np.max(np.abs(rec.alpha - st.alpha)) < 1e-10
            assert np.max(np.abs(rec.beta - st.beta)) < 1e-10


class TestEvaluation:
    def test_constant_normalization(self):
        rec = classical_jacobi_recurrence(0, 0, 4)
        P = evaluate(rec, np.linspace(-1, 1, 7), 0)
        assert np.max(np.abs(P[0] - 1 / np.sqrt(2))) < 1e-15

    def test_orthonormal_legendre_p1(self):
        rec = classical_jacobi_recurrence(0, 0, 4)
        P = evaluate(rec, [0.5], 1)
        assert float(P[1, 0]) == pytest.approx(np.sqrt(1.5) * 0.5, rel=1e-14)

    def test_gram_identity(self):
        rec = classical_jacobi_recurrence(0.5, 0.0, 31)
        rule = gauss_quadrature(rec, 31)
        P = evaluate(rec, rule.nodes, 30)
        gram = (P * rule.weights) @ P.T
        assert np.max(np.abs(gram - np.eye(31))) < 1e-12

    def test_derivative_initialization(self):
        rec = classical_jacobi_recurrence(0, 0, 4)
        dP = evaluate_derivative(rec, np.linspace(-1, 1, 5), 2)
        assert np.max(np.abs(dP[0])) == 0
        assert abs(dP[2, 2]) < 1e-14      # P_2' vanishes at z = 0 by symmetry

    def test_derivative_finite_difference(self):
        weight = WeightSpec(0.5, 1.0, ((TWO_PLUS_T, 2.0),))
        rec = recurrence_for_weight(weight, 24)
        z = np.linspace(-0.9, 0.9, 11)
        h = 1e-6
        dP = evaluate_derivative(rec, z, 20).astype(float)
        fd = (evaluate(rec, z + h, 20) - evaluate(rec, z - h, 20)).astype(float) / (2 * h)
        scale = np.max(np.abs(dP), axis=1, keepdims=True) + 1
        assert np.max(np.abs(dP - fd) / scale) < 1e-7


class TestQuadrature:
    def test_legendre_two_point(self):
        rec = classical_jacobi_recurrence(0, 0, 3)
        rule = gauss_quadrature(rec, 2)
        assert np.allclose(np.sort(rule.nodes.astype(float)),
                           [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
        assert np.allclose(rule.weights.astype(float), [1.0, 1.0], atol=1e-14)

    def test_weight_sum_is_mass(self):
        for weight in [WeightSpec(0, 0), WeightSpec(0.5, 1.5),
                       WeightSpec(0, 0, ((TWO_PLUS_T, 2.0),)),
                       WeightSpec(0, 0, ((BICONCAVE, 0.5),))]:
            rec = recurrence_for_weight(weight, 16)
            rule = gauss_quadrature(rec, 16)
            assert abs(float(np.sum(rule.weights)) - rec.mass) < 1e-13 * rec.mass

    def test_monomial_exactness(self):
        # integrate (2+t) t^k exactly: int t^k dt even/odd split
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),))
        rec = recurrence_for_weight(weight, 8)
        rule = gauss_quadrature(rec, 8)
        for k in range(2 * 8):
            val = float(np.sum(rule.weights * rule.nodes.astype(float) ** k))
            even = lambda p: 2 / (p + 1) if p % 2 == 0 else 0.0
            exact = 2 * even(k) + even(k + 1)
            assert val == pytest.approx(exact, abs=1e-12 * max(1, abs(exact)))

    def test_truncation_guard(self):
        rec = classical_jacobi_recurrence(0, 0, 4)
        with pytest.raises(TruncationError):
            gauss_quadrature(rec, 5)


def random_vectors(n, count, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, n))


class TestEmbedding:
    def test_identity_on_function_values(self):
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),))
        emb = embedding(weight, 'a', False, 12, 12)
        raised = weight.shifted(da=1)
        rec, rec_r = recurrence_for_weight(weight, 16), recurrence_for_weight(raised, 16)
        rule = gauss_quadrature(rec_r, 14)
        coeffs = random_vectors(12, 1, 1)[0]
        f_dom = coeffs @ evaluate(rec, rule.nodes, 11).astype(float)
        f_cod = (emb @ coeffs) @ evaluate(rec_r, rule.nodes, 11).astype(float)
        assert np.max(np.abs(f_dom - f_cod)) < 1e-13 * np.max(np.abs(f_dom))

    def test_adjoint_inner_product_relation(self):
        weight = WeightSpec(0.5, 0, ((TWO_PLUS_T, 1.0),))
        raised = weight.shifted(dc=(1,))
        emb = embedding(weight, 0, False, 20, 20)
        adj = embedding(raised, 0, True, 21, 20)
        for f, g in zip(random_vectors(20, 20, 2), random_vectors(20, 20, 3)):
            lhs = (emb @ f) @ g
            rhs = f @ (adj @ g)[:20]
            assert abs(lhs - rhs) < 1e-12 * (1 + abs(lhs))

    def test_linear_factor_bandwidth_two(self):
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),))
        emb = embedding(weight, 0, False, 14, 14)
        assert emb.bandwidth == 2
        assert emb.measured_band() == (0, 1)

    def test_invalid_shift(self):
        from stretchpoly.genjacobi import DomainMismatchError
        with pytest.raises(DomainMismatchError):
            embedding(WeightSpec(-0.5, 0), 'a', True, 8, 8)


class TestDifferential:
    def test_derivative_entry_sqrt_two(self):
        d = differential(WeightSpec(0, 0), 1, 1, (), 6, 6)
        assert d.toarray()[0, 1] == pytest.approx(np.sqrt(2), rel=1e-14)

    def test_annihilates_constants(self):
        d = differential(WeightSpec(0, 0), 1, 1, (), 6, 6)
        assert np.max(np.abs(d.toarray()[:, 0])) == 0

    def test_single_factor_lowering_bandwidth(self):
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),))
        d = differential(weight, 1, 1, (-1,), 10, 10)
        assert d.bandwidth == 2
        assert d.measured_band() == (0, 1)

    def test_classical_reduction(self):
        # with empty index tuple the four operators reduce to the classical
        # Jacobi forms; check D(-1,-1) against -Dm+ adjoint action on grid
        weight = WeightSpec(1.0, 1.0)
        d = differential(weight, -1, -1, (), 8, 8).toarray()
        rec = recurrence_for_weight(weight, 12)
        target = recurrence_for_weight(WeightSpec(0, 0), 14)
        rule = gauss_quadrature(target, 12)
        z = rule.nodes
        P = evaluate(rec, z, 7)
        dP = evaluate_derivative(rec, z, 7)
        action = (-(1 + z) * 1.0 + (1 - z) * 1.0) * P + (1 - z * z) * dP
        Q = evaluate(target, z, 7)
        ref = ((Q * rule.weights) @ action.T).astype(float)
        assert np.max(np.abs(d - ref)) < 1e-12

    def test_adjointness(self):
        weight = WeightSpec(1, 1, ((TWO_PLUS_T, 1.0),))
        lowered = weight.shifted(-1, -1, (-1,))
        dplus = differential(lowered, 1, 1, (1,), 16, 16)     # lowered -> weight
        dminus = differential(weight, -1, -1, (-1,), 18, 16)  # weight -> lowered
        for f, g in zip(random_vectors(16, 10, 4), random_vectors(16, 10, 5)):
            lhs = (dplus @ f) @ g
            rhs = -(f @ (dminus @ g)[:16])
            # D(+1,+1,+1)^dagger = -D(-1,-1,-1): signs from the classical table
            assert abs(lhs - rhs) < 1e-11 * (1 + abs(lhs))

    def test_grid_action_matches_matrix(self):
        weight = WeightSpec(0.5, 1.5, ((TWO_PLUS_T, 2.0), (BICONCAVE, 1.0)))
        d = differential(weight, 1, -1, (1, -1), 12, 12)
        target = weight.shifted(1, -1, (1, -1))
        rec = recurrence_for_weight(weight, 18)
        rec_t = recurrence_for_weight(target, 20)
        rule = gauss_quadrature(rec_t, 18)
        z = rule.nodes
        rho = BICONCAVE(z)
        rho_p = 1.0 * BICONCAVE.derivative()(z)
        P, dP = evaluate(rec, z, 11), evaluate_derivative(rec, z, 11)
        action = rho * (weight.b * P + (1 + z) * dP) + rho_p * (1 + z) * P
        ref = ((evaluate(rec_t, z, 11) * rule.weights) @ action.T).astype(float)
        assert np.max(np.abs(d.toarray() - ref)) < 1e-11


class TestOperatorEntries:
    def test_identity_action(self):
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),))
        op = operator_entries(lambda z, P, dP: P, weight, weight, 10, 10)
        assert np.max(np.abs(op.toarray() - np.eye(10))) < 1e-13

    def test_multiplication_by_z_is_recurrence(self):
        rec = classical_jacobi_recurrence(0, 0, 12)
        op = multiplication(Polynomial((0.0, 1.0)), WeightSpec(0, 0), WeightSpec(0, 0), 9, 9)
        A = op.toarray()
        assert np.allclose(np.diag(A), rec.alpha[:9].astype(float), atol=1e-14)
        assert np.allclose(np.diag(A, 1), rec.beta[:8].astype(float), atol=1e-14)

    def test_derivative_action_reproduces_differential(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            a, b = rng.uniform(-0.5, 2, 2)
            c = float(rng.integers(1, 3))
            weight = WeightSpec(a, b, ((TWO_PLUS_T, c),))
            d = differential(weight, 1, 1, (1,), 10, 10)
            op = operator_entries(lambda z, P, dP: dP, weight,
                                  weight.shifted(1, 1, (1,)), 10, 10)
            assert np.max(np.abs(d.toarray() - op.toarray())) < 1e-12


class TestBandedMatrix:
    def test_composition_tracks_bands(self):
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),))
        e1 = embedding(weight, 'a', False, 12, 12)
        e2 = embedding(weight.shifted(da=1), 'b', False, 12, 12)
        composite = e2 @ e1
        assert composite.shape == (12, 12)
        low, up = composite.measured_band()
        assert low <= composite.lower and up <= composite.upper

    def test_domain_mismatch_rejected(self):
        from stretchpoly.genjacobi import DomainMismatchError
        weight = WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),))
        e1 = embedding(weight, 'a', False, 12, 12)
        with pytest.raises(DomainMismatchError):
            e1 @ e1


class TestOrthonormalityPanel:
    def test_gram_identity_n40(self):
        panel = [
            WeightSpec(0, 0, ((TWO_PLUS_T, 1.0),)),
            WeightSpec(0.5, 3.0),
            WeightSpec(0.5, 2.0, ((BICONCAVE, 0.5),)),
            WeightSpec(0, 1, ((T_SQ_PLUS_4, 2.0),)),
        ]
        for weight in panel:
            rec = recurrence_for_weight(weight, 41)
            rule = gauss_quadrature(rec, 41)
            P = evaluate(rec, rule.nodes, 40)
            gram = (P * rule.weights) @ P.T
            tol = 1e-9 if any(c != int(c) for c in weight.exponents) else 1e-11
            assert np.max(np.abs(gram - np.eye(41))) < tol
