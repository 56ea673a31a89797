"""Tests for the 3D basis hierarchy and transforms."""

import numpy as np
import pytest

from stretchpoly import genjacobi
from stretchpoly.basis import (
    BasisSpec, CoefficientTensor, GridField, analysis_grids, analyze,
    basis_eval, build_hierarchy, spin_exponent, synthesize, vertical_couplings,
)
from stretchpoly.geometry import Geometry, sample_geometries

GEOS = sample_geometries()


def orthonormality_defect(spec, indices):
    build_hierarchy(spec)
    rad, vert = analysis_grids(spec)
    t, w_t = rad.nodes.astype(float), rad.weights.astype(float)
    eta, w_e = vert.nodes.astype(float), vert.weights.astype(float)
    w_mu = w_t / spec.prefactor_m(t) ** 2
    funcs = [basis_eval(spec, l, k, t, eta) for (l, k) in indices]
    gram = np.zeros((len(indices), len(indices)))
    for i, fi in enumerate(funcs):
        for j, fj in enumerate(funcs):
            gram[i, j] = np.real(np.einsum('te,t,e->', np.conj(fi) * fj, w_mu, w_e))
    return np.max(np.abs(gram - np.eye(len(indices))))


class TestSpinExponent:
    def test_standard_cases(self):
        assert spin_exponent(3, 1) == 4
        assert spin_exponent(-3, 1) == 2
        assert spin_exponent(0, -1) == 1
        assert spin_exponent(0, 0) == 0


class TestHierarchy:
    def test_per_level_gram_identity(self):
        spec = BasisSpec(GEOS['parabolic_cylinder'], m=3, alpha=0.0, sigma=0,
                         L_max=10, N_max=14)
        table = build_hierarchy(spec)
        for l in range(spec.L_max + 1):
            rec = table[l]
            n = spec.n_max_at(l)
            rule = genjacobi.gauss_quadrature(rec, n + 1)
            P = genjacobi.evaluate(rec, rule.nodes, n)
            gram = (P * rule.weights) @ P.T
            assert np.max(np.abs(gram - np.eye(n + 1))) < 1e-10

    def test_height_exponent_sequence(self):
        spec = BasisSpec(GEOS['parabolic_cylinder'], m=2, alpha=0.0, sigma=0,
                         L_max=6, N_max=10)
        for l in range(7):
            assert spec.radial_weight(l).exponents == (2 * l + 1,)

    def test_unit_height_reduces_to_jacobi(self):
        geo = GEOS['torus']
        # unit htilde: no augmenting factor, plain Jacobi in (a, b)
        spec = BasisSpec(geo, m=4, alpha=0.0, sigma=1, L_max=3, N_max=8)
        weight = spec.radial_weight(0)
        assert weight.a == 0.5 and weight.b == 0.5
        assert len(weight.factors) == 1           # only the annulus spin factor

    def test_spherinder_reduction_empty_factor_list(self):
        spec = BasisSpec(GEOS['oblate_spheroid'], m=2, alpha=0.0, sigma=0,
                         L_max=6, N_max=10)
        for l in range(7):
            weight = spec.radial_weight(l)
            assert weight.factors == ()
            assert weight.a == l + 0.5
            assert weight.b == 2

    def test_chain_matches_from_scratch(self):
        spec = BasisSpec(GEOS['annular_paraboloid'], m=3, alpha=1.0, sigma=1,
                         L_max=8, N_max=12)
        table = build_hierarchy(spec)
        for l in (3, 8):
            fresh = genjacobi.recurrence_for_weight(spec.radial_weight(l), 10)
            assert np.max(np.abs(fresh.alpha - table[l].alpha[:10])) < 1e-12
            assert np.max(np.abs(fresh.beta - table[l].beta[:10])) < 1e-12
            assert fresh.mass == pytest.approx(table[l].mass, rel=1e-12)


class TestBasisEval:
    def test_orthonormality_cylinder(self):
        spec = BasisSpec(GEOS['parabolic_cylinder'], m=3, alpha=0.0, sigma=0,
                         L_max=8, N_max=12)
        idx = [(0, 0), (1, 2), (2, 1), (5, 3), (8, spec.n_max_at(8))]
        assert orthonormality_defect(spec, idx) < 1e-10

    def test_orthonormality_across_chi_panel(self):
        cases = [
            ('paraboloid_cylinder', 0.0, 0),
            ('oblate_spheroid', 0.0, 1),
            ('biconcave_disk', 0.5, 0),
            ('annular_paraboloid', 0.0, -1),
            ('sphere_annulus', 1.0, 0),
            ('torus', 0.0, 0),
        ]
        for name, alpha, sigma in cases:
            spec = BasisSpec(GEOS[name], m=3, alpha=alpha, sigma=sigma,
                             L_max=5, N_max=10)
            idx = [(0, 0), (1, 2), (3, 1), (5, 2)]
            assert orthonormality_defect(spec, idx) < 1e-10, name

    def test_annulus_limit_to_cylinder(self):
        cyl = BasisSpec(GEOS['paraboloid_cylinder'], m=2, alpha=0.0, sigma=0,
                        L_max=4, N_max=8)
        t = np.linspace(-0.9, 0.9, 7)
        eta = np.array([0.3])
        gaps = []
        for S_i in (1e-2, 1e-3, 1e-4):
            ann_geo = Geometry('annulus', S_i, 1.0, cyl.geometry.height)
            ann = BasisSpec(ann_geo, m=2, alpha=0.0, sigma=0, L_max=4, N_max=8)
            gaps.append(np.max(np.abs(basis_eval(ann, 2, 3, t, eta)
                                      - basis_eval(cyl, 2, 3, t, eta))))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[1] < 1e-4

    def test_cartesian_polynomial_property(self):
        # stripping the phase and the s**e prefactor leaves a polynomial in
        # (s^2, z); verify by exact low-degree 2D polynomial interpolation
        spec = BasisSpec(GEOS['paraboloid_cylinder'], m=3, alpha=0.0, sigma=0,
                         L_max=4, N_max=8)
        l, k = 3, 2
        t = np.linspace(-0.95, 0.9, 12)
        eta = np.linspace(-1, 1, 9)
        values = basis_eval(spec, l, k, t, eta).real
        stripped = values / spec.prefactor_m(t)[:, None]
        s2 = ((1 + t) / 2)[:, None] * np.ones_like(eta)[None, :]
        z = spec.geometry.physical_z(t[:, None], eta[None, :])
        # total degree in (s^2, z) is bounded by k + deg(h)*l + l
        deg = k + spec.height.degree * l + l
        terms = [(i, j) for i in range(deg + 1) for j in range(deg + 1)
                 if i + j <= deg]
        A = np.stack([(s2 ** i * z ** j).ravel() for (i, j) in terms], axis=1)
        coef, *_ = np.linalg.lstsq(A, stripped.ravel(), rcond=None)
        resid = A @ coef - stripped.ravel()
        assert np.max(np.abs(resid)) < 1e-10

    def test_index_overflow(self):
        spec = BasisSpec(GEOS['paraboloid_cylinder'], m=1, alpha=0.0, sigma=0,
                         L_max=3, N_max=6)
        with pytest.raises(IndexError):
            basis_eval(spec, 3, spec.n_max_at(3) + 1, [0.0], [0.0])

    def test_node_non_clustering(self):
        # smallest radial node mapped to s stays away from a tiny inner radius
        geo = Geometry('annulus', 0.01, 1.0, GEOS['paraboloid_cylinder'].height)
        spec = BasisSpec(geo, m=10, alpha=0.0, sigma=0, L_max=2, N_max=20)
        build_hierarchy(spec)
        rad, _ = analysis_grids(spec)
        s = geo.s_of_t(rad.nodes.astype(float))
        assert np.min(s) > 0.1 * geo.S_o


class TestTransforms:
    def test_unit_coefficient_synthesizes_basis_function(self):
        spec = BasisSpec(GEOS['parabolic_cylinder'], m=2, alpha=0.0, sigma=0,
                         L_max=4, N_max=8)
        coeffs = CoefficientTensor.unit(spec, 0, 0)
        field = synthesize(spec, coeffs)
        direct = basis_eval(spec, 0, 0, field.t, field.eta)
        assert np.max(np.abs(field.values - direct)) < 1e-13

    @pytest.mark.parametrize('name,alpha,sigma', [
        ('parabolic_cylinder', 0.0, 0),
        ('annular_paraboloid', 1.0, 1),
        ('biconcave_disk', 0.0, 0),
        ('half_paraboloid', 0.0, -1),
        ('half_annulus', 1.0, 0),
    ])
    def test_round_trip(self, name, alpha, sigma):
        spec = BasisSpec(GEOS[name], m=3, alpha=alpha, sigma=sigma,
                         L_max=6, N_max=10)
        rng = np.random.default_rng(7)
        coeffs = CoefficientTensor.random(spec, rng)
        back = analyze(spec, synthesize(spec, coeffs))
        err = max(np.max(np.abs(a - b)) for a, b in zip(coeffs.blocks, back.blocks))
        assert err < 1e-11

    def test_z_squared_support(self):
        spec = BasisSpec(GEOS['paraboloid_cylinder'], m=0, alpha=0.0, sigma=0,
                         L_max=6, N_max=10)
        rad, vert = analysis_grids(spec)
        t, eta = rad.nodes.astype(float), vert.nodes.astype(float)
        z2 = np.outer(spec.geometry.height_at(t) ** 2, eta ** 2)
        coeffs = analyze(spec, GridField(t, eta, z2))
        for l in range(spec.L_max + 1):
            block = np.abs(coeffs.blocks[l])
            if l <= 2:
                support = np.nonzero(block > 1e-12)[0]
                assert len(support) == 0 or support.max() <= 2 * spec.height.degree
            else:
                assert np.max(block) < 1e-12

    def test_flatten_round_trip(self):
        spec = BasisSpec(GEOS['parabolic_cylinder'], m=1, alpha=0.0, sigma=0,
                         L_max=4, N_max=8)
        rng = np.random.default_rng(5)
        coeffs = CoefficientTensor.random(spec, rng)
        again = CoefficientTensor.from_flat(spec, coeffs.flatten())
        assert all(np.array_equal(a, b) for a, b in zip(coeffs.blocks, again.blocks))

    def test_grid_mismatch_rejected(self):
        spec = BasisSpec(GEOS['parabolic_cylinder'], m=1, alpha=0.0, sigma=0,
                         L_max=4, N_max=8)
        bad = GridField(np.linspace(-1, 1, 3), np.linspace(-1, 1, 3),
                        np.zeros((3, 3)))
        with pytest.raises(ValueError):
            analyze(spec, bad)


class TestVerticalCouplings:
    def test_conversion_identity_pointwise(self):
        alpha, L = 0.5, 6
        gamma, delta, lam, beta = vertical_couplings(alpha, L)
        low = genjacobi.classical_jacobi_recurrence(alpha, alpha, L + 2)
        high = genjacobi.classical_jacobi_recurrence(alpha + 1, alpha + 1, L + 2)
        eta = np.linspace(-1, 1, 17)
        P = genjacobi.evaluate(low, eta, L).astype(float)
        Q = genjacobi.evaluate(high, eta, L).astype(float)
        dP = genjacobi.evaluate_derivative(low, eta, L).astype(float)
        for l in range(L + 1):
            recon = gamma[l] * Q[l] - (delta[l] * Q[l - 2] if l >= 2 else 0)
            assert np.max(np.abs(P[l] - recon)) < 1e-13
            dre = lam[l] * Q[l - 1] if l >= 1 else np.zeros_like(eta)
            assert np.max(np.abs(dP[l] - dre)) < 1e-13

    def test_beta_is_recurrence_offdiagonal(self):
        _, _, _, beta = vertical_couplings(0.0, 4)
        rec = genjacobi.classical_jacobi_recurrence(0.0, 0.0, 6)
        assert np.allclose(beta[:5], rec.beta[:5].astype(float))
