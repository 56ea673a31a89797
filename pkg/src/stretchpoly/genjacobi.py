"""
One-dimensional generalized Jacobi polynomial engine.

Weights take the form
    w(z) = (1-z)**a * (1+z)**b * p_1(z)**c_1 * ... * p_n(z)**c_n
on the interval (-1,1), with a, b > -1 and each augmenting factor p_i
a strictly positive polynomial on [-1,1].  The exponents c_i are arbitrary
real numbers.

The module computes three-term recurrence coefficients (by closed form,
by discretized Stieltjes, or by recursive Christoffel-Darboux lifting as
factors accumulate), Gauss quadrature rules, polynomial evaluation, and
banded embedding / differential / multiplication operator matrices
between weights with shifted parameters.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

__all__ = [
    'Polynomial', 'WeightSpec', 'LinearFactor', 'QuadraticFactor',
    'Recurrence', 'QuadratureRule', 'BandedMatrix',
    'InvalidWeightError', 'InvalidFactorError', 'TruncationError',
    'DomainMismatchError',
    'classical_jacobi_recurrence', 'stieltjes_recurrence',
    'christoffel_lift_linear', 'christoffel_lift_quadratic',
    'recurrence_for_weight', 'evaluate', 'evaluate_derivative',
    'gauss_quadrature', 'embedding', 'differential', 'multiplication',
    'operator_entries', 'get_recurrence', 'clear_recurrence_cache',
]

# Internal computations run in extended precision; operator matrices are
# reduced to float64 on output.
REAL = np.longdouble
COMPLEX = np.clongdouble

# Entries below this relative threshold are treated as structural zeros
# when assembling banded matrices.
STRUCTURAL_ZERO = 1e-14

# Minimum value an augmenting factor may take on [-1,1].
POSITIVITY_FLOOR = 1e-12


class InvalidWeightError(ValueError):
    """Weight parameters out of range or factor not positive on [-1,1]."""


class InvalidFactorError(ValueError):
    """Augmenting factor has a root inside [-1,1]."""


class TruncationError(ValueError):
    """A recurrence is too short for the requested operation."""


class DomainMismatchError(ValueError):
    """Operator parameter shift leaves the valid weight family."""


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial stored as ascending monomial coefficients."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        if len(coeffs) == 0:
            coeffs = (0.0,)
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, z):
        z = np.asarray(z)
        z = z.astype(COMPLEX) if np.iscomplexobj(z) else z.astype(REAL)
        result = np.full_like(z, self.coeffs[-1])
        for c in self.coeffs[-2::-1]:
            result = result * z + c
        return result

    def derivative(self):
        if self.degree == 0:
            return Polynomial((0.0,))
        return Polynomial(tuple((k + 1) * c for k, c in enumerate(self.coeffs[1:])))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            out = np.polynomial.polynomial.polymul(self.coeffs, other.coeffs)
            return Polynomial(tuple(out))
        return Polynomial(tuple(float(other) * c for c in self.coeffs))

    __rmul__ = __mul__

    def roots(self):
        if self.degree == 0:
            return np.array([])
        return np.polynomial.polynomial.polyroots(np.asarray(self.coeffs, dtype=float))

    @staticmethod
    def one():
        return Polynomial((1.0,))


def _chebyshev_probe_grid():
    k = np.arange(65)
    grid = np.cos(np.pi * k / 64)
    return np.concatenate(([-1.0], grid, [1.0]))


def _check_factor_positive(poly):
    values = poly(_chebyshev_probe_grid().astype(REAL))
    if np.min(values) <= POSITIVITY_FLOOR:
        raise InvalidWeightError(
            f'augmenting factor {poly.coeffs} is not strictly positive on [-1,1]')


@dataclass(frozen=True)
class WeightSpec:
    """Generalized Jacobi weight scale * (1-z)**a (1+z)**b prod p_i(z)**c_i.

    Constant factors are not admitted as augmenting polynomials: they are
    absorbed into the overall scale, which only affects the mass.
    """

    a: float
    b: float
    factors: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.a <= -1 or self.b <= -1:
            raise InvalidWeightError(f'a ({self.a}) and b ({self.b}) must exceed -1')
        if not self.scale > 0:
            raise InvalidWeightError('weight scale must be positive')
        factors = tuple((poly if isinstance(poly, Polynomial) else Polynomial(tuple(poly)),
                         float(c)) for poly, c in self.factors)
        for poly, _ in factors:
            if poly.degree < 1:
                raise InvalidWeightError('constant factors belong in the scale, not the weight')
            _check_factor_positive(poly)
        object.__setattr__(self, 'factors', factors)
        object.__setattr__(self, 'a', float(self.a))
        object.__setattr__(self, 'b', float(self.b))
        object.__setattr__(self, 'scale', float(self.scale))

    @property
    def num_factors(self):
        return len(self.factors)

    @property
    def exponents(self):
        return tuple(c for _, c in self.factors)

    @property
    def polynomials(self):
        return tuple(p for p, _ in self.factors)

    def augmented(self, z):
        """Scale times the augmenting factors raised to their exponents."""
        result = np.full_like(np.asarray(z, dtype=REAL), self.scale)
        for poly, c in self.factors:
            result = result * poly(z) ** REAL(c)
        return result

    def __call__(self, z):
        z = np.asarray(z, dtype=REAL)
        return (1 - z) ** REAL(self.a) * (1 + z) ** REAL(self.b) * self.augmented(z)

    def shifted(self, da=0, db=0, dc=None):
        """Weight with incremented parameters; factor polynomials unchanged."""
        if dc is None:
            dc = (0,) * self.num_factors
        if len(dc) != self.num_factors:
            raise DomainMismatchError('parameter shift length does not match factor count')
        a, b = self.a + da, self.b + db
        if a <= -1 or b <= -1:
            raise DomainMismatchError(f'shift leaves the valid family: a={a}, b={b}')
        factors = tuple((p, c + d) for (p, c), d in zip(self.factors, dc))
        return WeightSpec(a, b, factors, self.scale)

    def is_polynomial(self):
        return all(c == int(c) and c >= 0 for c in self.exponents)

    def polynomial_degree(self):
        """Total degree when every exponent is a non-negative integer."""
        if not self.is_polynomial():
            return None
        return int(sum(p.degree * c for p, c in self.factors))

    def unweighted_degree(self):
        return sum(p.degree for p, _ in self.factors)


@dataclass(frozen=True)
class LinearFactor:
    """Linear augmenting factor p(z) = slope*z + intercept with |root| > 1."""

    slope: float
    intercept: float

    def __post_init__(self):
        if self.slope == 0:
            raise InvalidFactorError('constant factor: absorb into the mass instead')
        if abs(self.root) <= 1:
            raise InvalidFactorError(f'factor root {self.root} lies inside [-1,1]')

    @property
    def root(self):
        return -self.intercept / self.slope

    @property
    def polynomial(self):
        return Polynomial((self.intercept, self.slope))


@dataclass(frozen=True)
class QuadraticFactor:
    """Monic real quadratic (z - root)(z - conj(root)) with complex root."""

    root: complex

    def __post_init__(self):
        if self.root.imag == 0:
            raise InvalidFactorError('quadratic factor must carry a conjugate root pair')

    @property
    def polynomial(self):
        x, y = self.root.real, self.root.imag
        return Polynomial((x * x + y * y, -2 * x, 1.0))


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self):
        return len(self.nodes)

    def integrate(self, values):
        return np.sum(self.weights * values, axis=-1)


@dataclass(frozen=True)
class Recurrence:
    """Orthonormal three-term recurrence z P_n = beta_n P_{n+1} + alpha_n P_n + beta_{n-1} P_{n-1}."""

    weight: WeightSpec
    alpha: np.ndarray
    beta: np.ndarray
    mass: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=REAL)
        beta = np.asarray(self.beta, dtype=REAL)
        if len(alpha) != len(beta):
            raise ValueError('alpha and beta must have the same length')
        if np.any(beta <= 0):
            raise InvalidWeightError('off-diagonal recurrence coefficients must be positive')
        if not self.mass > 0:
            raise InvalidWeightError('weight mass must be positive')
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'beta', beta)

    @property
    def n_terms(self):
        return len(self.alpha)

    def truncated(self, n_terms):
        if n_terms > self.n_terms:
            raise TruncationError(f'recurrence holds {self.n_terms} terms, need {n_terms}')
        return Recurrence(self.weight, self.alpha[:n_terms], self.beta[:n_terms], self.mass)

    def evaluate(self, points, n_max):
        return evaluate(self, points, n_max)

    def evaluate_derivative(self, points, n_max):
        return evaluate_derivative(self, points, n_max)


def _jacobi_mass(a, b):
    with mpmath.workdps(34):
        value = mpmath.power(2, a + b + 1) * mpmath.beta(a + 1, b + 1)
        return REAL(mpmath.nstr(value, 30))


def classical_jacobi_recurrence(a, b, n_terms):
    """Closed-form orthonormal recurrence for the Jacobi weight (1-z)**a (1+z)**b.

    The mass is omega = 2**(a+b+1) * B(a+1, b+1).
    """
    if a <= -1 or b <= -1:
        raise InvalidWeightError(f'a ({a}) and b ({b}) must exceed -1')
    if n_terms < 1:
        raise ValueError('n_terms must be at least 1')
    a, b = REAL(a), REAL(b)
    n = np.arange(n_terms, dtype=REAL)
    with np.errstate(invalid='ignore', divide='ignore'):
        alpha = (b * b - a * a) / ((2 * n + a + b) * (2 * n + a + b + 2))
    alpha[0] = (b - a) / (a + b + 2)

    # beta_monic[k] for k = 1..n_terms, then orthonormal beta_n = sqrt(beta_monic[n+1])
    k = np.arange(1, n_terms + 1, dtype=REAL)
    with np.errstate(invalid='ignore', divide='ignore'):
        beta_monic = (4 * k * (k + a) * (k + b) * (k + a + b)
                      / ((2 * k + a + b) ** 2 * ((2 * k + a + b) ** 2 - 1)))
    beta_monic[0] = 4 * (a + 1) * (b + 1) / ((a + b + 2) ** 2 * (a + b + 3))
    beta = np.sqrt(beta_monic)

    mass = _jacobi_mass(float(a), float(b))
    return Recurrence(WeightSpec(float(a), float(b)), alpha, beta, float(mass))


def evaluate(rec, points, n_max):
    """Forward recurrence evaluation; row n holds P_n at all points."""
    if n_max >= rec.n_terms + 1:
        raise TruncationError(f'need {n_max} recurrence terms, have {rec.n_terms}')
    z = np.asarray(points)
    dtype = COMPLEX if np.iscomplexobj(z) else REAL
    z = z.astype(dtype)
    P = np.zeros((n_max + 1, len(z)), dtype=dtype)
    P[0] = 1 / np.sqrt(REAL(rec.mass))
    if n_max >= 1:
        P[1] = (z - rec.alpha[0]) * P[0] / rec.beta[0]
    for n in range(1, n_max):
        P[n + 1] = ((z - rec.alpha[n]) * P[n] - rec.beta[n - 1] * P[n - 1]) / rec.beta[n]
    return P


def evaluate_derivative(rec, points, n_max):
    """Differentiated recurrence; row n holds P_n' at all points."""
    if n_max >= rec.n_terms + 1:
        raise TruncationError(f'need {n_max} recurrence terms, have {rec.n_terms}')
    z = np.asarray(points).astype(REAL)
    P = evaluate(rec, z, n_max)
    dP = np.zeros_like(P)
    if n_max >= 1:
        dP[1] = P[0] / rec.beta[0]
    for n in range(1, n_max):
        dP[n + 1] = ((z - rec.alpha[n]) * dP[n] + P[n] - rec.beta[n - 1] * dP[n - 1]) / rec.beta[n]
    return dP


def gauss_quadrature(rec, n_nodes, refine_to_machine=False):
    """Gauss rule from the symmetric tridiagonal recurrence matrix.

    Nodes are eigenvalues of the tridiagonal matrix with diagonal alpha
    and off-diagonal beta; weights satisfy 1/w_j = sum_i P_i(z_j)**2.
    A Newton step refines each node before the weights are computed, with
    an optional iteration to |dz| <= 1e-15.
    """
    if n_nodes < 1:
        raise ValueError('n_nodes must be at least 1')
    if rec.n_terms < n_nodes:
        raise TruncationError(f'recurrence holds {rec.n_terms} terms, need {n_nodes}')
    d = rec.alpha[:n_nodes].astype(float)
    e = rec.beta[:n_nodes - 1].astype(float)
    try:
        nodes = eigh_tridiagonal(d, e, eigvals_only=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy is robust here
        raise RuntimeError(f'quadrature eigensolve failed: {exc}') from exc
    z = np.sort(nodes).astype(REAL)

    def newton_step(z):
        P = evaluate(rec, z, n_nodes)
        dP = evaluate_derivative(rec, z, n_nodes)
        return P[n_nodes] / dP[n_nodes]

    dz = newton_step(z)
    z = z - dz
    if refine_to_machine:
        for _ in range(20):
            dz = newton_step(z)
            z = z - dz
            if np.max(np.abs(dz)) <= 1e-15:
                break

    P = evaluate(rec, z, n_nodes - 1)
    weights = 1 / np.sum(P * P, axis=0)
    return QuadratureRule(z, weights)


def _stieltjes_loop(n_terms, z, dmu):
    mass = np.sum(dmu)
    alpha = np.zeros(n_terms, dtype=REAL)
    beta = np.zeros(n_terms, dtype=REAL)
    p_prev = np.zeros_like(z)
    p = np.ones_like(z) / np.sqrt(mass)
    b_prev = REAL(0)
    for j in range(n_terms):
        alpha[j] = np.sum(dmu * z * p * p)
        tilde = (z - alpha[j]) * p - b_prev * p_prev
        beta[j] = np.sqrt(np.sum(dmu * tilde * tilde))
        p_prev, p = p, tilde / beta[j]
        b_prev = beta[j]
    return alpha, beta, mass


def stieltjes_recurrence(weight, n_terms, n_quad=None):
    """Discretized Stieltjes procedure on a Gauss-Jacobi proxy rule.

    Handles arbitrary real factor exponents.  The proxy rule is exact when
    all exponents are non-negative integers; otherwise a 4*n_terms-point
    proxy is used.
    """
    if n_terms < 1:
        raise ValueError('n_terms must be at least 1')
    if n_quad is None:
        if weight.is_polynomial():
            n_quad = math.ceil((weight.polynomial_degree() + 2 * n_terms + 1) / 2) + 1
        else:
            n_quad = 4 * n_terms + 4 * weight.unweighted_degree()
    base = classical_jacobi_recurrence(weight.a, weight.b, n_quad + 1)
    rule = gauss_quadrature(base, n_quad)
    dmu = rule.weights * weight.augmented(rule.nodes)
    alpha, beta, mass = _stieltjes_loop(n_terms, rule.nodes, dmu)
    return Recurrence(weight, alpha, beta, float(mass))


def _polynomial_values_at(alpha, beta, mass, z0, n_max):
    """P_0..P_n at a single (possibly complex) point from raw coefficient arrays."""
    scalar_dtype = COMPLEX if isinstance(z0, complex) else REAL
    z0 = scalar_dtype(z0)
    P = np.zeros(n_max + 1, dtype=scalar_dtype)
    P[0] = 1 / np.sqrt(REAL(mass))
    if n_max >= 1:
        P[1] = (z0 - alpha[0]) * P[0] / beta[0]
    for n in range(1, n_max):
        P[n + 1] = ((z0 - alpha[n]) * P[n] - beta[n - 1] * P[n - 1]) / beta[n]
    return P


def _lift_linear_raw(alpha, beta, mass, n_terms, slope, intercept):
    """Christoffel lift of raw recurrence arrays by the factor slope*z + intercept.

    Consumes one coefficient: the base must hold n_terms + 1 terms.
    Returns (alpha', beta', mass') for the weight multiplied by the factor.
    """
    if len(alpha) < n_terms + 1:
        raise TruncationError(
            f'linear lift needs {n_terms + 1} base terms, have {len(alpha)}')
    z0 = REAL(-intercept) / REAL(slope)
    sign = REAL(1) if slope < 0 else REAL(-1)

    P = _polynomial_values_at(alpha, beta, mass, float(z0), n_terms + 1)
    C = sign ** np.arange(n_terms + 1) * np.sqrt(
        sign / (P[:n_terms + 1] * P[1:n_terms + 2] * beta[:n_terms + 1]))
    new_alpha = np.zeros(n_terms, dtype=REAL)
    new_beta = np.zeros(n_terms, dtype=REAL)
    for n in range(n_terms):
        new_alpha[n] = (P[n + 2] / P[n + 1] * beta[n + 1]
                        - P[n + 1] / P[n] * beta[n] + alpha[n + 1])
        new_beta[n] = C[n] / C[n + 1] * P[n] / P[n + 1] * beta[n]
    if np.any(new_beta <= 0):
        raise InvalidFactorError('linear lift produced a non-positive beta')
    new_mass = mass * (REAL(slope) * alpha[0] + REAL(intercept))
    return new_alpha, new_beta, new_mass


def _lift_quadratic_raw(alpha, beta, mass, n_terms, root):
    """Christoffel lift by the monic quadratic with the given complex root.

    Consumes two coefficients: the base must hold n_terms + 2 terms.
    """
    if len(alpha) < n_terms + 2:
        raise TruncationError(
            f'quadratic lift needs {n_terms + 2} base terms, have {len(alpha)}')
    P = _polynomial_values_at(alpha, beta, mass, complex(root), n_terms + 2)
    S = np.cumsum(np.abs(P) ** 2)

    new_alpha = np.zeros(n_terms, dtype=REAL)
    new_beta = np.zeros(n_terms, dtype=REAL)
    for n in range(n_terms):
        new_beta[n] = np.sqrt(S[n] * S[n + 2] / S[n + 1] ** 2) * beta[n + 1]
        new_alpha[n] = ((S[n + 2] / S[n + 1] - 1) * np.real(P[n + 1] / P[n + 2]) * beta[n + 1]
                        - (S[n + 1] / S[n] - 1) * np.real(P[n] / P[n + 1]) * beta[n]
                        + alpha[n + 1])
    x, y = root.real, root.imag
    new_mass = mass * (alpha[0] ** 2 + beta[0] ** 2 - 2 * REAL(x) * alpha[0]
                       + REAL(x * x + y * y))
    return new_alpha, new_beta, new_mass


def christoffel_lift_linear(base, factor, n_terms):
    """Recurrence for base weight times a linear factor with no zero in [-1,1]."""
    alpha, beta, mass = _lift_linear_raw(base.alpha, base.beta, base.mass,
                                         n_terms, factor.slope, factor.intercept)
    weight = WeightSpec(base.weight.a, base.weight.b,
                        base.weight.factors + ((factor.polynomial, 1.0),))
    return Recurrence(weight, alpha, beta, float(mass))


def christoffel_lift_quadratic(base, factor, n_terms):
    """Recurrence for base weight times a monic conjugate-root quadratic."""
    alpha, beta, mass = _lift_quadratic_raw(base.alpha, base.beta, base.mass,
                                            n_terms, factor.root)
    weight = WeightSpec(base.weight.a, base.weight.b,
                        base.weight.factors + ((factor.polynomial, 1.0),))
    return Recurrence(weight, alpha, beta, float(mass))


def _factor_roots(poly):
    """Split a positive polynomial into real roots, conjugate pairs, and scale.

    The scale is the constant making the product of the positive-definite
    elementary factors equal the original polynomial.
    """
    roots = poly.roots()
    tol = 1e-10
    real_roots, pairs = [], []
    for r in roots:
        if abs(r.imag) <= tol * (1 + abs(r)):
            r = r.real
            if abs(r) <= 1:
                raise InvalidFactorError(f'factor root {r} lies inside [-1,1]')
            real_roots.append(r)
        elif r.imag > 0:
            pairs.append(complex(r))
    elementary = REAL(1)
    probes = np.array([0.0], dtype=REAL)
    for r in real_roots:
        if r > 1:
            elementary = elementary * (REAL(r) - probes[0])
        else:
            elementary = elementary * (probes[0] - REAL(r))
    for r in pairs:
        elementary = elementary * REAL((0 - r.real) ** 2 + r.imag ** 2)
    scale = float(poly(probes)[0] / elementary)
    if scale <= 0:
        raise InvalidWeightError('factor polynomial is negative on [-1,1]')
    return real_roots, pairs, scale


def _lift_plan_for_factor(poly):
    """Sequence of (kind, payload) lifts multiplying the weight by poly once."""
    real_roots, pairs, scale = _factor_roots(poly)
    plan = []
    for r in real_roots:
        if r > 1:
            plan.append(('linear', (-1.0, r)))       # r - z > 0 on [-1,1]
        else:
            plan.append(('linear', (1.0, -r)))       # z - r > 0 on [-1,1]
    for r in pairs:
        plan.append(('quadratic', r))
    return plan, scale


def _lift_consumption(plan):
    return sum(1 if kind == 'linear' else 2 for kind, _ in plan)


def recurrence_for_weight(weight, n_terms):
    """Recurrence for an arbitrary generalized Jacobi weight.

    Each factor exponent c splits into an integer part handled by repeated
    Christoffel-Darboux lifts and a fractional remainder gamma = c - floor(c)
    handled by a discretized Stieltjes base stage.  Exponents below one
    keep their full value in the base stage.
    """
    if n_terms < 1:
        raise ValueError('n_terms must be at least 1')
    plans, lifts, gammas = [], [], []
    for poly, c in weight.factors:
        n_int = max(0, int(math.floor(c)))
        gamma = c - n_int
        plan, scale = _lift_plan_for_factor(poly)
        plans.append((plan, scale))
        lifts.append(n_int)
        gammas.append(gamma)

    consumption = sum(_lift_consumption(plan) * n for (plan, _), n in zip(plans, lifts))
    n_init = n_terms + consumption

    if any(g != 0 for g in gammas):
        base_factors = tuple((p, g) for (p, _), g in zip(weight.factors, gammas) if g != 0)
        base_weight = WeightSpec(weight.a, weight.b, base_factors, weight.scale)
        base = stieltjes_recurrence(base_weight, n_init)
        alpha, beta, mass = base.alpha, base.beta, REAL(base.mass)
    else:
        base = classical_jacobi_recurrence(weight.a, weight.b, n_init)
        alpha, beta, mass = base.alpha, base.beta, REAL(base.mass) * REAL(weight.scale)

    remaining = n_init
    for (plan, scale), n_int in zip(plans, lifts):
        for _ in range(n_int):
            for kind, payload in plan:
                if kind == 'linear':
                    slope, intercept = payload
                    remaining -= 1
                    alpha, beta, mass = _lift_linear_raw(alpha, beta, mass,
                                                         remaining, slope, intercept)
                else:
                    remaining -= 2
                    alpha, beta, mass = _lift_quadratic_raw(alpha, beta, mass,
                                                            remaining, payload)
            mass = mass * REAL(scale)
    return Recurrence(weight, alpha[:n_terms], beta[:n_terms], float(mass))


# Recurrences keyed by weight, grown on demand.  Weight specs hash by value.
_RECURRENCE_CACHE = {}


def get_recurrence(weight, n_terms):
    """Cached recurrence lookup, regenerating when more terms are needed."""
    cached = _RECURRENCE_CACHE.get(weight)
    if cached is None or cached.n_terms < n_terms:
        cached = recurrence_for_weight(weight, max(n_terms, 32))
        _RECURRENCE_CACHE[weight] = cached
    return cached


def clear_recurrence_cache():
    _RECURRENCE_CACHE.clear()


def cache_recurrence(rec):
    """Seed the cache, keeping whichever recurrence holds more terms."""
    cached = _RECURRENCE_CACHE.get(rec.weight)
    if cached is None or cached.n_terms < rec.n_terms:
        _RECURRENCE_CACHE[rec.weight] = rec


@dataclass(frozen=True)
class BandedMatrix:
    """Rectangular banded operator between two polynomial systems.

    Entries occupy diagonals row - col in [-upper, lower]; everything
    outside the band is exactly zero.
    """

    data: sparse.csr_matrix
    domain: WeightSpec
    codomain: WeightSpec
    lower: int
    upper: int

    @property
    def shape(self):
        return self.data.shape

    @property
    def bandwidth(self):
        return self.lower + self.upper + 1

    def toarray(self):
        return self.data.toarray()

    def __matmul__(self, other):
        if isinstance(other, BandedMatrix):
            if other.codomain != self.domain:
                raise DomainMismatchError('composition domain/codomain mismatch')
            if self.shape[1] != other.shape[0]:
                raise DomainMismatchError(
                    f'composition size mismatch: {self.shape} @ {other.shape}')
            return BandedMatrix(self.data @ other.data, other.domain, self.codomain,
                                self.lower + other.lower, self.upper + other.upper)
        return self.data @ other

    def __neg__(self):
        return BandedMatrix(-self.data, self.domain, self.codomain, self.lower, self.upper)

    def __add__(self, other):
        if self.domain != other.domain or self.codomain != other.codomain:
            raise DomainMismatchError('sum requires matching domain and codomain')
        return BandedMatrix(self.data + other.data, self.domain, self.codomain,
                            max(self.lower, other.lower), max(self.upper, other.upper))

    def measured_band(self):
        """Actual occupied (lower, upper) diagonals of the stored entries."""
        coo = self.data.tocoo()
        if coo.nnz == 0:
            return 0, 0
        offsets = coo.row - coo.col
        return int(offsets.max()), int(-offsets.min())


def _banded_from_dense(entries, domain, codomain, lower, upper):
    entries = np.asarray(entries, dtype=float)
    scale = np.max(np.abs(entries)) if entries.size else 0.0
    if scale > 0:
        entries = np.where(np.abs(entries) < STRUCTURAL_ZERO * scale, 0.0, entries)
    rows, cols = entries.shape
    i, j = np.nonzero(entries)
    keep = (i - j <= lower) & (j - i <= upper)
    data = sparse.csr_matrix((entries[i[keep], j[keep]], (i[keep], j[keep])),
                             shape=(rows, cols))
    return BandedMatrix(data, domain, codomain, lower, upper)


def operator_entries(action, dom, codom, rows, cols, degree_increase=0,
                     lower=None, upper=None, quad=None):
    """Project a grid-space operator action onto the codomain polynomials.

    action(z, P, dP) returns the values of (L P_n)(z_j) as an array with one
    row per domain polynomial.  The quadrature order covers integrands of
    degree cols - 1 + degree_increase + rows - 1, plus a safety margin.
    Entries below 1e-14 of the largest are dropped as structural zeros.
    """
    dom_rec = dom if isinstance(dom, Recurrence) else get_recurrence(dom, cols + 1)
    codom_weight = codom.weight if isinstance(codom, Recurrence) else codom
    n_quad = math.ceil((rows - 1 + cols - 1 + degree_increase + 1) / 2) + 2
    codom_rec = get_recurrence(codom_weight, max(n_quad + 1, rows + 1))
    if quad is None:
        quad = gauss_quadrature(codom_rec, n_quad)
    z = quad.nodes
    P = evaluate(dom_rec, z, cols - 1)
    dP = evaluate_derivative(dom_rec, z, cols - 1)
    values = action(z, P, dP)
    Q = evaluate(codom_rec, z, rows - 1)
    entries = (Q * quad.weights) @ values.T
    if lower is None or upper is None:
        probe = np.asarray(entries, dtype=float)
        scale = np.max(np.abs(probe)) if probe.size else 0.0
        i, j = np.nonzero(np.abs(probe) > STRUCTURAL_ZERO * max(scale, 1e-300))
        lower = int(np.max(i - j)) if len(i) else 0
        upper = int(np.max(j - i)) if len(i) else 0
    return _banded_from_dense(entries, dom_rec.weight, codom_weight, lower, upper)


def _factor_polynomial(weight, which):
    if which == 'a':
        return Polynomial((1.0, -1.0))
    if which == 'b':
        return Polynomial((1.0, 1.0))
    return weight.polynomials[which]


def embedding(weight, which, adjoint, rows, cols):
    """Embedding operator for one weight parameter, or its adjoint.

    The non-adjoint operator is the identity map into the space with the
    selected parameter raised by one.  The adjoint multiplies by the
    corresponding weight factor and lowers the parameter.  Bandwidth is one
    more than the degree of the factor.
    """
    poly = _factor_polynomial(weight, which)
    d = poly.degree
    if which == 'a':
        dc = (1, 0, None)
    elif which == 'b':
        dc = (0, 1, None)
    else:
        shift = [0] * weight.num_factors
        shift[which] = 1
        dc = (0, 0, tuple(shift))
    da, db, dci = dc
    if adjoint:
        da, db = -da, -db
        dci = None if dci is None else tuple(-s for s in dci)
    try:
        target = weight.shifted(da, db, dci)
    except InvalidWeightError as exc:
        raise DomainMismatchError(str(exc)) from exc

    if adjoint:
        def action(z, P, dP):
            return poly(z) * P
        return operator_entries(action, weight, target, rows, cols,
                                degree_increase=d, lower=d, upper=0)

    def action(z, P, dP):
        return P
    return operator_entries(action, weight, target, rows, cols,
                            degree_increase=0, lower=0, upper=d)


def multiplication(poly, dom_weight, codom_weight, rows, cols, lower=None, upper=None):
    """Matrix of multiplication by a polynomial between two weights."""
    def action(z, P, dP):
        return poly(z) * P
    return operator_entries(action, dom_weight, codom_weight, rows, cols,
                            degree_increase=poly.degree, lower=lower, upper=upper)


def differential(weight, delta_a, delta_b, delta_c, rows, cols):
    """Sparse differential operator D(delta_a, delta_b, delta_c).

    The index tuple collects factors with delta_c_i = -1; rho is their
    product and rho' the weighted derivative sum.  With an empty tuple the
    four (delta_a, delta_b) sign choices reduce to the classical Jacobi
    operators.  Bandwidth is one more than the total degree of the
    augmenting factor product.
    """
    delta_c = tuple(delta_c)
    if len(delta_c) != weight.num_factors:
        raise DomainMismatchError('delta_c length does not match factor count')
    if delta_a not in (-1, 1) or delta_b not in (-1, 1) or any(d not in (-1, 1) for d in delta_c):
        raise ValueError('all parameter shifts must be +1 or -1')
    try:
        target = weight.shifted(delta_a, delta_b, delta_c)
    except (InvalidWeightError, DomainMismatchError) as exc:
        raise DomainMismatchError(str(exc)) from exc

    tuple_idx = [i for i, d in enumerate(delta_c) if d == -1]
    polys = weight.polynomials
    exponents = weight.exponents
    rho = Polynomial.one()
    for i in tuple_idx:
        rho = rho * polys[i]
    rho_parts = []
    for i in tuple_idx:
        part = Polynomial((float(exponents[i]),)) * polys[i].derivative()
        for j in tuple_idx:
            if j != i:
                part = part * polys[j]
        rho_parts.append(part)

    def rho_prime(z):
        if not rho_parts:
            return np.zeros_like(z)
        return sum(part(z) for part in rho_parts)

    a, b = REAL(weight.a), REAL(weight.b)

    def action(z, P, dP):
        r, rp = rho(z), rho_prime(z)
        if (delta_a, delta_b) == (1, 1):
            return r * dP + rp * P
        if (delta_a, delta_b) == (1, -1):
            return r * (b * P + (1 + z) * dP) + rp * (1 + z) * P
        if (delta_a, delta_b) == (-1, 1):
            return r * (-a * P + (1 - z) * dP) + rp * (1 - z) * P
        return (r * (-(1 + z) * a * P + (1 - z) * b * P + (1 - z * z) * dP)
                + rp * (1 - z * z) * P)

    d_tuple = rho.degree
    d_total = weight.unweighted_degree()
    x = {(1, 1): -1, (1, -1): 0, (-1, 1): 0, (-1, -1): 1}[(delta_a, delta_b)]
    lower = d_tuple + x
    upper = d_total - lower
    return operator_entries(action, weight, target, rows, cols,
                            degree_increase=d_tuple + x, lower=lower, upper=upper)
