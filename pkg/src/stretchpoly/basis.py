"""
Gyroscopic basis hierarchy on stretched cylinders and annuli.

A basis function with azimuthal order m, vertical degree l, and radial
degree k is

    e^{i m phi} * S(t)^e * (1-t)^(l chi_o / 2) (1+t)^(l chi_i / 2)
        * htilde(t)^(l chi_h) * P_l^(alpha,alpha)(eta) * Q_k(t)

where e = ||m| + sigma| is the spin exponent, S(t) is (1+t)^(1/2) for the
cylinder and stilde(t) for the annulus, and Q_k is the generalized Jacobi
polynomial orthonormal under the l-dependent radial weight.  The radial
expansion is triangularly truncated so conversion operators close exactly.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import genjacobi
from .genjacobi import (Polynomial, WeightSpec, cache_recurrence,
                        classical_jacobi_recurrence, evaluate, gauss_quadrature,
                        get_recurrence, recurrence_for_weight,
                        _lift_linear_raw, _lift_quadratic_raw,
                        _lift_plan_for_factor)
from .geometry import Geometry

__all__ = [
    'BasisSpec', 'CoefficientTensor', 'GridField', 'RadialWeightTable',
    'build_hierarchy', 'basis_eval', 'analyze', 'synthesize',
    'synthesize_with_derivatives', 'analysis_grids', 'vertical_couplings',
    'spin_exponent',
]


def spin_exponent(m, sigma):
    """Radial decay exponent of the spin-sigma component of an order-m field.

    The spin-sigma component of an azimuthal order-m field lies in the
    regularity space of degree m + sigma, decaying like s**|m + sigma| at
    the axis.  For m >= 0 this is the usual |m| + sigma; the absolute value
    also covers m = 0, sigma = -1 and negative azimuthal orders.
    """
    return abs(m + sigma)


@dataclass(frozen=True)
class BasisSpec:
    """Basis selection: geometry, azimuthal order, weight index, spin, truncation.

    radial_pad widens every radial row; it is used by the eigenproblem
    assembly, where equations are tested on a slightly larger space than
    the unknowns occupy.
    """

    geometry: Geometry
    m: int
    alpha: float
    sigma: int
    L_max: int
    N_max: int
    radial_pad: int = 0

    def __post_init__(self):
        if self.sigma not in (-1, 0, 1):
            raise ValueError('sigma must be one of -1, 0, +1')
        if self.alpha <= -1:
            raise ValueError('alpha must exceed -1')
        if self.n_max_at(self.L_max) < 0:
            raise ValueError(
                f'triangular truncation empties at l = {self.L_max}: increase N_max')

    @property
    def spin_e(self):
        return spin_exponent(self.m, self.sigma)

    @property
    def height(self):
        return self.geometry.height

    @property
    def degree_step(self):
        """Radial degree budget consumed per two vertical degrees."""
        h = self.height
        return h.chi_o + h.chi_i + int(2 * h.chi_h * h.degree)

    def n_max_at(self, l):
        return self.N_max - math.ceil(l * self.degree_step / 2) + self.radial_pad

    @property
    def row_lengths(self):
        return tuple(self.n_max_at(l) + 1 for l in range(self.L_max + 1))

    @property
    def size(self):
        return sum(self.row_lengths)

    def radial_weight(self, l):
        """Weight of the radial polynomials at vertical degree l."""
        h = self.height
        geo = self.geometry
        a = (l + 0.5) * h.chi_o + self.alpha
        factors = []
        scale = 1.0
        c_h = (2 * l + 2 * self.alpha + 1) * h.chi_h
        if h.degree >= 1:
            factors.append((h.htilde, c_h))
        else:
            scale *= float(h.htilde.coeffs[0]) ** c_h
        if geo.kind == 'cylinder':
            b = float(self.spin_e)
        else:
            b = (l + 0.5) * h.chi_i + self.alpha
            # the spin factor rides along even at exponent zero so operators
            # that shift the spin stay expressible as factor parameter steps
            factors.append((geo.stilde_squared, float(self.spin_e)))
        return WeightSpec(a, b, tuple(factors), scale)

    @property
    def vertical_weight(self):
        return WeightSpec(self.alpha, self.alpha)

    def with_params(self, **kwargs):
        return replace(self, **kwargs)

    def prefactor_m(self, t):
        """Spin prefactor S(t)^e common to every vertical degree."""
        t = np.asarray(t, dtype=float)
        if self.geometry.kind == 'cylinder':
            return (1 + t) ** (self.spin_e / 2)
        return self.geometry.stilde(t) ** self.spin_e

    def prefactor_l(self, t, l):
        """Vertical-degree-dependent prefactor making basis functions Cartesian."""
        t = np.asarray(t, dtype=float)
        h = self.height
        value = h.htilde_at(t) ** (l * h.chi_h)
        if h.chi_o:
            value = value * (1 - t) ** (l / 2)
        if h.chi_i:
            value = value * (1 + t) ** (l / 2)
        return value


@dataclass(frozen=True)
class RadialWeightTable:
    """Per-vertical-degree radial weights and recurrences."""

    spec: BasisSpec
    weights: tuple
    recurrences: tuple

    def __getitem__(self, l):
        return self.recurrences[l]


def build_hierarchy(spec, extra_terms=24):
    """Radial recurrences for every vertical degree, by Christoffel lifting.

    Only the l = 0 recurrence is generated from scratch; each subsequent
    level lifts the previous one by the factors the weight gains per
    vertical degree: (1-t)**chi_o, (1+t)**chi_i, and htilde**(2 chi_h).
    The whole table costs O(N^2) instead of O(N^3).
    """
    h = spec.height
    plan_h, scale_h = _lift_plan_for_factor(h.htilde) if h.degree >= 1 else ([], 1.0)
    lifts_per_level = int(round(2 * h.chi_h)) if h.degree >= 1 else 0
    consumption = (h.chi_o + h.chi_i
                   + lifts_per_level * sum(1 if k == 'linear' else 2 for k, _ in plan_h))
    n_top = max(spec.n_max_at(l) + 1 + extra_terms for l in range(spec.L_max + 1))
    n_init = n_top + consumption * spec.L_max

    base = recurrence_for_weight(spec.radial_weight(0), n_init)
    alpha, beta, mass = base.alpha, base.beta, genjacobi.REAL(base.mass)
    remaining = n_init

    weights, recurrences = [], []
    for l in range(spec.L_max + 1):
        weight = spec.radial_weight(l)
        rec = genjacobi.Recurrence(weight, alpha[:remaining], beta[:remaining],
                                   float(mass))
        cache_recurrence(rec)
        weights.append(weight)
        recurrences.append(rec)
        if l == spec.L_max:
            break
        if h.chi_o:
            remaining -= 1
            alpha, beta, mass = _lift_linear_raw(alpha, beta, mass, remaining, -1.0, 1.0)
        if h.chi_i:
            remaining -= 1
            alpha, beta, mass = _lift_linear_raw(alpha, beta, mass, remaining, 1.0, 1.0)
        for _ in range(lifts_per_level):
            for kind, payload in plan_h:
                if kind == 'linear':
                    remaining -= 1
                    alpha, beta, mass = _lift_linear_raw(alpha, beta, mass, remaining,
                                                         payload[0], payload[1])
                else:
                    remaining -= 2
                    alpha, beta, mass = _lift_quadratic_raw(alpha, beta, mass,
                                                            remaining, payload)
            mass = mass * genjacobi.REAL(scale_h)
        if h.degree == 0 and h.chi_h:
            mass = mass * genjacobi.REAL(float(h.htilde.coeffs[0]) ** (2 * h.chi_h))
    return RadialWeightTable(spec, tuple(weights), tuple(recurrences))


@dataclass
class CoefficientTensor:
    """Triangularly truncated (l, k) expansion coefficients for one azimuthal order."""

    spec: BasisSpec
    blocks: list

    @classmethod
    def zeros(cls, spec):
        return cls(spec, [np.zeros(n, dtype=complex) for n in spec.row_lengths])

    @classmethod
    def random(cls, spec, rng):
        blocks = [rng.standard_normal(n) + 1j * rng.standard_normal(n)
                  for n in spec.row_lengths]
        return cls(spec, blocks)

    @classmethod
    def unit(cls, spec, l, k):
        out = cls.zeros(spec)
        out.blocks[l][k] = 1.0
        return out

    def copy(self):
        return CoefficientTensor(self.spec, [b.copy() for b in self.blocks])

    def flatten(self):
        """Concatenate with k fastest, then l."""
        return np.concatenate(self.blocks) if self.blocks else np.zeros(0, dtype=complex)

    @classmethod
    def from_flat(cls, spec, vector):
        vector = np.asarray(vector, dtype=complex)
        if len(vector) != spec.size:
            raise ValueError(f'expected {spec.size} coefficients, got {len(vector)}')
        blocks, start = [], 0
        for n in spec.row_lengths:
            blocks.append(vector[start:start + n].copy())
            start += n
        return cls(spec, blocks)

    def norm(self):
        return math.sqrt(sum(float(np.sum(np.abs(b) ** 2)) for b in self.blocks))

    def __add__(self, other):
        return CoefficientTensor(self.spec, [a + b for a, b in
                                             zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        return CoefficientTensor(self.spec, [a - b for a, b in
                                             zip(self.blocks, other.blocks)])

    def __mul__(self, scalar):
        return CoefficientTensor(self.spec, [scalar * b for b in self.blocks])

    __rmul__ = __mul__


@dataclass
class GridField:
    """Complex field values on the (t, eta) tensor-product analysis grid."""

    t: np.ndarray
    eta: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.t), len(self.eta)):
            raise ValueError('grid field values must have shape (n_t, n_eta)')


def analysis_grids(spec, n_rad=None, n_vert=None):
    """Radial (l = 0 weight) and vertical Jacobi rules for transforms.

    Default sizes integrate every quadratic-in-basis integrand exactly:
    vertical L_max + 2 nodes, radial N_max + ceil(L_max * step / 2) + 2.
    """
    if n_vert is None:
        n_vert = spec.L_max + 2
    if n_rad is None:
        n_rad = spec.N_max + math.ceil(spec.L_max * spec.degree_step / 2) + 2
    rad_rec = get_recurrence(spec.radial_weight(0), n_rad + 1)
    vert_rec = classical_jacobi_recurrence(spec.alpha, spec.alpha, n_vert + 1)
    return gauss_quadrature(rad_rec, n_rad), gauss_quadrature(vert_rec, n_vert)


def _radial_matrix(spec, l, t):
    """Rows of Q_k at the given radial nodes for vertical degree l."""
    n = spec.n_max_at(l)
    rec = get_recurrence(spec.radial_weight(l), n + 1)
    return evaluate(rec, np.asarray(t, dtype=float), n).astype(float)


def _vertical_matrix(spec, eta):
    rec = classical_jacobi_recurrence(spec.alpha, spec.alpha, spec.L_max + 1)
    return evaluate(rec, np.asarray(eta, dtype=float), spec.L_max).astype(float)


def basis_eval(spec, l, k, t, eta, phi=None):
    """One basis function on the (t, eta) grid, optionally with the phase."""
    if not 0 <= l <= spec.L_max or not 0 <= k <= spec.n_max_at(l):
        raise IndexError(f'basis index (l={l}, k={k}) outside the truncation')
    t = np.atleast_1d(np.asarray(t, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    radial = _radial_matrix(spec, l, t)[k] * spec.prefactor_m(t) * spec.prefactor_l(t, l)
    vertical = _vertical_matrix(spec, eta)[l]
    values = np.outer(radial, vertical).astype(complex)
    if phi is not None:
        values = values[..., np.newaxis] * np.exp(1j * spec.m * np.atleast_1d(phi))
    return values


def synthesize(spec, coeffs, t=None, eta=None):
    """Grid values of a coefficient tensor on the analysis (or a custom) grid."""
    if t is None or eta is None:
        rad, vert = analysis_grids(spec)
        t = rad.nodes.astype(float) if t is None else t
        eta = vert.nodes.astype(float) if eta is None else eta
    t = np.asarray(t, dtype=float)
    eta = np.asarray(eta, dtype=float)
    vert = _vertical_matrix(spec, eta)
    pref_m = spec.prefactor_m(t)
    values = np.zeros((len(t), len(eta)), dtype=complex)
    for l in range(spec.L_max + 1):
        radial = _radial_matrix(spec, l, t)
        profile = (coeffs.blocks[l] @ radial) * pref_m * spec.prefactor_l(t, l)
        values += np.outer(profile, vert[l])
    return GridField(t, eta, values)


def analyze(spec, field):
    """Project a grid field onto the basis: vertical contraction, then radial.

    The vertical quadrature sifts out each vertical degree; the radial
    quadrature then inverts the l-dependent generalized Jacobi expansion
    with the prefactors folded into the measure.
    """
    rad, vert = analysis_grids(spec)
    t = rad.nodes.astype(float)
    eta = vert.nodes.astype(float)
    if field.values.shape != (len(t), len(eta)):
        raise ValueError('field grid does not match the analysis grid of this spec')
    vert_polys = _vertical_matrix(spec, eta)
    weights_eta = vert.weights.astype(float)
    weights_t = rad.weights.astype(float)
    pref_m = spec.prefactor_m(t)

    out = CoefficientTensor.zeros(spec)
    contracted = field.values @ (weights_eta * vert_polys).T   # (n_t, L_max+1)
    for l in range(spec.L_max + 1):
        radial = _radial_matrix(spec, l, t)
        kernel = weights_t * spec.prefactor_l(t, l) / pref_m * contracted[:, l]
        out.blocks[l] = radial @ kernel
    return out


def _prefactor_log_derivative(spec, t, l):
    """d/dt log( prefactor_m(t) * prefactor_l(t, l) ) at interior points."""
    t = np.asarray(t, dtype=float)
    h = spec.height
    geo = spec.geometry
    hval = h.htilde_at(t)
    hder = h.htilde.derivative()(t).astype(float)
    out = l * h.chi_h * hder / hval
    if h.chi_o:
        out = out - (l / 2) / (1 - t)
    if h.chi_i:
        out = out + (l / 2) / (1 + t)
    e = spec.spin_e
    if e:
        if geo.kind == 'cylinder':
            out = out + (e / 2) / (1 + t)
        else:
            s2 = geo.stilde_squared
            out = out + (e / 2) * s2.derivative()(t).astype(float) / s2(t).astype(float)
    return out


def synthesize_with_derivatives(spec, coeffs, t, eta):
    """Field values plus d/dt and d/deta on an interior grid.

    Used by the grid-space differentiation oracle: the radial and vertical
    factors are differentiated through their recurrences and the prefactor
    log-derivatives, so this path shares no code with the banded operator
    assembly.
    """
    t = np.asarray(t, dtype=float)
    eta = np.asarray(eta, dtype=float)
    vrec = classical_jacobi_recurrence(spec.alpha, spec.alpha, spec.L_max + 1)
    vert = evaluate(vrec, eta, spec.L_max).astype(float)
    dvert = genjacobi.evaluate_derivative(vrec, eta, spec.L_max).astype(float)
    pref_m = spec.prefactor_m(t)
    f = np.zeros((len(t), len(eta)), dtype=complex)
    df_dt = np.zeros_like(f)
    df_de = np.zeros_like(f)
    for l in range(spec.L_max + 1):
        n = spec.n_max_at(l)
        rec = get_recurrence(spec.radial_weight(l), n + 1)
        Q = evaluate(rec, t, n).astype(float)
        dQ = genjacobi.evaluate_derivative(rec, t, n).astype(float)
        pref = pref_m * spec.prefactor_l(t, l)
        logd = _prefactor_log_derivative(spec, t, l)
        profile = (coeffs.blocks[l] @ Q) * pref
        dprofile = ((coeffs.blocks[l] @ dQ) + (coeffs.blocks[l] @ Q) * logd) * pref
        f += np.outer(profile, vert[l])
        df_dt += np.outer(dprofile, vert[l])
        df_de += np.outer(profile, dvert[l])
    return f, df_dt, df_de


def vertical_couplings(alpha, L_max):
    """Vertical Jacobi coupling coefficients used by the 3D operators.

    gamma_l and delta_l convert P_l^(alpha,alpha) into the (alpha+1,alpha+1)
    family; lambda_l is the derivative coupling; beta_l the recurrence
    off-diagonal.  All are returned for l = 0..L_max (delta_0 = delta_1 = 0).
    """
    n = L_max + 3
    weight = WeightSpec(alpha, alpha)
    e_a = genjacobi.embedding(weight, 'a', False, n, n)
    e_b = genjacobi.embedding(weight.shifted(da=1), 'b', False, n, n)
    E = (e_b @ e_a).toarray()
    D = genjacobi.differential(weight, 1, 1, (), n, n).toarray()
    gamma = np.array([E[l, l] for l in range(L_max + 1)])
    delta = np.array([-E[l - 2, l] if l >= 2 else 0.0 for l in range(L_max + 1)])
    lam = np.array([D[l - 1, l] if l >= 1 else 0.0 for l in range(L_max + 1)])
    beta = classical_jacobi_recurrence(alpha, alpha, L_max + 2).beta.astype(float)
    return gamma, delta, lam, beta
