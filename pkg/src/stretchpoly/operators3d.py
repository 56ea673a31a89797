"""
Sparse 3D operators on the gyroscopic bases.

Every operator decomposes into vertical-degree coupling blocks: a block
shifts l by a fixed dl and applies a banded radial matrix at each level,
weighted by the vertical conversion coefficients gamma_l, delta_l,
lambda_l or the recurrence off-diagonals beta_l.  The radial matrices are
assembled by quadrature projection of a grid-space action (an optional
generalized Jacobi differential followed by an optional polynomial
multiplication) onto the target level's polynomials, so embeddings never
need to be formed explicitly.

Spin-modifying derivatives couple dl in {0, -2}, spin-preserving ones
dl = -1; upper-half domains add dl = -1 derivative blocks carrying the
height-derivative multiplication and double the vertical scaling.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .basis import BasisSpec, CoefficientTensor, spin_exponent, vertical_couplings
from .genjacobi import (Polynomial, REAL, STRUCTURAL_ZERO, evaluate,
                        evaluate_derivative, gauss_quadrature, get_recurrence)

__all__ = [
    'BlockOperator', 'AssemblyError', 'fundamental', 'gradient', 'divergence',
    'curl', 'scalar_laplacian', 'vector_laplacian', 'vector_laplacian_blocks',
    'coordinate_multiply', 'conversion', 'conversion_adjoint',
    'boundary_radial', 'boundary_vertical', 'tau_projection', 'tau_positions',
]


class AssemblyError(ValueError):
    """Operator assembly bookkeeping violation."""


@dataclass
class BlockOperator:
    """Collection of (dl, per-level radial matrix) blocks between two specs."""

    source: BasisSpec
    target: BasisSpec
    blocks: dict            # dl -> {l_source: ndarray}

    def apply(self, coeffs):
        if coeffs.spec != self.source:
            raise AssemblyError('coefficient tensor does not match operator source')
        out = CoefficientTensor.zeros(self.target)
        for dl, levels in self.blocks.items():
            for l, mat in levels.items():
                lt = l + dl
                out.blocks[lt] = out.blocks[lt] + mat @ coeffs.blocks[l]
        return out

    def __matmul__(self, other):
        if isinstance(other, CoefficientTensor):
            return self.apply(other)
        if other.target != self.source:
            raise AssemblyError('composition spec mismatch')
        blocks = {}
        for dl_b, levels_b in other.blocks.items():
            for l, mat_b in levels_b.items():
                mid = l + dl_b
                for dl_a, levels_a in self.blocks.items():
                    mat_a = levels_a.get(mid)
                    if mat_a is None:
                        continue
                    dl = dl_a + dl_b
                    blocks.setdefault(dl, {})
                    prod = mat_a @ mat_b
                    if l in blocks[dl]:
                        blocks[dl][l] = blocks[dl][l] + prod
                    else:
                        blocks[dl][l] = prod
        return BlockOperator(other.source, self.target, blocks)

    def __add__(self, other):
        if self.source != other.source or self.target != other.target:
            raise AssemblyError('sum spec mismatch')
        blocks = {dl: dict(levels) for dl, levels in self.blocks.items()}
        for dl, levels in other.blocks.items():
            blocks.setdefault(dl, {})
            for l, mat in levels.items():
                if l in blocks[dl]:
                    blocks[dl][l] = blocks[dl][l] + mat
                else:
                    blocks[dl][l] = mat
        return BlockOperator(self.source, self.target, blocks)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        blocks = {dl: {l: scalar * mat for l, mat in levels.items()}
                  for dl, levels in self.blocks.items()}
        return BlockOperator(self.source, self.target, blocks)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    @property
    def shape(self):
        return (self.target.size, self.source.size)

    def matrix(self):
        """Global sparse matrix, coefficients ordered k fastest, then l."""
        col_off = np.concatenate(([0], np.cumsum(self.source.row_lengths)))
        row_off = np.concatenate(([0], np.cumsum(self.target.row_lengths)))
        out = sparse.lil_matrix(self.shape, dtype=complex)
        for dl, levels in self.blocks.items():
            for l, mat in levels.items():
                lt = l + dl
                r0, c0 = row_off[lt], col_off[l]
                out[r0:r0 + mat.shape[0], c0:c0 + mat.shape[1]] += mat
        return out.tocsr()

    def max_norm(self):
        values = [np.max(np.abs(mat)) for levels in self.blocks.values()
                  for mat in levels.values() if mat.size]
        return max(values) if values else 0.0

    def dl_offsets(self):
        return sorted(dl for dl, levels in self.blocks.items()
                      if any(np.max(np.abs(m)) > 0 for m in levels.values()))


def _factor_slot(weight, poly):
    for i, (p, _) in enumerate(weight.factors):
        if p == poly:
            return i
    return None


def _diff_action(weight, da, db, lowered):
    """Grid action of the generalized differential with the given sign pattern.

    lowered lists (polynomial, current exponent) pairs entering the index
    tuple; constants contribute to rho but not rho'.  The zeroth-order
    terms use the source weight's Jacobi parameters.
    """
    rho = Polynomial.one()
    for poly, _ in lowered:
        rho = rho * poly
    parts = []
    for i, (poly, c) in enumerate(lowered):
        part = Polynomial((float(c),)) * poly.derivative()
        for j, (other, _) in enumerate(lowered):
            if j != i:
                part = part * other
        parts.append(part)
    a, b = REAL(weight.a), REAL(weight.b)

    def action(z, P, dP):
        r = rho(z)
        rp = sum(part(z) for part in parts) if parts else np.zeros_like(z)
        if (da, db) == (1, 1):
            return r * dP + rp * P
        if (da, db) == (1, -1):
            return r * (b * P + (1 + z) * dP) + rp * (1 + z) * P
        if (da, db) == (-1, 1):
            return r * (-a * P + (1 - z) * dP) + rp * (1 - z) * P
        return (r * (-(1 + z) * a * P + (1 - z) * b * P + (1 - z * z) * dP)
                + rp * (1 - z * z) * P)

    return action, rho.degree + 1


def _radial_matrix(src, tgt, l, dl, diff=None, mult=None):
    """Dense radial block: quadrature projection of the composed action."""
    lt = l + dl
    dom = src.radial_weight(l)
    codom = tgt.radial_weight(lt)
    rows = tgt.n_max_at(lt) + 1
    cols = src.n_max_at(l) + 1
    if rows <= 0 or cols <= 0:
        return np.zeros((max(rows, 0), max(cols, 0)))
    degree = 0
    if diff is not None:
        base_action, extra = _diff_action(dom, diff['da'], diff['db'],
                                          diff.get('lowered', ()))
        degree += extra
    else:
        base_action = lambda z, P, dP: P
    if mult is not None and mult.degree == 0:
        scale = float(mult.coeffs[0])
        mult = None
        base = base_action
        base_action = lambda z, P, dP: scale * base(z, P, dP)
    if mult is None:
        action = base_action
    else:
        degree += mult.degree
        inner = base_action
        action = lambda z, P, dP: mult(z) * inner(z, P, dP)

    n_quad = math.ceil((rows - 1 + cols - 1 + degree + 1) / 2) + 2
    dom_rec = get_recurrence(dom, cols + 1)
    codom_rec = get_recurrence(codom, max(n_quad + 1, rows + 1))
    rule = gauss_quadrature(codom_rec, n_quad)
    z = rule.nodes
    P = evaluate(dom_rec, z, cols - 1)
    dP = evaluate_derivative(dom_rec, z, cols - 1)
    values = action(z, P, dP)
    Q = evaluate(codom_rec, z, rows - 1)
    entries = ((Q * rule.weights) @ values.T).astype(float)
    peak = np.max(np.abs(entries)) if entries.size else 0.0
    if peak > 0:
        entries[np.abs(entries) < STRUCTURAL_ZERO * peak] = 0.0
    return entries


def _assemble(src, tgt, block_specs):
    """block_specs: list of (dl, coeff_of_l callable, diff_of_l, mult_of_l)."""
    blocks = {}
    for dl, coeff_fn, diff_fn, mult_fn in block_specs:
        levels = {}
        for l in range(src.L_max + 1):
            lt = l + dl
            if not 0 <= lt <= tgt.L_max:
                continue
            c = coeff_fn(l)
            if c == 0:
                continue
            mat = _radial_matrix(src, tgt, l, dl,
                                 diff=diff_fn(l) if diff_fn else None,
                                 mult=mult_fn(l) if mult_fn else None)
            levels[l] = c * mat
        if levels:
            blocks[dl] = levels
    return BlockOperator(src, tgt, blocks)


def _spin_polynomial(spec):
    """Polynomial whose parameter step carries one unit of spin exponent."""
    if spec.geometry.kind == 'cylinder':
        return Polynomial((1.0, 1.0))
    return spec.geometry.stilde_squared


def fundamental(spec, delta, physical=True):
    """Fundamental derivative D^delta: (alpha, sigma) -> (alpha+1, sigma+delta).

    delta = +1 and -1 are the spin-raising and -lowering radial derivatives,
    delta = 0 the vertical derivative.  With physical=True the radial
    operators carry their geometry scale (2/S_o for the cylinder,
    2/(S_o^2 - S_i^2) for the annulus), so the matrices represent true
    physical derivatives.
    """
    if delta not in (-1, 0, 1):
        raise AssemblyError('delta must be one of -1, 0, +1')
    geo = spec.geometry
    h = geo.height
    half = geo.extent == 'upper_half'
    gamma, dlt, lam, _ = vertical_couplings(spec.alpha, spec.L_max)
    tgt = spec.with_params(alpha=spec.alpha + 1, sigma=spec.sigma + delta)

    if delta == 0:
        scale = 2.0 if half else 1.0
        return _assemble(spec, tgt, [(-1, lambda l: scale * lam[l], None, None)])

    e_src, e_tgt = spec.spin_e, tgt.spin_e
    de = e_tgt - e_src
    spin_poly = _spin_polynomial(spec)
    is_cyl = geo.kind == 'cylinder'

    def diff_dl0(l):
        lowered = []
        if not is_cyl and de == -1:
            lowered.append((spin_poly, float(e_src)))
        db = de if is_cyl else 1
        return {'da': 1, 'db': db, 'lowered': tuple(lowered)}

    def diff_dl2(l):
        lowered = [(h.htilde, (2 * l + 2 * spec.alpha + 1) * h.chi_h)]
        if not is_cyl and de == -1:
            lowered.append((spin_poly, float(e_src)))
        da = -1 if h.chi_o else 1
        db = de if is_cyl else (-1 if h.chi_i else 1)
        return {'da': da, 'db': db, 'lowered': tuple(lowered)}

    mult_dl2 = (lambda l: h.htilde) if h.chi_h == 1.0 else None

    block_specs = [
        (0, lambda l: gamma[l], diff_dl0, None),
        (-2, lambda l: -dlt[l], diff_dl2, mult_dl2),
    ]
    if half:
        hprime = h.htilde.derivative()
        extra = spin_poly if de == -1 else Polynomial.one()
        mult_dl1 = lambda l: hprime * extra
        block_specs.append((-1, lambda l: -lam[l], None, mult_dl1))

    op = _assemble(spec, tgt, block_specs)
    if physical:
        op = (2.0 / geo.radial_jacobian if not is_cyl else 2.0 / geo.S_o) * op
    return op


def gradient(spec):
    """Spin components of the scalar gradient, keyed by output spin."""
    if spec.sigma != 0:
        raise AssemblyError('gradient acts on spin-0 scalars')
    return {delta: fundamental(spec, delta) for delta in (1, -1, 0)}


def divergence(spec):
    """Divergence contributions keyed by input spin component."""
    return {1: fundamental(spec.with_params(sigma=1), -1),
            -1: fundamental(spec.with_params(sigma=-1), +1),
            0: fundamental(spec.with_params(sigma=0), 0)}


def curl(spec):
    """Curl blocks keyed by (output spin, input spin), scale factors folded in.

    Derived by projecting the cylindrical-component curl onto the spinor
    basis: curl(e+ u) = +i e+ D0 u - i e0 D- u, curl(e- u) = +i e0 D+ u
    - i e- D0 u, curl(e0 u) = -i e+ D+ u + i e- D- u.  These signs make
    curl(grad) and div(curl) vanish identically on the truncation.
    """
    def d(s, delta):
        return fundamental(spec.with_params(sigma=s), delta)

    return {
        (1, 1): 1j * d(1, 0),
        (0, 1): -1j * d(1, -1),
        (0, -1): 1j * d(-1, 1),
        (-1, -1): -1j * d(-1, 0),
        (1, 0): -1j * d(0, 1),
        (-1, 0): 1j * d(0, -1),
    }


def scalar_laplacian(spec):
    """div(grad): maps (alpha, 0) to (alpha + 2, 0)."""
    grad = gradient(spec)
    up = spec.with_params(alpha=spec.alpha + 1)
    return (fundamental(up.with_params(sigma=1), -1) @ grad[1]
            + fundamental(up.with_params(sigma=-1), 1) @ grad[-1]
            + fundamental(up.with_params(sigma=0), 0) @ grad[0])


def vector_laplacian(spec, sigma):
    """Spin-diagonal vector Laplacian via grad(div) - curl(curl)."""
    comp = vector_laplacian_blocks(spec)
    return comp[(sigma, sigma)]


def vector_laplacian_blocks(spec):
    """All (output, input) spin blocks of grad(div) - curl(curl).

    The off-diagonal blocks vanish; they are returned so tests can verify
    the spin-diagonal structure.
    """
    div = divergence(spec)
    up = spec.with_params(alpha=spec.alpha + 1)
    grad_up = {delta: fundamental(up.with_params(sigma=0), delta)
               for delta in (1, -1, 0)}
    c1 = curl(spec)
    c2 = curl(up)
    out = {}
    for s_in in (1, -1, 0):
        for s_out in (1, -1, 0):
            term = None
            gd = grad_up[s_out] @ div[s_in]
            term = gd
            for mid in (1, -1, 0):
                a = c2.get((s_out, mid))
                b = c1.get((mid, s_in))
                if a is not None and b is not None:
                    term = term - a @ b
            out[(s_out, s_in)] = term
    return out


def coordinate_multiply(spec, which, mode='multiply'):
    """Radial or axial coordinate-vector operators.

    which = 's_vec': multiply mode sends a spin-0 scalar to the two
    transverse spin components (dict keyed by output spin); dot mode sends
    spin +-1 components to spin 0 (dict keyed by input spin).
    which = 'z_vec': both modes couple spin 0 to spin 0 and return a single
    BlockOperator.
    """
    geo = spec.geometry
    h = geo.height
    half = geo.extent == 'upper_half'
    if which == 's_vec':
        scale = geo.S_o / 2 if geo.kind == 'cylinder' else 0.5
        spin_poly = _spin_polynomial(spec)
        if mode == 'multiply':
            if spec.sigma != 0:
                raise AssemblyError('s-vector multiplication acts on scalars')
            out = {}
            for s_out in (1, -1):
                tgt = spec.with_params(sigma=s_out)
                mult = None if tgt.spin_e > spec.spin_e else (lambda l: spin_poly)
                out[s_out] = _assemble(spec, tgt,
                                       [(0, lambda l: scale, None, mult)])
            return out
        if mode == 'dot':
            out = {}
            for s_in in (1, -1):
                src = spec.with_params(sigma=s_in)
                tgt = spec.with_params(sigma=0)
                mult = None if tgt.spin_e > src.spin_e else (lambda l: spin_poly)
                out[s_in] = _assemble(src, tgt,
                                      [(0, lambda l: scale, None, mult)])
            return out
        raise AssemblyError(f'unknown mode {mode!r}')

    if which != 'z_vec':
        raise AssemblyError(f'unknown coordinate vector {which!r}')
    if spec.sigma != 0:
        raise AssemblyError('z-vector operators act on spin-0 components')
    _, _, _, beta = vertical_couplings(spec.alpha, spec.L_max)
    down_poly = Polynomial.one()
    if h.chi_o:
        down_poly = down_poly * Polynomial((1.0, -1.0))
    if h.chi_i:
        down_poly = down_poly * Polynomial((1.0, 1.0))
    for _ in range(int(round(2 * h.chi_h))):
        down_poly = down_poly * h.htilde
    scale = 0.5 if half else 1.0
    block_specs = [
        (1, lambda l: scale * beta[l], None, None),
        (-1, lambda l: scale * (beta[l - 1] if l >= 1 else 0.0), None,
         lambda l: down_poly),
    ]
    if half:
        block_specs.append((0, lambda l: 0.5, None, lambda l: h.htilde))
    return _assemble(spec, spec, block_specs)


def conversion(spec):
    """Identity embedding raising the weight index by one."""
    gamma, dlt, _, _ = vertical_couplings(spec.alpha, spec.L_max)
    tgt = spec.with_params(alpha=spec.alpha + 1)
    h = spec.geometry.height
    down_poly = Polynomial.one()
    if h.chi_o:
        down_poly = down_poly * Polynomial((1.0, -1.0))
    if h.chi_i:
        down_poly = down_poly * Polynomial((1.0, 1.0))
    for _ in range(int(round(2 * h.chi_h))):
        down_poly = down_poly * h.htilde
    return _assemble(spec, tgt, [
        (0, lambda l: gamma[l], None, None),
        (-2, lambda l: -dlt[l], None, lambda l: down_poly),
    ])


def conversion_adjoint(spec):
    """Multiplication by the alpha = 1 boundary polynomial, lowering the index.

    The action is (1 - eta^2)(1 - t) htilde^2 on the cylinder and
    (1 - eta^2)(1 - t^2) htilde^2 on the annulus (htilde power 2 chi_h in
    the general case); it vanishes on every boundary, which is what makes
    it the no-slip recombination operator.
    """
    if spec.alpha <= 0:
        raise AssemblyError('conversion adjoint needs a valid target: alpha > 0')
    geo = spec.geometry
    h = geo.height
    gamma, dlt, _, _ = vertical_couplings(spec.alpha - 1, spec.L_max + 2)
    pad = spec.radial_pad + spec.degree_step + _radial_boundaries(geo)
    tgt = spec.with_params(alpha=spec.alpha - 1, L_max=spec.L_max + 2,
                           radial_pad=pad)
    hpow = Polynomial.one()
    for _ in range(int(round(2 * h.chi_h))):
        hpow = hpow * h.htilde
    mult0 = Polynomial((1.0, -1.0)) * hpow
    if geo.kind == 'annulus':
        mult0 = mult0 * Polynomial((1.0, 1.0))
    mult2 = Polynomial((1.0, -1.0)) if not h.chi_o else Polynomial.one()
    if geo.kind == 'annulus' and not h.chi_i:
        mult2 = mult2 * Polynomial((1.0, 1.0))
    return _assemble(spec, tgt, [
        (0, lambda l: gamma[l], None, lambda l: mult0),
        (2, lambda l: -dlt[l + 2], None, lambda l: mult2),
    ])


def _radial_boundaries(geo):
    return 1 if geo.kind == 'cylinder' else 2


def boundary_radial(spec, t0):
    """Rows evaluating the radial series at t = t0, block diagonal over l.

    Row l contracts the radial coefficients of vertical degree l; the
    result is a vertical coefficient vector of the field restricted to t0.
    """
    if not -1 <= t0 <= 1:
        raise AssemblyError('t0 must lie in [-1, 1]')
    rows = sparse.lil_matrix((spec.L_max + 1, spec.size))
    offsets = np.concatenate(([0], np.cumsum(spec.row_lengths)))
    point = np.array([t0], dtype=float)
    pref = float(spec.prefactor_m(point)[0])
    for l in range(spec.L_max + 1):
        n = spec.n_max_at(l)
        rec = get_recurrence(spec.radial_weight(l), n + 1)
        Q = evaluate(rec, point, n).astype(float)[:, 0]
        rows[l, offsets[l]:offsets[l + 1]] = pref * float(spec.prefactor_l(point, l)[0]) * Q
    return rows.tocsr()


def boundary_vertical(spec, eta0):
    """Rows evaluating the vertical series at eta = eta0, dense over l.

    Each l level is first expressed in the common radial space of weight
    index L_max: the height prefactor htilde^l is absorbed by multiplication
    and the remaining parameter gap closed by embedding.  Geometries with
    equatorial singularities mix half-integer prefactor powers between
    vertical degrees and have no common polynomial space, so they are not
    supported here.
    """
    if not -1 <= eta0 <= 1:
        raise AssemblyError('eta0 must lie in [-1, 1]')
    h = spec.geometry.height
    if h.chi_o or h.chi_i:
        raise AssemblyError('vertical boundary rows need a non-vanishing height')
    if h.degree >= 1:
        # common radial space: height parameter lowered to L_max + 2 alpha + 1
        base = spec.radial_weight(spec.L_max)
        slot = _factor_slot(base, h.htilde)
        gap = (spec.L_max + 2 * spec.alpha + 1) * h.chi_h - base.exponents[slot]
        dc = [0.0] * base.num_factors
        dc[slot] = gap
        common = base.shifted(dc=tuple(dc))
    else:
        common = spec.radial_weight(spec.L_max)
    n_common = spec.N_max + spec.radial_pad + 1
    vrec = get_recurrence(spec.vertical_weight, spec.L_max + 1)
    vert = evaluate(vrec, np.array([eta0]), spec.L_max).astype(float)[:, 0]
    offsets = np.concatenate(([0], np.cumsum(spec.row_lengths)))
    out = sparse.lil_matrix((n_common, spec.size))
    for l in range(spec.L_max + 1):
        cols = spec.n_max_at(l) + 1
        dom = spec.radial_weight(l)
        # multiply by htilde^(l chi_h * 2 ... ) : prefactor htilde^(l chi_h)
        mult = Polynomial.one()
        for _ in range(int(round(l * h.chi_h))):
            mult = mult * h.htilde
        degree = mult.degree
        n_quad = math.ceil((n_common - 1 + cols - 1 + degree + 1) / 2) + 2
        codom_rec = get_recurrence(common, max(n_quad + 1, n_common + 1))
        rule = gauss_quadrature(codom_rec, n_quad)
        z = rule.nodes
        P = evaluate(get_recurrence(dom, cols + 1), z, cols - 1)
        Q = evaluate(codom_rec, z, n_common - 1)
        block = ((Q * rule.weights) @ (mult(z) * P).T).astype(float)
        out[:, offsets[l]:offsets[l + 1]] = vert[l] * block
    return out.tocsr()


def tau_positions(spec):
    """Flat indices of the highest radial and vertical modes of a spec.

    Slices the last n_rb radial coefficients of each level (one per radial
    boundary) and the entire top two vertical degrees.
    """
    n_rb = _radial_boundaries(spec.geometry)
    offsets = np.concatenate(([0], np.cumsum(spec.row_lengths)))
    positions = []
    for l in range(spec.L_max + 1):
        start, stop = offsets[l], offsets[l + 1]
        if l >= spec.L_max - 1:
            positions.extend(range(start, stop))
        else:
            positions.extend(range(max(start, stop - n_rb), stop))
    return np.array(sorted(set(positions)), dtype=int)


def tau_projection(spec, flavor='default'):
    """Tau columns projecting the highest modes onto an equation space.

    default: columns of the weight-index conversion from alpha - 1;
    double_conversion: two stacked conversions from alpha - 2;
    identity: identity columns at the sliced positions.
    """
    if flavor == 'identity':
        pos = tau_positions(spec)
        mat = sparse.lil_matrix((spec.size, len(pos)))
        for j, p in enumerate(pos):
            mat[p, j] = 1.0
        return mat.tocsr()
    if flavor == 'default':
        if spec.alpha - 1 <= -1:
            raise AssemblyError(f'default tau flavor needs alpha > 0, got {spec.alpha}')
        src = spec.with_params(alpha=spec.alpha - 1)
        op = conversion(src).matrix()
    elif flavor == 'double_conversion':
        if spec.alpha - 2 <= -1:
            raise AssemblyError(
                f'double_conversion tau flavor needs alpha > 1, got {spec.alpha}')
        low = spec.with_params(alpha=spec.alpha - 2)
        mid = spec.with_params(alpha=spec.alpha - 1)
        op = (conversion(mid) @ conversion(low)).matrix()
    else:
        raise AssemblyError(f'unknown tau flavor {flavor!r}')
    pos = tau_positions(spec)
    return sparse.csr_matrix(op[:, pos])
