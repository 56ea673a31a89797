"""
Damped inertial waves: assembly and targeted solution of the generalized
eigenproblem L x = lambda M x in rotating stretched domains.

Momentum and continuity read

    lambda u + 2 e_z x u = -grad p + E lap u,      div u = 0,

with no-slip boundaries enforced by Galerkin recombination: the velocity
unknowns are auxiliary coefficients V with u = Idagger V, where Idagger
multiplies by the boundary polynomial that vanishes on every wall.  The
equations are tested on a slightly larger space than the unknowns occupy;
tau columns sliced from conversion operators absorb the highest-mode
residuals and make the system square.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from .basis import BasisSpec, CoefficientTensor, analysis_grids, synthesize
from .geometry import Geometry
from .operators3d import (BlockOperator, conversion, conversion_adjoint,
                          fundamental, tau_positions, tau_projection,
                          vector_laplacian_blocks)

__all__ = [
    'SystemAssembly', 'EigenSolution', 'assemble', 'solve_targeted',
    'find_fundamental', 'find_fundamental_converged', 'reconstruct', 'scan',
    'no_slip_error', 'divergence_error', 'SPINS',
]

SPINS = (1, -1, 0)


def _project_rows(op, new_target):
    """Restrict or zero-pad every level's rows onto a new target truncation."""
    blocks = {}
    for dl, levels in op.blocks.items():
        out = {}
        for l, mat in levels.items():
            lt = l + dl
            if lt > new_target.L_max:
                continue
            n_new = new_target.row_lengths[lt]
            if mat.shape[0] >= n_new:
                out[l] = mat[:n_new, :]
            else:
                pad = np.zeros((n_new - mat.shape[0], mat.shape[1]), dtype=mat.dtype)
                out[l] = np.vstack([mat, pad])
        if out:
            blocks[dl] = out
    return BlockOperator(op.source, new_target, blocks)


@dataclass
class SystemAssembly:
    """Assembled generalized eigensystem with its spec bookkeeping."""

    geometry: Geometry
    m: int
    ekman: float
    tau_flavor: str
    v_specs: dict
    p_spec: BasisSpec
    u_specs: dict
    eq_specs: dict
    L: sparse.csr_matrix
    M: sparse.csr_matrix
    column_slices: dict
    recombiners: dict

    @property
    def size(self):
        return self.L.shape[0]

    def split(self, x):
        """Break a solution vector into named coefficient tensors."""
        out = {}
        for sigma in SPINS:
            sl = self.column_slices[('V', sigma)]
            out[('V', sigma)] = CoefficientTensor.from_flat(self.v_specs[sigma], x[sl])
        out['P'] = CoefficientTensor.from_flat(self.p_spec, x[self.column_slices['P']])
        out['tau'] = x[self.column_slices['tau']]
        return out

    def velocity(self, x):
        """Recombined velocity tensors u_sigma = Idagger V_sigma."""
        fields = self.split(x)
        return {sigma: self.recombiners[sigma] @ fields[('V', sigma)]
                for sigma in SPINS}


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    shift: complex
    operator_scale: float

    def __len__(self):
        return len(self.eigenvalues)


def assemble(geometry, m, ekman, L_max, N_max, tau_flavor='default'):
    """Assemble L and M for the damped inertial waves system.

    The unknown layout is (V_+, V_-, V_0, P, tau); velocity and pressure
    carry weight index alpha = 1.  Momentum rows live at alpha = 2, the
    divergence row at alpha = 1, each tested on the (L_max + 2, N + n_b)
    extension of the unknowns' truncation, with n_b radial boundaries.
    """
    if ekman < 0:
        raise ValueError('Ekman number must be non-negative')
    errors = geometry.validate()
    if errors:
        raise ValueError('; '.join(errors))

    n_rb = 1 if geometry.kind == 'cylinder' else 2
    v_specs = {s: BasisSpec(geometry, m, 1.0, s, L_max, N_max) for s in SPINS}
    p_spec = BasisSpec(geometry, m, 1.0, 0, L_max, N_max)
    recombiners = {s: conversion_adjoint(v_specs[s]) for s in SPINS}
    u_specs = {s: recombiners[s].target for s in SPINS}
    eq_specs = {('mom', s): BasisSpec(geometry, m, 2.0, s, L_max + 2, N_max,
                                      radial_pad=n_rb) for s in SPINS}
    eq_specs['div'] = BasisSpec(geometry, m, 1.0, 0, L_max + 2, N_max,
                                radial_pad=n_rb)

    B = v_specs[0].size
    B_eq = eq_specs['div'].size
    n_tau = B_eq - B
    size = 4 * B_eq
    assert size == 4 * B + 4 * n_tau

    column_slices = {}
    offset = 0
    for sigma in SPINS:
        column_slices[('V', sigma)] = slice(offset, offset + B)
        offset += B
    column_slices['P'] = slice(offset, offset + B)
    offset += B
    column_slices['tau'] = slice(offset, offset + 4 * n_tau)
    row_slices = {('mom', 1): slice(0, B_eq),
                  ('mom', -1): slice(B_eq, 2 * B_eq),
                  ('mom', 0): slice(2 * B_eq, 3 * B_eq),
                  'div': slice(3 * B_eq, 4 * B_eq)}

    lap_blocks = vector_laplacian_blocks(u_specs[0]) if ekman else None

    L = sparse.lil_matrix((size, size), dtype=complex)
    M = sparse.lil_matrix((size, size), dtype=complex)

    for i, sigma in enumerate(SPINS):
        rows = row_slices[('mom', sigma)]
        cols = column_slices[('V', sigma)]
        eq = eq_specs[('mom', sigma)]

        convert_once = conversion(u_specs[sigma])
        cascade = _project_rows(conversion(convert_once.target) @ convert_once,
                                eq) @ recombiners[sigma]
        M[rows, cols] = cascade.matrix()

        bulk = None
        if ekman:
            lap = _project_rows(lap_blocks[(sigma, sigma)], eq) @ recombiners[sigma]
            bulk = ekman * lap
        if sigma != 0:
            coriolis = (-2j * sigma) * cascade
            bulk = coriolis if bulk is None else bulk + coriolis
        if bulk is not None:
            L[rows, cols] = bulk.matrix()

        pressure = _project_rows(fundamental(p_spec, sigma), eq)
        L[rows, column_slices['P']] = -pressure.matrix()

        div_term = _project_rows(fundamental(u_specs[sigma], -sigma),
                                 eq_specs['div']) @ recombiners[sigma]
        L[row_slices['div'], cols] = div_term.matrix()

        taus = tau_projection(eq, tau_flavor)
        t0 = column_slices['tau'].start + i * n_tau
        L[rows, t0:t0 + n_tau] = taus

    # double_conversion is defined only for the alpha = 2 momentum rows;
    # the alpha = 1 divergence row keeps the single-conversion projection
    div_flavor = 'default' if tau_flavor == 'double_conversion' else tau_flavor
    div_taus = tau_projection(eq_specs['div'], div_flavor)
    t0 = column_slices['tau'].start + 3 * n_tau
    L[row_slices['div'], t0:t0 + n_tau] = div_taus

    return SystemAssembly(geometry, m, ekman, tau_flavor, v_specs, p_spec,
                          u_specs, eq_specs, L.tocsr(), M.tocsr(),
                          column_slices, recombiners)


def solve_targeted(system, shift, n_modes=8, max_iter=None, tol=1e-8):
    """Shift-invert Arnoldi around the target shift.

    (L - shift M) is factored once by dense LU; ARPACK iterates on the
    M-multiplied solves.  Modes are returned sorted by distance to the
    shift with relative residuals ||(L - lambda M) x|| / (||L|| ||x||);
    non-converged extras are dropped.
    """
    L, M = system.L, system.M
    n = L.shape[0]
    dense = (L - shift * M).toarray()
    try:
        factors = lu_factor(dense)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f'shift {shift} collides with a mode: {exc}') from exc

    op = LinearOperator((n, n), matvec=lambda v: lu_solve(factors, M @ v),
                        dtype=complex)
    v0 = np.full(n, 1.0 + 0.5j)
    k = min(n_modes, n - 2)
    try:
        theta, vecs = eigs(op, k=k, which='LM', v0=v0,
                           maxiter=max_iter, tol=0)
    except ArpackNoConvergence as exc:
        theta, vecs = exc.eigenvalues, exc.eigenvectors
    if len(theta) == 0:
        return EigenSolution(np.array([]), np.zeros((n, 0)), np.array([]),
                             shift, _operator_scale(L))

    with np.errstate(divide='ignore', invalid='ignore'):
        lam = shift + 1 / theta
    scale = _operator_scale(L)
    residuals = np.array([
        np.linalg.norm(L @ vecs[:, j] - lam[j] * (M @ vecs[:, j]))
        / (scale * np.linalg.norm(vecs[:, j])) for j in range(len(lam))])
    order = np.argsort(np.abs(lam - shift))
    lam, vecs, residuals = lam[order], vecs[:, order], residuals[order]
    keep = residuals <= tol
    return EigenSolution(lam[keep], vecs[:, keep], residuals[keep], shift, scale)


def _operator_scale(L):
    return sparse.linalg.norm(L, np.inf)


def no_slip_error(system, x, n_samples=50):
    """Largest boundary velocity magnitude relative to the interior peak."""
    velocity = system.velocity(x)
    geo = system.geometry
    worst, peak = 0.0, 0.0
    tb = np.linspace(-1, 1, n_samples)
    eb = np.linspace(-1, 1, n_samples)
    for sigma in SPINS:
        spec = system.u_specs[sigma]
        interior = synthesize(spec, velocity[sigma],
                              np.linspace(-0.95, 0.95, n_samples),
                              np.linspace(-0.95, 0.95, n_samples)).values
        peak = max(peak, np.max(np.abs(interior)))
        for t0 in (-1.0, 1.0) if geo.kind == 'annulus' else (1.0,):
            vals = synthesize(spec, velocity[sigma], np.array([t0]), eb).values
            worst = max(worst, np.max(np.abs(vals)))
        for e0 in (-1.0, 1.0):
            vals = synthesize(spec, velocity[sigma], tb, np.array([e0])).values
            worst = max(worst, np.max(np.abs(vals)))
    return worst / peak if peak else 0.0


def divergence_error(system, x):
    """Spectral divergence norm relative to the velocity-gradient scale."""
    velocity = system.velocity(x)
    div_total = None
    grad_scale = 0.0
    for sigma in SPINS:
        op = fundamental(system.u_specs[sigma], -sigma)
        term = op @ velocity[sigma]
        div_total = term if div_total is None else div_total + term
        for delta in (1, -1, 0):
            if sigma + delta in (-1, 0, 1):
                d = fundamental(system.u_specs[sigma], delta) @ velocity[sigma]
                grad_scale = max(grad_scale, d.norm())
    return div_total.norm() / grad_scale if grad_scale else 0.0


def find_fundamental(system, n_modes=10, frequency_grid=None, tol=1e-8,
                     max_real_part=1e-6):
    """Least-damped converged mode over a grid of imaginary-axis shifts.

    Inertial-wave frequencies live inside (-2, 2); each shift collects the
    nearby modes, positive-growth-rate arrivals are flagged spurious, and
    the converged mode with the largest real part wins.  Returns
    (eigenvalue, vector, residual, diagnostics).
    """
    if frequency_grid is None:
        frequency_grid = [w * s for w in (0.35, 0.7, 1.05, 1.4, 1.75)
                          for s in (1, -1)]
    best = None
    spurious = 0
    for omega in frequency_grid:
        sol = solve_targeted(system, shift=complex(-1e-3, omega),
                             n_modes=n_modes, tol=tol)
        for j, lam in enumerate(sol.eigenvalues):
            if lam.real > max_real_part:
                spurious += 1
                continue
            if best is None or lam.real > best[0].real:
                best = (lam, sol.vectors[:, j], sol.residuals[j])
    if best is None:
        raise RuntimeError('no converged non-growing mode found near the shifts')
    lam, vec, resid = best
    return lam, vec, resid, {'spurious_growing': spurious}


def find_fundamental_converged(geometry, m, ekman, truncations,
                               tau_flavor='default', n_modes=10, tol=1e-8,
                               match_tol=1e-3):
    """Fundamental mode with the two-truncation spurious filter.

    Solves at each truncation, keeps eigenvalues that move by at most
    match_tol relative between the two, and returns the least-damped
    survivor at the finer truncation together with both systems and the
    relative drift.  Modes that fail to match are counted as spurious.
    """
    (L1, N1), (L2, N2) = truncations
    sys1 = assemble(geometry, m, ekman, L1, N1, tau_flavor)
    sys2 = assemble(geometry, m, ekman, L2, N2, tau_flavor)
    lam1, vec1, res1, info1 = find_fundamental(sys1, n_modes=n_modes, tol=tol)
    sol1 = solve_targeted(sys1, lam1, n_modes=n_modes, tol=tol)
    sol2 = solve_targeted(sys2, lam1, n_modes=n_modes, tol=tol)
    matched = []
    unmatched = 0
    for j1, ev1 in enumerate(sol1.eigenvalues):
        drift = np.abs(sol2.eigenvalues - ev1) / abs(ev1)
        j2 = int(np.argmin(drift)) if len(drift) else None
        if j2 is not None and drift[j2] <= match_tol and ev1.real <= 1e-6:
            matched.append((sol2.eigenvalues[j2], sol2.vectors[:, j2],
                            sol2.residuals[j2], float(drift[j2])))
        else:
            unmatched += 1
    diagnostics = {'unmatched': unmatched, 'spurious_growing':
                   info1['spurious_growing'], 'coarse_eigenvalue': lam1}
    if not matched:
        # nothing survives the filter; report the coarse candidate with its
        # drift to the nearest fine-truncation mode so callers see the truth
        drift = (np.min(np.abs(sol2.eigenvalues - lam1)) / abs(lam1)
                 if len(sol2.eigenvalues) else np.inf)
        j = int(np.argmin(np.abs(sol2.eigenvalues - lam1)))
        diagnostics['filter_passed'] = False
        return (sol2.eigenvalues[j], sol2.vectors[:, j], sol2.residuals[j],
                float(drift), sys1, sys2, diagnostics)
    matched.sort(key=lambda item: -item[0].real)
    lam, vec, resid, drift = matched[0]
    diagnostics['filter_passed'] = True
    return lam, vec, resid, drift, sys1, sys2, diagnostics


@dataclass
class ModeFields:
    t: np.ndarray
    eta: np.ndarray
    s: np.ndarray
    z: np.ndarray
    u_s: np.ndarray
    u_phi: np.ndarray
    u_z: np.ndarray
    pressure: np.ndarray


def reconstruct(system, x, n_t=64, n_eta=48):
    """Physical velocity components and pressure of one solution vector.

    The spin components are recombined, synthesized on a uniform grid, and
    rotated back to cylindrical components; the mode is normalized so the
    largest pressure value is one and real.
    """
    velocity = system.velocity(x)
    t = np.linspace(-1, 1, n_t)
    eta = np.linspace(-1, 1, n_eta)
    comps = {sigma: synthesize(system.u_specs[sigma], velocity[sigma], t, eta).values
             for sigma in SPINS}
    fields = system.split(x)
    p = synthesize(system.p_spec, fields['P'], t, eta).values

    peak = np.unravel_index(np.argmax(np.abs(p)), p.shape)
    scale = np.abs(p[peak]) or 1.0
    phase = p[peak] / np.abs(p[peak]) if np.abs(p[peak]) else 1.0
    factor = 1.0 / (scale * phase)
    p = p * factor
    for sigma in SPINS:
        comps[sigma] = comps[sigma] * factor

    u_s = (comps[1] + comps[-1]) / math.sqrt(2)
    u_phi = 1j * (comps[-1] - comps[1]) / math.sqrt(2)
    u_z = comps[0]
    geo = system.geometry
    s = geo.s_of_t(t)
    z = geo.physical_z(t[:, None], eta[None, :])
    return ModeFields(t, eta, s, z, u_s, u_phi, u_z, p)


def scan(geometries, m, ekman, L_max, N_max, labels=None, tau_flavor='default',
         n_modes=10, jump_threshold=0.25, tol=1e-8):
    """Track the fundamental mode across a family of geometries.

    The first solve searches the frequency grid; later solves seed their
    shift with the previous eigenvalue.  Relative eigenvalue jumps above
    the threshold are flagged as possible tracking losses.
    """
    records = []
    previous = None
    for idx, geometry in enumerate(geometries):
        system = assemble(geometry, m, ekman, L_max, N_max, tau_flavor)
        if previous is None:
            lam, vec, resid, info = find_fundamental(system, n_modes=n_modes,
                                                     tol=tol)
        else:
            sol = solve_targeted(system, shift=previous, n_modes=n_modes, tol=tol)
            usable = [j for j, ev in enumerate(sol.eigenvalues)
                      if ev.real <= 1e-6]
            if not usable:
                lam, vec, resid, info = find_fundamental(system, n_modes=n_modes,
                                                         tol=tol)
            else:
                j = usable[int(np.argmin(np.abs(sol.eigenvalues[np.array(usable)]
                                                - previous)))]
                lam, vec, resid = sol.eigenvalues[j], sol.vectors[:, j], sol.residuals[j]
                info = {}
        jump = (abs(lam - previous) / abs(previous)) if previous else 0.0
        records.append({
            'label': labels[idx] if labels else idx,
            'eigenvalue': lam,
            'residual': float(resid),
            'jump': float(jump),
            'flagged': bool(previous is not None and jump > jump_threshold),
            'system': system,
            'vector': vec,
        })
        previous = lam
    return records
