"""Renderers for each plot kind.

Styling is pinned so identical inputs give pixel-identical images: the
Agg backend, fixed fonts and figure sizes, and PNG metadata stripped of
everything environment-dependent.
"""

import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from .jobs import SchemaError, load_json, load_trace, panel_grid

STYLE = {
    'font.family': 'DejaVu Sans',
    'font.size': 9,
    'figure.dpi': 110,
    'savefig.dpi': 110,
    'axes.linewidth': 0.8,
    'svg.hashsalt': 'plotviz',
}

MARKERS = {'fundamental_plus': ('+', 90, 'tab:red'),
           'fundamental_minus': ('_', 90, 'tab:blue'),
           'fundamental_zero': ('o', 40, 'tab:green'),
           'conversion': ('o', 40, 'tab:purple'),
           'conversion_adjoint': ('s', 40, 'tab:olive'),
           'z_vector': ('D', 40, 'tab:brown')}


def _save(fig, job, stem):
    os.makedirs(job.output_dir, exist_ok=True)
    paths = []
    for fmt in job.formats:
        path = os.path.join(job.output_dir, f'{stem}.{fmt}')
        metadata = {'Software': None} if fmt == 'png' else {'Date': None}
        fig.savefig(path, format=fmt, metadata=metadata)
        paths.append(path)
    plt.close(fig)
    return paths


def render_mode_slice(job):
    """Grid of meridional slices: physical z at x < 0, stretched at x > 0."""
    doc = load_json(job.inputs[0], 'basis-modes')
    t, eta, s, height, extent, panels = panel_grid(doc)
    keys = sorted(panels)
    rows = sorted({(m, l) for m, l, _ in keys})
    cols = sorted({k for _, _, k in keys})
    fig, axes = plt.subplots(len(rows), len(cols),
                             figsize=(2.2 * len(cols), 2.0 * len(rows)),
                             squeeze=False)
    if extent == 'upper_half':
        z = 0.5 * (eta[None, :] + 1) * height[:, None]
    else:
        z = eta[None, :] * height[:, None]
    zs = np.max(np.abs(z)) or 1.0
    for i, (m, l) in enumerate(rows):
        for j, k in enumerate(cols):
            ax = axes[i][j]
            values = panels.get((m, l, k))
            if values is None:
                ax.set_axis_off()
                continue
            peak = np.max(np.abs(values)) or 1.0
            # left half: physical z; right half: the stretched coordinate
            ax.pcolormesh(-s[:, None] * np.ones_like(z), z / zs, values,
                          vmin=-peak, vmax=peak, cmap='RdBu_r', shading='gouraud')
            ax.pcolormesh(s[:, None] * np.ones_like(z),
                          eta[None, :] * np.ones_like(z), values,
                          vmin=-peak, vmax=peak, cmap='RdBu_r', shading='gouraud')
            ax.axvline(0.0, color='k', lw=0.6)
            ax.text(0.02, 0.96, f'({m},{l},{k})', transform=ax.transAxes,
                    va='top', fontsize=7)
            ax.set_xlim(-1.02, 1.02)
            ax.set_xticks([])
            ax.set_yticks([])
    fig.tight_layout()
    return _save(fig, job, 'mode_slice')


def render_sparsity(job):
    """Coupling diagrams: markers at each (dk, dl) an operator populates."""
    doc = load_json(job.inputs[0], 'sparsity')
    operators = {op['name']: op for op in doc['operators']}
    groups = [('fundamental', ['fundamental_plus', 'fundamental_minus',
                               'fundamental_zero']),
              ('structure', [n for n in ('conversion', 'conversion_adjoint',
                                         'z_vector') if n in operators])]
    paths = []
    for stem, names in groups:
        fig, ax = plt.subplots(figsize=(3.4, 3.2))
        span = 1
        for name in names:
            op = operators.get(name)
            if op is None:
                continue
            marker, size, color = MARKERS[name]
            points = sorted({(dk, block['dl']) for block in op['blocks']
                             for dk in block['dk_offsets']})
            xs = [p[0] for p in points]
            ys = [p[1] for p in points]
            span = max([span] + [abs(v) for v in xs + ys])
            ax.scatter(xs, ys, marker=marker, s=size, color=color, label=name,
                       linewidths=1.2)
        ax.scatter([0], [0], marker='s', s=130, facecolors='none',
                   edgecolors='k', label='input mode')
        ax.set_xlabel(r'$\Delta k$')
        ax.set_ylabel(r'$\Delta \ell$')
        ax.set_xlim(-span - 0.7, span + 0.7)
        ax.set_ylim(-span - 0.7, span + 0.7)
        ax.set_xticks(range(-span, span + 1))
        ax.set_yticks(range(-span, span + 1))
        ax.grid(True, lw=0.3, alpha=0.5)
        ax.legend(loc='upper left', fontsize=6, framealpha=1.0)
        fig.tight_layout()
        paths.extend(_save(fig, job, f'sparsity_{stem}'))
    return paths


def render_radial_limit(job):
    """Radial profiles of one basis function across a family of inputs."""
    l_sel, k_sel = job.panel
    fig, ax = plt.subplots(figsize=(4.6, 3.0))
    for idx, path in enumerate(job.inputs):
        doc = load_json(path, 'basis-modes')
        t, eta, s, height, extent, panels = panel_grid(doc)
        key = next((key for key in sorted(panels)
                    if key[1] == l_sel and key[2] == k_sel), None)
        if key is None:
            raise SchemaError(f'{path} does not contain panel (l={l_sel}, k={k_sel})')
        j_mid = len(eta) // 2
        profile = panels[key][:, j_mid]
        label = job.labels[idx] if idx < len(job.labels) else \
            f'S_i={s.min():.3g}'
        ax.plot(s, profile, lw=1.2, label=label)
    ax.set_xlabel('s')
    ax.set_ylabel(f'radial part, (l,k)=({l_sel},{k_sel})')
    ax.set_xlim(0, None)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, job, 'radial_limit')


def render_trace(job):
    """Eigenvalue trace: real and imaginary parts against the sweep label."""
    rows = load_trace(job.inputs[0])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(6.4, 2.8))
    if rows:
        labels = [float(r[0]) for r in rows]
        lams = np.array([r[1] for r in rows])
        ax1.plot(labels, lams.real, 'o-', lw=1.0, ms=3)
        ax2.plot(labels, lams.imag, 'o-', lw=1.0, ms=3, color='tab:orange')
        for ax in (ax1, ax2):
            for x, flagged in zip(labels, (r[3] for r in rows)):
                if flagged:
                    ax.axvline(x, color='r', lw=0.6, ls=':')
    ax1.set_ylabel(r'Re $\lambda$')
    ax2.set_ylabel(r'Im $\lambda$')
    for ax in (ax1, ax2):
        ax.set_xlabel('sweep parameter')
    fig.tight_layout()
    return _save(fig, job, 'trace')


RENDERERS = {'mode-slice': render_mode_slice,
             'sparsity': render_sparsity,
             'radial-limit': render_radial_limit,
             'trace': render_trace}


def render(job):
    """Render one job; returns the written file paths."""
    with plt.rc_context(STYLE):
        return RENDERERS[job.kind](job)
