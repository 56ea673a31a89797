"""Sparse operator structure and the calculus identities.

Prints the vertical-coupling offsets of each operator family, verifies
curl(grad) = 0 and div(grad) = laplacian as assembled matrices, and dumps
the sparsity envelope for rendering.
"""

import os

import numpy as np

from stretchpoly.basis import BasisSpec, build_hierarchy
from stretchpoly.cli import main as cli_main
from stretchpoly.geometry import sample_geometries
from stretchpoly.operators3d import (conversion, coordinate_multiply, curl,
                                     fundamental, gradient, scalar_laplacian)


def main():
    geo = sample_geometries()['annular_paraboloid']
    spec = BasisSpec(geo, m=3, alpha=0.0, sigma=0, L_max=8, N_max=16)
    build_hierarchy(spec)

    for name, op in [('D+', fundamental(spec, 1)),
                     ('D-', fundamental(spec, -1)),
                     ('D0', fundamental(spec, 0)),
                     ('conversion', conversion(spec)),
                     ('z-vector', coordinate_multiply(spec, 'z_vec'))]:
        print(f'{name:12s} couples dl in {op.dl_offsets()}')

    grad = gradient(spec)
    up = spec.with_params(alpha=spec.alpha + 1)
    curl_up = curl(up)
    worst = 0.0
    for s_out in (1, -1, 0):
        total = None
        for s_in in (1, -1, 0):
            op = curl_up.get((s_out, s_in))
            if op is None:
                continue
            term = op @ grad[s_in]
            total = term if total is None else total + term
        worst = max(worst, np.max(np.abs(total.matrix().toarray())))
    print(f'curl(grad) max entry: {worst:.2e}')

    div_up = {s: fundamental(up.with_params(sigma=s), -s if s else 0)
              for s in (1, -1, 0)}
    div_grad = None
    for s_in in (1, -1, 0):
        term = div_up[s_in] @ grad[s_in]
        div_grad = term if div_grad is None else div_grad + term
    gap = (div_grad - scalar_laplacian(spec)).matrix()
    print(f'div(grad) - laplacian max entry: {np.max(np.abs(gap.toarray())):.2e}')

    out = os.path.join(os.path.dirname(__file__), 'output')
    cli_main(['sparsity', '--preset', 'annular_paraboloid', '--m', '3',
              '--L-max', '8', '--N-max', '16', '--output', out])
    print(f'sparsity envelope written under {out}/sparsity.json')


if __name__ == '__main__':
    main()
