"""
Command-line driver: recurrence generation, quadrature rules, operator
dumps, sparsity structure, basis-function grids, inertial-wave solves,
and parameter scans.

Every run resolves its configuration, hashes it, and embeds the manifest
in each output document so results are reproducible byte for byte.
Numerical work is delegated to the library modules; plotting is left to
downstream consumers of the emitted JSON/CSV.
"""

import argparse
import cmath
import json
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, serialize
from .basis import BasisSpec, CoefficientTensor, analysis_grids, basis_eval, build_hierarchy
from .genjacobi import (Polynomial, WeightSpec, gauss_quadrature,
                        recurrence_for_weight)
from .geometry import (Geometry, coreaboloid_geometry, excised_sphere_geometry,
                       sample_geometries, spheroid_geometry)
from .operators3d import (conversion, conversion_adjoint, coordinate_multiply,
                          fundamental)
from .waves import (assemble, find_fundamental, reconstruct, scan,
                    solve_targeted)

__all__ = ['main']


class ConfigError(ValueError):
    pass


def _resolve_geometry(args):
    if args.geometry_file:
        with open(args.geometry_file) as handle:
            return serialize.geometry_from_dict(json.load(handle)), \
                {'geometry_file': os.path.abspath(args.geometry_file)}
    preset = args.preset or 'coreaboloid'
    params = {}
    if preset == 'coreaboloid':
        params = {'rpm': args.rpm, 'S_i': args.inner_radius or 10.2,
                  'S_o': args.outer_radius or 37.25,
                  'H_NR': args.height or 17.08, 'unit': args.unit}
        geometry = coreaboloid_geometry(**params)
    elif preset == 'spheroid':
        params = {'H': args.height or 0.8}
        geometry = spheroid_geometry(**params)
    elif preset == 'excised-sphere':
        params = {'S_i': args.inner_radius or 0.35}
        geometry = excised_sphere_geometry(**params)
    else:
        catalog = sample_geometries()
        if preset not in catalog:
            raise ConfigError(f'unknown preset {preset!r}; choices: '
                              f'{["coreaboloid", "spheroid", "excised-sphere"] + sorted(catalog)}')
        geometry = catalog[preset]
    return geometry, {'preset': preset, **params}


def _resolve_weight(args):
    if args.weight_file:
        with open(args.weight_file) as handle:
            doc = json.load(handle)
        return serialize.weight_from_dict(doc), doc
    factors = []
    for spec in args.factor or []:
        coeffs, _, exponent = spec.partition('^')
        poly = tuple(float(c) for c in coeffs.split(','))
        factors.append((Polynomial(poly), float(exponent or 1)))
    weight = WeightSpec(args.a, args.b, tuple(factors))
    return weight, serialize.weight_to_dict(weight)


def _manifest(args, resolved):
    config = {'command': args.command, 'version': __version__, **resolved}
    return {'config': config, 'hash': serialize.config_hash(config)}


def _emit(args, name, doc, manifest):
    doc = dict(doc)
    doc['manifest'] = manifest
    os.makedirs(args.output, exist_ok=True)
    path = os.path.join(args.output, name)
    serialize.dump_json(doc, path)
    return path


def cmd_recurrence(args):
    weight, wdoc = _resolve_weight(args)
    rec = recurrence_for_weight(weight, args.n_terms)
    manifest = _manifest(args, {'weight': wdoc, 'n_terms': args.n_terms})
    return [_emit(args, 'recurrence.json', serialize.recurrence_to_dict(rec),
                  manifest)]


def cmd_quadrature(args):
    weight, wdoc = _resolve_weight(args)
    rec = recurrence_for_weight(weight, args.n_nodes + 1)
    rule = gauss_quadrature(rec, args.n_nodes)
    manifest = _manifest(args, {'weight': wdoc, 'n_nodes': args.n_nodes})
    return [_emit(args, 'quadrature.json',
                  serialize.quadrature_to_dict(rule, weight), manifest)]


def _basis_spec(geometry, args, alpha=None, sigma=None):
    return BasisSpec(geometry, args.m, args.alpha if alpha is None else alpha,
                     args.sigma if sigma is None else sigma,
                     args.L_max, args.N_max)


def _named_operators(spec):
    ops = {f'fundamental_plus': fundamental(spec, 1),
           f'fundamental_minus': fundamental(spec, -1),
           f'fundamental_zero': fundamental(spec, 0),
           'conversion': conversion(spec),
           'z_vector': coordinate_multiply(spec, 'z_vec')}
    if spec.alpha > 0:
        ops['conversion_adjoint'] = conversion_adjoint(spec)
    return ops


def cmd_opmatrix(args):
    geometry, gdoc = _resolve_geometry(args)
    spec = _basis_spec(geometry, args)
    build_hierarchy(spec)
    ops = _named_operators(spec)
    if args.operator not in ops:
        raise ConfigError(f'unknown operator {args.operator!r}; '
                          f'choices: {sorted(ops)}')
    op = ops[args.operator]
    manifest = _manifest(args, {'geometry': gdoc, 'operator': args.operator,
                                'm': args.m, 'alpha': args.alpha,
                                'sigma': args.sigma, 'L_max': args.L_max,
                                'N_max': args.N_max})
    os.makedirs(args.output, exist_ok=True)
    triplet_path = os.path.join(args.output, f'{args.operator}.mtx.txt')
    with open(triplet_path, 'w') as handle:
        handle.write(f'# manifest {manifest["hash"]}\n')
        serialize.sparse_to_triplets(op.matrix(), handle)
    envelope = serialize.block_operator_to_dict(op, args.operator)
    path = _emit(args, f'{args.operator}.json', envelope, manifest)
    return [triplet_path, path]


def cmd_sparsity(args):
    geometry, gdoc = _resolve_geometry(args)
    spec = _basis_spec(geometry, args)
    build_hierarchy(spec)
    manifest = _manifest(args, {'geometry': gdoc, 'm': args.m,
                                'alpha': args.alpha, 'sigma': args.sigma,
                                'L_max': args.L_max, 'N_max': args.N_max})
    doc = {'schema': 'stretchpoly/sparsity/v1',
           'operators': [serialize.block_operator_to_dict(op, name)
                         for name, op in _named_operators(spec).items()]}
    return [_emit(args, 'sparsity.json', doc, manifest)]


def cmd_modes(args):
    geometry, gdoc = _resolve_geometry(args)
    spec = _basis_spec(geometry, args)
    build_hierarchy(spec)
    t = np.linspace(-1, 1, args.n_grid)
    eta = np.linspace(-1, 1, args.n_grid)
    panels = []
    for l in range(0, min(args.L_max, args.panels_l) + 1):
        for k in range(0, min(spec.n_max_at(l), args.panels_k) + 1):
            values = basis_eval(spec, l, k, t, eta)
            panels.append({'m': args.m, 'l': l, 'k': k,
                           'values': serialize.encode_floats(values.real)})
    doc = {'schema': 'stretchpoly/basis-modes/v1',
           't': serialize.encode_floats(t),
           'eta': serialize.encode_floats(eta),
           's': serialize.encode_floats(geometry.s_of_t(t)),
           'height': serialize.encode_floats(geometry.height_at(t)),
           'extent': geometry.extent,
           'panels': panels}
    manifest = _manifest(args, {'geometry': gdoc, 'm': args.m,
                                'alpha': args.alpha, 'sigma': args.sigma,
                                'L_max': args.L_max, 'N_max': args.N_max,
                                'n_grid': args.n_grid})
    return [_emit(args, 'modes.json', doc, manifest)]


def cmd_iwaves(args):
    geometry, gdoc = _resolve_geometry(args)
    system = assemble(geometry, args.m, args.ekman, args.L_max, args.N_max,
                      args.tau_flavor)
    resolved = {'geometry': gdoc, 'm': args.m, 'ekman': args.ekman,
                'L_max': args.L_max, 'N_max': args.N_max,
                'tau_flavor': args.tau_flavor, 'n_modes': args.n_modes}
    if args.shift is not None:
        shift = complex(args.shift)
        resolved['shift'] = [shift.real, shift.imag]
        solution = solve_targeted(system, shift, n_modes=args.n_modes)
        extras = {}
    else:
        lam, vec, resid, info = find_fundamental(system, n_modes=args.n_modes)
        solution = solve_targeted(system, lam, n_modes=args.n_modes)
        extras = {'fundamental': [repr(float(lam.real)), repr(float(lam.imag))],
                  'spurious_growing': info['spurious_growing']}
    manifest = _manifest(args, resolved)
    doc = serialize.eigen_results_to_dict(system, solution, extras)
    paths = [_emit(args, 'iwaves.json', doc, manifest)]
    if len(solution) and args.dump_mode:
        mode = reconstruct(system, solution.vectors[:, 0])
        path = os.path.join(args.output, 'mode_fields.csv')
        with open(path, 'w', newline='') as handle:
            serialize.mode_fields_to_csv(mode, handle, manifest['hash'])
        paths.append(path)
    return paths


def _scan_geometries(args):
    values = [float(v) for v in args.values.split(',')]
    if args.family == 'coreaboloid-rpm':
        return [coreaboloid_geometry(v) for v in values], values
    if args.family == 'spheroid-height':
        return [spheroid_geometry(v) for v in values], values
    if args.family == 'inner-radius':
        return [excised_sphere_geometry(v) for v in values], values
    if args.family == 'coreaboloid-inner-radius':
        return [coreaboloid_geometry(args.rpm, S_i=v * 37.25)
                for v in values], values
    raise ConfigError(f'unknown scan family {args.family!r}')


def cmd_scan(args):
    geometries, labels = _scan_geometries(args)
    resolved = {'family': args.family, 'values': labels, 'm': args.m,
                'ekman': args.ekman, 'L_max': args.L_max, 'N_max': args.N_max,
                'workers': args.workers}
    manifest = _manifest(args, resolved)
    if args.workers > 1:
        # independent solves per point; each runs its own frequency search
        def solve_point(geometry):
            system = assemble(geometry, args.m, args.ekman, args.L_max,
                              args.N_max, args.tau_flavor)
            lam, vec, resid, _ = find_fundamental(system, n_modes=args.n_modes)
            return lam, resid
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(solve_point, geometries))
        records = [{'label': lab, 'eigenvalue': lam, 'residual': float(resid),
                    'jump': 0.0, 'flagged': False}
                   for lab, (lam, resid) in zip(labels, results)]
    else:
        records = scan(geometries, args.m, args.ekman, args.L_max, args.N_max,
                       labels=labels, tau_flavor=args.tau_flavor,
                       n_modes=args.n_modes)
    os.makedirs(args.output, exist_ok=True)
    csv_path = os.path.join(args.output, 'scan.csv')
    with open(csv_path, 'w', newline='') as handle:
        serialize.trace_to_csv(records, handle, manifest['hash'])
    doc = {'schema': 'stretchpoly/scan/v1',
           'records': [{'label': r['label'],
                        'eigenvalue': [repr(r['eigenvalue'].real),
                                       repr(r['eigenvalue'].imag)],
                        'residual': repr(r['residual']),
                        'flagged': r['flagged']} for r in records]}
    return [csv_path, _emit(args, 'scan.json', doc, manifest)]


def build_parser():
    parser = argparse.ArgumentParser(
        prog='stretchpoly',
        description='Spectral bases and inertial-wave solves on stretched '
                    'cylinders and annuli')
    sub = parser.add_subparsers(dest='command', required=True)

    def add_common(p):
        p.add_argument('--output', default='out', help='output directory')

    def add_weight(p):
        p.add_argument('--a', type=float, default=0.0)
        p.add_argument('--b', type=float, default=0.0)
        p.add_argument('--factor', action='append', metavar='C0,C1,...^EXP',
                       help='augmenting factor: ascending coefficients ^ exponent')
        p.add_argument('--weight-file', help='JSON weight descriptor')

    def add_geometry(p):
        p.add_argument('--preset', help='coreaboloid | spheroid | '
                       'excised-sphere | catalog name')
        p.add_argument('--geometry-file', help='JSON geometry descriptor')
        p.add_argument('--rpm', type=float, default=60.0)
        p.add_argument('--height', type=float, help='H_NR (cm) or spheroid H')
        p.add_argument('--inner-radius', type=float)
        p.add_argument('--outer-radius', type=float)
        p.add_argument('--unit', default='cm', choices=['cm', 'm'])

    def add_spec(p):
        p.add_argument('--m', type=int, default=14)
        p.add_argument('--alpha', type=float, default=0.0)
        p.add_argument('--sigma', type=int, default=0, choices=[-1, 0, 1])
        p.add_argument('--L-max', type=int, default=8)
        p.add_argument('--N-max', type=int, default=16)

    p = sub.add_parser('recurrence', help='three-term recurrence JSON')
    add_common(p); add_weight(p)
    p.add_argument('--n-terms', type=int, default=32)
    p.set_defaults(run=cmd_recurrence)

    p = sub.add_parser('quadrature', help='Gauss rule JSON')
    add_common(p); add_weight(p)
    p.add_argument('--n-nodes', type=int, default=32)
    p.set_defaults(run=cmd_quadrature)

    p = sub.add_parser('opmatrix', help='operator matrix dump')
    add_common(p); add_geometry(p); add_spec(p)
    p.add_argument('--operator', default='fundamental_plus')
    p.set_defaults(run=cmd_opmatrix)

    p = sub.add_parser('sparsity', help='block sparsity structure JSON')
    add_common(p); add_geometry(p); add_spec(p)
    p.set_defaults(run=cmd_sparsity)

    p = sub.add_parser('modes', help='basis-function grid dumps')
    add_common(p); add_geometry(p); add_spec(p)
    p.add_argument('--n-grid', type=int, default=48)
    p.add_argument('--panels-l', type=int, default=3)
    p.add_argument('--panels-k', type=int, default=3)
    p.set_defaults(run=cmd_modes)

    p = sub.add_parser('iwaves', help='damped inertial waves eigensolve')
    add_common(p); add_geometry(p); add_spec(p)
    p.add_argument('--ekman', type=float, default=1e-5)
    p.add_argument('--tau-flavor', default='default',
                   choices=['default', 'double_conversion', 'identity'])
    p.add_argument('--shift', help='complex shift, e.g. "-0.01+0.5j"')
    p.add_argument('--n-modes', type=int, default=10)
    p.add_argument('--dump-mode', action='store_true',
                   help='write the leading mode fields as CSV')
    p.set_defaults(run=cmd_iwaves)

    p = sub.add_parser('scan', help='eigenvalue trace over a geometry family')
    add_common(p); add_spec(p)
    p.add_argument('--family', default='coreaboloid-rpm',
                   choices=['coreaboloid-rpm', 'spheroid-height',
                            'inner-radius', 'coreaboloid-inner-radius'])
    p.add_argument('--values', default='40,48,56,60,64',
                   help='comma-separated parameter values')
    p.add_argument('--rpm', type=float, default=64.0,
                   help='rotation rate for coreaboloid-inner-radius scans')
    p.add_argument('--ekman', type=float, default=1e-5)
    p.add_argument('--tau-flavor', default='default',
                   choices=['default', 'double_conversion', 'identity'])
    p.add_argument('--n-modes', type=int, default=10)
    p.add_argument('--workers', type=int, default=1)
    p.set_defaults(run=cmd_scan)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        paths = args.run(args)
    except Exception as exc:
        error = {'error': type(exc).__name__, 'message': str(exc)}
        if os.environ.get('STRETCHPOLY_DEBUG'):
            error['traceback'] = traceback.format_exc()
        print(json.dumps(error), file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == '__main__':
    sys.exit(main())
