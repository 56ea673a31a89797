"""
JSON and CSV interchange for recurrences, quadrature rules, operators,
geometry descriptors, coefficient tensors, and eigenproblem results.

Floating-point payloads are written as decimal strings with full double
round-trip precision.  Every document carries a versioned schema tag.
"""

import csv
import hashlib
import io
import json

import numpy as np
from scipy import sparse

from .basis import BasisSpec, CoefficientTensor
from .genjacobi import (BandedMatrix, Polynomial, QuadratureRule, Recurrence,
                        WeightSpec)
from .geometry import Geometry, HeightFunction, height_polynomial_from_s

__all__ = [
    'encode_floats', 'decode_floats', 'weight_to_dict', 'weight_from_dict',
    'recurrence_to_dict', 'recurrence_from_dict', 'quadrature_to_dict',
    'banded_to_dict', 'geometry_to_dict', 'geometry_from_dict',
    'coefficients_to_dict', 'coefficients_from_dict', 'block_operator_to_dict',
    'sparse_to_triplets', 'eigen_results_to_dict', 'mode_fields_to_csv',
    'trace_to_csv', 'config_hash', 'dump_json',
]

SCHEMA_PREFIX = 'stretchpoly'
SCHEMA_VERSION = 1


def _schema(kind):
    return f'{SCHEMA_PREFIX}/{kind}/v{SCHEMA_VERSION}'


def encode_floats(values):
    """Render floats as shortest decimal strings that round-trip exactly."""
    return [repr(float(v)) for v in np.asarray(values, dtype=float).ravel()]


def decode_floats(strings):
    return np.array([float(s) for s in strings])


def _encode_complex(values):
    values = np.asarray(values, dtype=complex).ravel()
    return [[repr(float(v.real)), repr(float(v.imag))] for v in values]


def _decode_complex(pairs):
    return np.array([complex(float(r), float(i)) for r, i in pairs])


def weight_to_dict(weight):
    return {
        'schema': _schema('weight'),
        'a': repr(weight.a),
        'b': repr(weight.b),
        'scale': repr(weight.scale),
        'factors': [{'coeffs': encode_floats(poly.coeffs), 'exponent': repr(c)}
                    for poly, c in weight.factors],
    }


def weight_from_dict(doc):
    factors = tuple((Polynomial(tuple(decode_floats(f['coeffs']))),
                     float(f['exponent'])) for f in doc['factors'])
    return WeightSpec(float(doc['a']), float(doc['b']), factors,
                      float(doc.get('scale', 1.0)))


def recurrence_to_dict(rec):
    return {
        'schema': _schema('recurrence'),
        'weight': weight_to_dict(rec.weight),
        'alpha': encode_floats(rec.alpha),
        'beta': encode_floats(rec.beta),
        'mass': repr(rec.mass),
    }


def recurrence_from_dict(doc):
    return Recurrence(weight_from_dict(doc['weight']),
                      decode_floats(doc['alpha']), decode_floats(doc['beta']),
                      float(doc['mass']))


def quadrature_to_dict(rule, weight=None):
    doc = {
        'schema': _schema('quadrature'),
        'nodes': encode_floats(rule.nodes),
        'weights': encode_floats(rule.weights),
    }
    if weight is not None:
        doc['weight'] = weight_to_dict(weight)
    return doc


def banded_to_dict(matrix):
    coo = matrix.data.tocoo()
    return {
        'schema': _schema('banded-matrix'),
        'shape': list(matrix.shape),
        'lower_bandwidth': matrix.lower,
        'upper_bandwidth': matrix.upper,
        'domain': weight_to_dict(matrix.domain),
        'codomain': weight_to_dict(matrix.codomain),
        'rows': coo.row.tolist(),
        'cols': coo.col.tolist(),
        'values': encode_floats(coo.data),
    }


def geometry_to_dict(geometry):
    h = geometry.height
    return {
        'schema': _schema('geometry'),
        'kind': geometry.kind,
        'S_i': repr(geometry.S_i),
        'S_o': repr(geometry.S_o),
        'extent': geometry.extent,
        'height': {
            'coordinate': 't',
            'htilde_coeffs': encode_floats(h.htilde.coeffs),
            'chi_o': h.chi_o,
            'chi_i': h.chi_i,
            'chi_h': h.chi_h,
        },
    }


def geometry_from_dict(doc):
    hdoc = doc['height']
    coeffs = decode_floats(hdoc['htilde_coeffs'])
    S_i, S_o = float(doc['S_i']), float(doc['S_o'])
    if hdoc.get('coordinate', 't') == 's':
        poly = height_polynomial_from_s(coeffs, S_i, S_o)
    else:
        poly = Polynomial(tuple(coeffs))
    height = HeightFunction(poly, int(hdoc.get('chi_o', 0)),
                            int(hdoc.get('chi_i', 0)),
                            float(hdoc.get('chi_h', 1)))
    return Geometry(doc['kind'], S_i, S_o, height, doc.get('extent', 'full'))


def coefficients_to_dict(coeffs, m=None):
    spec = coeffs.spec
    entries = []
    for l, block in enumerate(coeffs.blocks):
        for k, value in enumerate(block):
            entries.append([spec.m, l, k, repr(float(value.real)),
                            repr(float(value.imag))])
    return {
        'schema': _schema('coefficients'),
        'ordering': 'k fastest, then l, then m',
        'm': spec.m,
        'alpha': spec.alpha,
        'sigma': spec.sigma,
        'L_max': spec.L_max,
        'N_max': spec.N_max,
        'radial_pad': spec.radial_pad,
        'geometry': geometry_to_dict(spec.geometry),
        'entries': entries,
    }


def coefficients_from_dict(doc):
    geometry = geometry_from_dict(doc['geometry'])
    spec = BasisSpec(geometry, int(doc['m']), float(doc['alpha']),
                     int(doc['sigma']), int(doc['L_max']), int(doc['N_max']),
                     int(doc.get('radial_pad', 0)))
    out = CoefficientTensor.zeros(spec)
    for m, l, k, re, im in doc['entries']:
        out.blocks[int(l)][int(k)] = complex(float(re), float(im))
    return out


def block_operator_to_dict(op, name=''):
    """Sparsity envelope: per-block level couplings for structure plots."""
    blocks = []
    for dl in sorted(op.blocks):
        for l, mat in sorted(op.blocks[dl].items()):
            mat = np.asarray(mat)
            peak = np.max(np.abs(mat)) if mat.size else 0.0
            rows, cols = np.nonzero(np.abs(mat) > 1e-13 * max(peak, 1e-300))
            blocks.append({
                'dl': dl,
                'l': l,
                'shape': list(mat.shape),
                'dk_offsets': sorted(set((cols - rows).tolist())),
            })
    return {
        'schema': _schema('block-operator'),
        'name': name,
        'source': {'L_max': op.source.L_max, 'N_max': op.source.N_max,
                   'alpha': op.source.alpha, 'sigma': op.source.sigma},
        'target': {'L_max': op.target.L_max, 'N_max': op.target.N_max,
                   'alpha': op.target.alpha, 'sigma': op.target.sigma},
        'blocks': blocks,
    }


def sparse_to_triplets(matrix, stream):
    """Coordinate-triplet text: header '# rows cols nnz', then 'i j re [im]'."""
    coo = sparse.coo_matrix(matrix)
    complex_valued = np.iscomplexobj(coo.data)
    stream.write(f'# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n')
    for i, j, v in zip(coo.row, coo.col, coo.data):
        if complex_valued:
            stream.write(f'{i} {j} {v.real!r} {v.imag!r}\n')
        else:
            stream.write(f'{i} {j} {v!r}\n')


def eigen_results_to_dict(system, solution, extras=None):
    doc = {
        'schema': _schema('eigen-results'),
        'geometry': geometry_to_dict(system.geometry),
        'm': system.m,
        'ekman': repr(system.ekman),
        'tau_flavor': system.tau_flavor,
        'L_max': system.v_specs[0].L_max,
        'N_max': system.v_specs[0].N_max,
        'shift': [repr(solution.shift.real), repr(solution.shift.imag)],
        'eigenvalues': _encode_complex(solution.eigenvalues),
        'residuals': encode_floats(solution.residuals),
    }
    if extras:
        doc.update(extras)
    return doc


def mode_fields_to_csv(mode, stream, manifest_hash=''):
    """Structured grid dump: one row per (t, eta) point with s, z and fields."""
    writer = csv.writer(stream)
    if manifest_hash:
        stream.write(f'# manifest {manifest_hash}\n')
    writer.writerow(['t', 'eta', 's', 'z',
                     're_u_s', 'im_u_s', 're_u_phi', 'im_u_phi',
                     're_u_z', 'im_u_z', 're_p', 'im_p'])
    for i, t in enumerate(mode.t):
        for j, eta in enumerate(mode.eta):
            writer.writerow([repr(float(t)), repr(float(eta)),
                             repr(float(mode.s[i])), repr(float(mode.z[i, j]))]
                            + [repr(float(v)) for v in
                               (mode.u_s[i, j].real, mode.u_s[i, j].imag,
                                mode.u_phi[i, j].real, mode.u_phi[i, j].imag,
                                mode.u_z[i, j].real, mode.u_z[i, j].imag,
                                mode.pressure[i, j].real, mode.pressure[i, j].imag)])


def trace_to_csv(records, stream, manifest_hash=''):
    """Eigenvalue trace: label, Re/Im lambda, residual, tracking flag."""
    writer = csv.writer(stream)
    if manifest_hash:
        stream.write(f'# manifest {manifest_hash}\n')
    writer.writerow(['label', 're_lambda', 'im_lambda', 'residual', 'flagged'])
    for rec in records:
        lam = rec['eigenvalue']
        writer.writerow([rec['label'], repr(float(lam.real)),
                         repr(float(lam.imag)), repr(float(rec['residual'])),
                         int(rec['flagged'])])


def config_hash(config):
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def dump_json(doc, path):
    with open(path, 'w') as handle:
        json.dump(doc, handle, indent=1, sort_keys=True)
        handle.write('\n')
