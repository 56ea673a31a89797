"""Plot jobs and input handling.

Inputs are the documented stretchpoly interchange files; each JSON
document carries a schema tag checked for version compatibility before
rendering.  No numerics are recomputed here: files are parsed, selected,
and drawn.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

KNOWN_KINDS = ('mode-slice', 'sparsity', 'radial-limit', 'trace')
COMPATIBLE_VERSIONS = ('v1',)


class SchemaError(ValueError):
    """Input file schema missing or from an incompatible version."""


@dataclass(frozen=True)
class PlotJob:
    """One rendering request: input files, plot kind, styling options."""

    kind: str
    inputs: tuple
    output_dir: str = '.'
    formats: tuple = ('png',)
    labels: tuple = ()
    panel: tuple = (0, 0)
    dpi: int = 110

    def __post_init__(self):
        if self.kind not in KNOWN_KINDS:
            raise SchemaError(f'unknown plot kind {self.kind!r}; '
                              f'choices: {KNOWN_KINDS}')
        if not self.inputs:
            raise SchemaError('plot job needs at least one input file')
        object.__setattr__(self, 'inputs', tuple(self.inputs))
        object.__setattr__(self, 'formats', tuple(self.formats))
        object.__setattr__(self, 'labels', tuple(self.labels))


def check_schema(doc, expected_kind):
    tag = doc.get('schema', '')
    parts = tag.split('/')
    if len(parts) != 3 or parts[0] != 'stretchpoly':
        raise SchemaError(f'not a stretchpoly document (schema {tag!r})')
    if parts[1] != expected_kind:
        raise SchemaError(f'expected a {expected_kind} document, got {parts[1]!r}')
    if parts[2] not in COMPATIBLE_VERSIONS:
        raise SchemaError(f'schema version {parts[2]!r} not supported '
                          f'(compatible: {COMPATIBLE_VERSIONS})')
    return doc


def load_json(path, expected_kind):
    with open(path) as handle:
        return check_schema(json.load(handle), expected_kind)


def floats(strings):
    return np.array([float(s) for s in strings])


def load_trace(path):
    """Trace CSV rows: (label, complex eigenvalue, residual, flagged)."""
    rows = []
    with open(path) as handle:
        lines = [ln for ln in handle if not ln.startswith('#')]
    reader = csv.DictReader(lines)
    expected = {'label', 're_lambda', 'im_lambda', 'residual', 'flagged'}
    if reader.fieldnames is None or not expected <= set(reader.fieldnames):
        raise SchemaError(f'{path} is not a stretchpoly trace CSV')
    for row in reader:
        rows.append((row['label'],
                     complex(float(row['re_lambda']), float(row['im_lambda'])),
                     float(row['residual']), bool(int(row['flagged']))))
    return rows


def panel_grid(doc):
    """Mode panels as (m, l, k) -> 2D array, plus the shared grids."""
    t = floats(doc['t'])
    eta = floats(doc['eta'])
    s = floats(doc['s'])
    height = floats(doc['height'])
    panels = {}
    for panel in doc['panels']:
        values = floats(panel['values']).reshape(len(t), len(eta))
        panels[(panel['m'], panel['l'], panel['k'])] = values
    return t, eta, s, height, doc.get('extent', 'full'), panels
