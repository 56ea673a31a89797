"""Command-line renderer for stretchpoly data files."""

import argparse
import json
import sys

from .jobs import PlotJob, SchemaError
from .render import render


def build_parser():
    parser = argparse.ArgumentParser(
        prog='plotviz', description='Render stretchpoly JSON/CSV data files')
    sub = parser.add_subparsers(dest='kind', required=True)
    specs = [('mode-slice', 'grid of meridional basis/mode slices', 1),
             ('sparsity', 'operator coupling diagrams', 1),
             ('radial-limit', 'radial profiles across a geometry family', '+'),
             ('trace', 'eigenvalue trace from a scan CSV', 1)]
    for kind, help_text, nargs in specs:
        p = sub.add_parser(kind, help=help_text)
        p.add_argument('inputs', nargs=nargs)
        p.add_argument('-o', '--output-dir', default='.')
        p.add_argument('--formats', default='png',
                       help='comma-separated: png and/or svg')
        p.add_argument('--labels', default='', help='comma-separated curve labels')
        p.add_argument('--panel', default='0,0', help='l,k panel for radial plots')
        p.add_argument('--dpi', type=int, default=110)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    inputs = args.inputs if isinstance(args.inputs, list) else [args.inputs]
    try:
        job = PlotJob(kind=args.kind, inputs=tuple(inputs),
                      output_dir=args.output_dir,
                      formats=tuple(f for f in args.formats.split(',') if f),
                      labels=tuple(l for l in args.labels.split(',') if l),
                      panel=tuple(int(v) for v in args.panel.split(',')),
                      dpi=args.dpi)
        paths = render(job)
    except (SchemaError, OSError, ValueError) as exc:
        print(json.dumps({'error': type(exc).__name__, 'message': str(exc)}),
              file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == '__main__':
    sys.exit(main())
