"""Spectral bases and sparse operators on stretched cylinders and annuli."""

__version__ = '0.1.0'

from . import basis, genjacobi, geometry, operators3d, serialize, waves

__all__ = ['genjacobi', 'geometry', 'basis', 'operators3d', 'waves', 'serialize']
