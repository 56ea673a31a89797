"""
Stretched-domain geometry: height functions, singularity flags, radii,
and the maps between physical (s, z) and computational (t, eta) coordinates.

The radial map sends s in [0, S_o] (cylinder) or [S_i, S_o] (annulus) to
t in [-1, 1] through t = 2(s/S_o)**2 - 1 or
t = (2 s**2 - (S_o**2 + S_i**2)) / (S_o**2 - S_i**2).  The height function
factors as h(t) = (1-t)**(chi_o/2) (1+t)**(chi_i/2) htilde(t)**chi_h with
htilde strictly positive on [-1, 1].
"""

import math
from dataclasses import dataclass

import numpy as np

from .genjacobi import Polynomial

__all__ = [
    'HeightFunction', 'Geometry', 'GeometryError',
    'height_polynomial_from_s', 'coreaboloid_geometry', 'spheroid_geometry',
    'excised_sphere_geometry', 'sample_geometries',
]

GRAVITY = 9.81  # m/s^2


class GeometryError(ValueError):
    """Invalid geometry declaration."""


def _as_length(value, unit):
    if unit == 'm':
        return float(value)
    if unit == 'cm':
        return float(value) / 100.0
    raise GeometryError(f'unknown length unit {unit!r}; use "m" or "cm"')


@dataclass(frozen=True)
class HeightFunction:
    """Non-vanishing part htilde (a polynomial in t) plus singularity flags."""

    htilde: Polynomial
    chi_o: int = 0
    chi_i: int = 0
    chi_h: float = 1.0

    def __post_init__(self):
        if self.chi_o not in (0, 1) or self.chi_i not in (0, 1):
            raise GeometryError('chi_o and chi_i must be 0 or 1')
        if float(self.chi_h) not in (1.0, 0.5):
            raise GeometryError('chi_h must be 1 or 1/2')
        object.__setattr__(self, 'chi_h', float(self.chi_h))
        probe = np.cos(np.linspace(0, np.pi, 65))
        values = self.htilde(probe).astype(float)
        if np.min(values) <= 1e-12:
            raise GeometryError('htilde must be strictly positive on [-1,1]')

    def htilde_at(self, t):
        return self.htilde(np.asarray(t, dtype=float)).astype(float)

    def __call__(self, t):
        """Full height h(t) including the singular prefactors."""
        t = np.asarray(t, dtype=float)
        value = self.htilde_at(t) ** self.chi_h
        if self.chi_o:
            value = value * np.sqrt(np.maximum(1 - t, 0.0))
        if self.chi_i:
            value = value * np.sqrt(np.maximum(1 + t, 0.0))
        return value

    @property
    def degree(self):
        return self.htilde.degree


@dataclass(frozen=True)
class Geometry:
    """Stretched cylinder or annulus with a declared vertical extent."""

    kind: str
    S_i: float
    S_o: float
    height: HeightFunction
    extent: str = 'full'

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise GeometryError('; '.join(errors))

    def validate(self):
        errors = []
        if self.kind not in ('cylinder', 'annulus'):
            errors.append(f'unknown kind {self.kind!r}')
        if self.extent not in ('full', 'upper_half'):
            errors.append(f'unknown extent {self.extent!r}')
        if not self.S_o > 0:
            errors.append('S_o must be positive')
        if self.kind == 'cylinder' and self.S_i != 0:
            errors.append('cylinders require S_i = 0')
        if self.kind == 'annulus' and not 0 < self.S_i < self.S_o:
            errors.append('annulus requires 0 < S_i < S_o')
        height = self.height
        if self.kind == 'cylinder' and height.chi_i != 0:
            errors.append('inner equatorial singularity requires an annulus')
        if self.extent == 'upper_half':
            if (height.chi_o, height.chi_i, height.chi_h) != (0, 0, 1.0):
                errors.append(
                    'upper-half extent requires (chi_o, chi_i, chi_h) = (0, 0, 1): '
                    'vanishing heights are incompatible with the half-domain '
                    'vertical coordinate')
        return errors

    # -- coordinate maps ---------------------------------------------------

    @property
    def radial_jacobian(self):
        """S_o^2 (cylinder) or S_o^2 - S_i^2 (annulus): dt = (4/jacobian) s ds."""
        return self.S_o ** 2 - self.S_i ** 2

    def t_of_s(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.S_i - 1e-12) or np.any(s > self.S_o + 1e-12):
            raise GeometryError('radius outside the domain')
        return (2 * s ** 2 - (self.S_o ** 2 + self.S_i ** 2)) / self.radial_jacobian

    def s_of_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) > 1 + 1e-12):
            raise GeometryError('t outside [-1, 1]')
        return np.sqrt((self.S_i ** 2 * (1 - t) + self.S_o ** 2 * (1 + t)) / 2)

    def stilde(self, t):
        """stilde(t) = sqrt(S_i^2 (1-t) + S_o^2 (1+t)) = sqrt(2) * s."""
        t = np.asarray(t, dtype=float)
        return np.sqrt(self.S_i ** 2 * (1 - t) + self.S_o ** 2 * (1 + t))

    @property
    def stilde_squared(self):
        """The linear polynomial stilde(t)^2 in ascending coefficients."""
        return Polynomial((self.S_i ** 2 + self.S_o ** 2,
                           self.S_o ** 2 - self.S_i ** 2))

    def height_at(self, t):
        return self.height(t)

    def physical_z(self, t, eta):
        """z from the computational vertical coordinate (eta, or zeta in half extent)."""
        t, eta = np.asarray(t, dtype=float), np.asarray(eta, dtype=float)
        if self.extent == 'upper_half':
            return 0.5 * (eta + 1) * self.height(t)
        return eta * self.height(t)


def height_polynomial_from_s(coeffs_s, S_i, S_o):
    """Convert an even polynomial in s (ascending coefficients) to t form.

    Radial parity requires only even powers of s; s**2 maps to the linear
    polynomial (S_i^2 (1-t) + S_o^2 (1+t)) / 2.
    """
    coeffs_s = list(coeffs_s)
    if any(c != 0 for c in coeffs_s[1::2]):
        raise GeometryError('height authored in s must contain only even powers')
    s_squared = Polynomial(((S_i ** 2 + S_o ** 2) / 2, (S_o ** 2 - S_i ** 2) / 2))
    result = Polynomial((0.0,))
    power = Polynomial((1.0,))
    for k, c in enumerate(coeffs_s[0::2]):
        if k > 0:
            power = power * s_squared
        result = Polynomial(tuple(np.polynomial.polynomial.polyadd(
            result.coeffs, (c * power).coeffs)))
    return result


def coreaboloid_geometry(rpm, S_i=10.2, S_o=37.25, H_NR=17.08, unit='cm', g=GRAVITY):
    """Rotating free-surface annulus with a parabolic upper boundary.

    The surface is h(s) = h0 + Omega^2 s^2 / (2 g) with
    h0 = H_NR - Omega^2 S_o^2 / (4 g).  All lengths are nondimensionalized
    by S_o.  The geometry is singular once the paraboloid vertex height h0
    reaches zero, which happens just above 66 RPM for the reference tank.
    """
    S_i, S_o, H_NR = (_as_length(v, unit) for v in (S_i, S_o, H_NR))
    h0 = coreaboloid_vertex_height(rpm, S_o, H_NR, unit='m', g=g)
    if h0 <= 0:
        raise GeometryError(
            f'coreaboloid is singular at {rpm} RPM: surface vertex height '
            f'h0 = {h0:.4g} m is not positive')
    omega = 2 * math.pi * rpm / 60.0
    # nondimensionalize by S_o; in t, (s/S_o)^2 = (si^2 (1-t) + (1+t))/2
    si = S_i / S_o
    quad_coeff = omega ** 2 * S_o / (2 * g)   # coefficient of (s/S_o)^2
    s2 = Polynomial(((si ** 2 + 1) / 2, (1 - si ** 2) / 2))
    htilde = Polynomial(tuple(np.polynomial.polynomial.polyadd(
        (h0 / S_o,), (quad_coeff * s2).coeffs)))
    height = HeightFunction(htilde, chi_o=0, chi_i=0, chi_h=1)
    return Geometry('annulus', si, 1.0, height, extent='upper_half')


def coreaboloid_vertex_height(rpm, S_o=37.25, H_NR=17.08, unit='cm', g=GRAVITY):
    """Paraboloid vertex height h0 in meters; non-positive once singular."""
    S_o, H_NR = (_as_length(v, unit) for v in (S_o, H_NR))
    omega = 2 * math.pi * rpm / 60.0
    return H_NR - omega ** 2 * S_o ** 2 / (4 * g)


def spheroid_geometry(H, S_o=1.0, extent='full'):
    """Oblate spheroid h(s) = H sqrt(1 - (s/S_o)^2) as a stretched cylinder."""
    if H <= 0:
        raise GeometryError('spheroid height must be positive')
    # h^2 = H^2 (1 - s^2/S_o^2) = H^2 (1 - t)/2
    height = HeightFunction(Polynomial((H / math.sqrt(2),)), chi_o=1, chi_i=0, chi_h=1)
    return Geometry('cylinder', 0.0, S_o, height, extent=extent)


def excised_sphere_geometry(S_i, extent='full'):
    """Unit sphere with an axial cylinder of radius S_i removed."""
    if not 0 < S_i < 1:
        raise GeometryError('excised sphere requires 0 < S_i < 1')
    # 1 - s^2 = (1 - S_i^2)(1 - t)/2 on the annulus [S_i, 1]
    scale = math.sqrt((1 - S_i ** 2) / 2)
    height = HeightFunction(Polynomial((scale,)), chi_o=1, chi_i=0, chi_h=1)
    return Geometry('annulus', S_i, 1.0, height, extent=extent)


def sample_geometries():
    """Catalog of the reference shapes used across tests and demos."""
    catalog = {}
    catalog['paraboloid_cylinder'] = Geometry(
        'cylinder', 0.0, 1.0,
        HeightFunction(Polynomial((0.5, 0.25)), 0, 0, 1))          # (2+t)/4
    catalog['parabolic_cylinder'] = Geometry(
        'cylinder', 0.0, 1.0,
        HeightFunction(height_polynomial_from_s([0.2, 0, 0.8], 0.0, 1.0), 0, 0, 1))
    catalog['oblate_spheroid'] = Geometry(
        'cylinder', 0.0, 1.0, HeightFunction(Polynomial((0.8,)), 1, 0, 1))
    catalog['biconcave_disk'] = Geometry(
        'cylinder', 0.0, 1.0,
        HeightFunction(Polynomial((3 / 9, 4 / 9, 2 / 9)), 1, 0, 0.5))
    catalog['annular_paraboloid'] = Geometry(
        'annulus', 0.35, 1.0,
        HeightFunction(height_polynomial_from_s([0.2, 0, 0.2], 0.35, 1.0), 0, 0, 1))
    catalog['sphere_annulus'] = excised_sphere_geometry(0.35)
    catalog['torus'] = Geometry(
        'annulus', 0.35, 1.0, HeightFunction(Polynomial((1.0,)), 1, 1, 1))
    catalog['half_paraboloid'] = Geometry(
        'cylinder', 0.0, 1.0,
        HeightFunction(height_polynomial_from_s([0.25, 0, 0.375], 0.0, 1.0), 0, 0, 1),
        extent='upper_half')
    catalog['half_annulus'] = Geometry(
        'annulus', 0.25, 1.0,
        HeightFunction(height_polynomial_from_s([0.2, 0, 0.2], 0.25, 1.0), 0, 0, 1),
        extent='upper_half')
    return catalog
