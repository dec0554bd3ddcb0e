"""Ellipse geometry, the maps U_F, T_F, W_F and elliptic coordinates.

The droplet boundary for the potential |z|^2 - t Re z^2 is the ellipse with
semi-axes sqrt((1+t)/(1-t)) and sqrt((1-t)/(1+t)); its foci sit at +-F with
F = 2 sqrt(t/(1-t^2)).  Every map here is defined off the focal segment
[-F, F] and uses the principal square root.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

from .errors import CutError, DomainError

__all__ = [
    "EllipseGeometry",
    "EllipticCoords",
    "Region",
    "RegionLabel",
    "focus_distance",
    "semi_axes",
    "in_cplus",
    "u_map",
    "u_over_f",
    "u_inverse",
    "t_map",
    "w_map",
    "elliptic_coords",
    "ellipse_point",
    "normal_angle",
    "classify",
    "CUT_TOLERANCE",
]

CUT_TOLERANCE = 1e-14


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t < 1.0:
        raise DomainError(f"t must lie in [0, 1), got {t}")
    return t


def focus_distance(t: float) -> float:
    """F = 2 sqrt(t/(1-t^2))."""
    t = _check_t(t)
    return 2.0 * math.sqrt(t / (1.0 - t * t))


def semi_axes(t: float) -> tuple[float, float]:
    """Major and minor semi-axes of the boundary ellipse."""
    t = _check_t(t)
    return math.sqrt((1.0 + t) / (1.0 - t)), math.sqrt((1.0 - t) / (1.0 + t))


@dataclass(frozen=True)
class EllipseGeometry:
    t: float
    F: float
    a: float
    b: float

    @classmethod
    def from_t(cls, t: float) -> "EllipseGeometry":
        a, b = semi_axes(t)
        return cls(float(t), focus_distance(t), a, b)

    def point(self, phi: float) -> complex:
        return complex(self.a * math.cos(phi), self.b * math.sin(phi))


@dataclass(frozen=True)
class EllipticCoords:
    """Confocal coordinates: z = sqrt(b^2+F^2) cos(phi) + i b sin(phi)."""

    bcoord: float
    phi: float
    F: float

    @property
    def acoord(self) -> float:
        return math.hypot(self.bcoord, self.F)

    def point(self) -> complex:
        return complex(self.acoord * math.cos(self.phi), self.bcoord * math.sin(self.phi))


def in_cplus(z: complex) -> bool:
    """Re z > 0, or Re z == 0 and Im z >= 0."""
    return z.real > 0 or (z.real == 0 and z.imag >= 0)


def _on_cut(z: complex, F: float) -> bool:
    return abs(z.imag) < CUT_TOLERANCE and abs(z.real) <= F + CUT_TOLERANCE


def _check_off_cut(z: complex, F: float) -> None:
    if F < 0:
        raise DomainError("F must be nonnegative")
    if _on_cut(z, F):
        raise CutError(f"{z} lies on the segment [-{F}, {F}]")


def t_map(z: complex, F: float) -> complex:
    """T_F(z) = +-sqrt(z^2 - F^2), + on the closed right half-plane C+."""
    z = complex(z)
    _check_off_cut(z, F)
    x, y = z.real, z.imag
    # z^2 - F^2 with the imaginary part formed directly as 2xy, so its sign is
    # exact even when x is tiny; a zero imaginary part is pinned to +0 so the
    # principal root is taken from above
    im = 2.0 * x * y
    w = complex((x - F) * (x + F) - y * y, im if im != 0 else 0.0)
    s = cmath.sqrt(w)
    return s if in_cplus(z) else -s


def u_over_f(z: complex, F: float) -> complex:
    """U_F(z)/F, evaluated as 1/(z + T_F(z)); finite as F -> 0 (tends to 1/(2z))."""
    z = complex(z)
    if F == 0:
        if z == 0:
            raise CutError("z = 0 is the degenerate cut for F = 0")
        return 1.0 / (2.0 * z)
    return 1.0 / (z + t_map(z, F))


def u_map(z: complex, F: float) -> complex:
    """U_F(z) = (z - T_F(z))/F, the inverse Joukowski map into the unit disc."""
    if F <= 0:
        raise DomainError("u_map needs F > 0")
    return F * u_over_f(z, F)


def u_inverse(u: complex, F: float) -> complex:
    """(F/2)(u + 1/u), inverse of u_map on 0 < |u| < 1."""
    u = complex(u)
    if u == 0 or abs(u) >= 1.0:
        raise DomainError("u_inverse needs 0 < |u| < 1")
    return 0.5 * F * (u + 1.0 / u)


def w_map(z: complex, F: float) -> complex:
    """W_F(z) = ((z+F)/(z-F))^(1/4) + ((z-F)/(z+F))^(1/4), principal roots."""
    z = complex(z)
    if F == 0:
        return 2.0 + 0j
    _check_off_cut(z, F)
    q = (z + F) / (z - F)
    r = cmath.exp(0.25 * cmath.log(q))
    return r + 1.0 / r


def elliptic_coords(z: complex, F: float) -> EllipticCoords:
    """The confocal (b, phi) with z = sqrt(b^2+F^2) cos(phi) + i b sin(phi)."""
    z = complex(z)
    x, y = z.real, z.imag
    if F == 0:
        if z == 0:
            raise CutError("z = 0 has no polar angle")
        return EllipticCoords(abs(z), _half_open_angle(cmath.phase(z)), 0.0)
    _check_off_cut(z, F)
    s = x * x + y * y - F * F
    root = math.sqrt(4.0 * y * y * F * F + s * s)
    if s >= 0:
        b2 = 0.5 * (s + root)
    else:
        # same quantity without the cancellation in s + root
        b2 = 2.0 * y * y * F * F / (root - s)
    b = math.sqrt(b2)
    a = math.hypot(b, F)
    phi = math.atan2(y / b, x / a)
    return EllipticCoords(b, _half_open_angle(phi), float(F))


def _half_open_angle(phi: float) -> float:
    # atan2 gives -pi for a negative real part with y = -0.0; keep (-pi, pi]
    return math.pi if phi == -math.pi else phi


def ellipse_point(t: float, phi: float) -> complex:
    """Point of the boundary ellipse at parameter phi."""
    a, b = semi_axes(t)
    return complex(a * math.cos(phi), b * math.sin(phi))


def normal_angle(t: float, phi: float) -> float:
    """Angle psi of the outward normal of the boundary ellipse at parameter phi."""
    t = _check_t(t)
    phi = float(phi)
    half = 0.5 * math.pi
    if phi == half or phi == -half:
        return phi
    ratio = (1.0 + t) / (1.0 - t)
    psi = math.atan(ratio * math.tan(phi))
    if abs(phi) > half:
        psi += math.copysign(math.pi, phi)
    return psi


class Region(enum.Enum):
    INSIDE_BULK = "inside"
    OUTSIDE_BULK = "outside"
    BOUNDARY_BAND = "boundary"
    ON_CUT = "cut"


@dataclass(frozen=True)
class RegionLabel:
    region: Region
    delta: float
    on_cut: bool = False


def classify(z: complex, t: float, delta: float) -> RegionLabel:
    """Locate z relative to the ellipses with semi-axes offset by -delta and +delta.

    Inside means strictly inside the shrunken ellipse, outside means outside
    the closure of the enlarged one, and the band is everything between.
    A point of the focal segment [-F, F] that is not inside the shrunken
    ellipse (possible only for large delta) gets ON_CUT instead of the band
    label.  ``on_cut`` flags segment points whatever their label.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    z = complex(z)
    t = _check_t(t)
    F = focus_distance(t)
    cut = F > 0 and _on_cut(z, F)
    a, b = semi_axes(t)
    x, y = z.real, z.imag
    if b - delta > 0:
        if (x / (a - delta)) ** 2 + (y / (b - delta)) ** 2 < 1.0:
            return RegionLabel(Region.INSIDE_BULK, delta, cut)
    if (x / (a + delta)) ** 2 + (y / (b + delta)) ** 2 > 1.0:
        return RegionLabel(Region.OUTSIDE_BULK, delta, cut)
    if cut:
        return RegionLabel(Region.ON_CUT, delta, True)
    return RegionLabel(Region.BOUNDARY_BAND, delta, False)
