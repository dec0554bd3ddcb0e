"""Large-n asymptotics: the exponent f, its prefactors, Hermite approximants
and the limiting density, kernel and correlation functions.

Formulas are written through U_F(z)/F = 1/(z + T_F(z)), which stays finite
as t -> 0, so t = 0 needs no separate branch except where a quantity is
genuinely singular there (f_U).
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidArgument, ValidityError
from .geometry import (
    ellipse_point,
    focus_distance,
    normal_angle,
    t_map,
    u_over_f,
    w_map,
)
from .orthopoly import _hermite_scaled
from .scaledcx import ScaledComplex, complex_erfc, log_factorial, normalize_arrays

__all__ = [
    "Regime",
    "EdgeFrame",
    "LimitKernelParams",
    "f_value",
    "f_gradient",
    "f_hessian_diag",
    "g_pm",
    "f_U_value",
    "h_coeffs",
    "HCoeffs",
    "q_scaled",
    "q_hermite",
    "pr_outside",
    "pr_oscillatory",
    "zeta",
    "zeta_edge",
    "limit_density",
    "limit_kernel",
    "limit_kernel_params",
    "limit_correlation",
]

SQRT2 = math.sqrt(2.0)


class Regime(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    EDGE = "edge"


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t < 1.0:
        raise DomainError(f"t must lie in [0, 1), got {t}")
    return t


def _uf(t, z):
    F = focus_distance(t)
    return F, u_over_f(z, F)


# ----------------------------------------------------------------------
# exponent and prefactors

def f_value(t: float, z: complex) -> float:
    """Growth exponent f(z): zero on the boundary ellipse, negative elsewhere."""
    t = _check_t(t)
    z = complex(z)
    F, uf = _uf(t, z)
    return ((t * (z * z).real - abs(z) ** 2)
            + F * F * (uf * uf).real
            - 2.0 * math.log(abs(uf))
            - math.log(4.0) + math.log1p(-t * t) + 1.0)


def f_gradient(t: float, z: complex) -> tuple[float, float]:
    """(df/dx, df/dy)."""
    t = _check_t(t)
    z = complex(z)
    _, uf = _uf(t, z)
    return (2.0 * z.real * (t - 1.0) + 4.0 * uf.real,
            -2.0 * z.imag * (t + 1.0) - 4.0 * uf.imag)


def f_hessian_diag(t: float, z: complex) -> tuple[float, float]:
    """(d2f/dx2, d2f/dy2)."""
    t = _check_t(t)
    z = complex(z)
    F, uf = _uf(t, z)
    T = z if F == 0 else t_map(z, F)
    q = (uf / T).real
    return 2.0 * (t - 1.0) - 4.0 * q, -2.0 * (t + 1.0) + 4.0 * q


def g_pm(t: float, z: complex) -> tuple[float, float]:
    """The prefactors (g+, g-) of the symmetric kernel identities."""
    t = _check_t(t)
    z = complex(z)
    F, uf = _uf(t, z)
    w2 = abs(w_map(z, F)) ** 2
    gp = -math.sqrt((1.0 - t) / (1.0 + t)) * uf.real * w2
    gm = -math.sqrt((1.0 + t) / (1.0 - t)) * uf.imag * w2
    return gp, gm


def f_U_value(t: float, u: complex) -> float:
    """f expressed in the variable u = U_F(z) on the punctured unit disc."""
    t = float(t)
    if not 0.0 < t < 1.0:
        raise DomainError("f_U needs 0 < t < 1")
    u = complex(u)
    if u == 0 or abs(u) >= 1.0:
        raise DomainError("f_U needs 0 < |u| < 1")
    s = u + 1.0 / u
    d = 1.0 - t * t
    return (t * t / d * (s * s).real - t / d * abs(s) ** 2
            + (u * u).real - 2.0 * math.log(abs(u)) + math.log(t) + 1.0)


@dataclass(frozen=True)
class HCoeffs:
    h1: complex
    h1bar: complex
    h2: complex
    h2bar: complex
    gw: complex
    gz: complex


def _h1(t, z):
    _, uf = _uf(t, z)
    return 2.0 * uf + t * z - z.conjugate()


def _h2(t, z):
    F, uf = _uf(t, z)
    T = z if F == 0 else t_map(z, F)
    return 0.5 * t - uf / T


def h_coeffs(t: float, z0: complex) -> HCoeffs:
    """Taylor coefficients of the separate-derivative identities at z0."""
    t = _check_t(t)
    z0 = complex(z0)
    zb = z0.conjugate()
    F, uf = _uf(t, z0)
    _, ufb = _uf(t, zb)
    w2 = abs(w_map(z0, F)) ** 2
    gw = 0.25 * w2 * (2.0 / math.sqrt(1.0 - t * t)) * (t * uf - ufb)
    return HCoeffs(_h1(t, z0), _h1(t, zb), _h2(t, z0), _h2(t, zb), gw, gw.conjugate())


# ----------------------------------------------------------------------
# Hermite approximants

def q_scaled(m: int, z: complex) -> ScaledComplex:
    """Q_m(z) = 2^-m m^(-m/2) H_m(sqrt(m) z) from the monic recurrence
    q_{k+1} = z q_k - k/(2m) q_{k-1}."""
    if m < 0:
        raise DomainError("m must be nonnegative")
    z = complex(z)
    if m == 0:
        return ScaledComplex(1 + 0j, 0)
    prev, cur, e = 0j, 1 + 0j, 0
    for k in range(m):
        prev, cur = cur, z * cur - (k / (2.0 * m)) * prev
        scale = max(abs(cur), abs(prev))
        if scale > 0:
            _, s = math.frexp(scale)
            cur, prev, e = math.ldexp(1.0, -s) * cur, math.ldexp(1.0, -s) * prev, e + s
    return ScaledComplex.make(cur, e)


def q_hermite(m: int, z: complex) -> ScaledComplex:
    """Q_m(z) through the physicists' Hermite recurrence at sqrt(m) z."""
    z = complex(z)
    hm, he = _hermite_scaled(np.array([math.sqrt(m) * z]), m)
    log_pref = -m * math.log(2.0) - 0.5 * m * math.log(m) if m else 0.0
    return ScaledComplex.make(complex(hm[m, 0]), int(he[m, 0])) * ScaledComplex.from_log(log_pref)


def pr_outside(m: int, z: complex) -> ScaledComplex:
    """pi_m(z) = W(z)/2 exp((m/2) U(z)^2) (sqrt2 U(z))^-m with F = sqrt2."""
    z = complex(z)
    u = SQRT2 * u_over_f(z, SQRT2)
    w = w_map(z, SQRT2)
    logv = cmath.log(0.5 * w) + 0.5 * m * u * u - m * cmath.log(SQRT2 * u)
    return ScaledComplex.from_log(logv)


def pr_oscillatory(m: int, x: float, delta: float = 0.1, weighted: bool = False) -> float:
    """pi^r_m(x) on (-sqrt2 + delta, sqrt2 - delta).

    With ``weighted`` the factor exp((m/2)(x^2 - 1 - log 2)) is left off,
    which is the scale on which the approximation error is O(1/m).
    """
    x = float(x)
    if delta <= 0:
        raise DomainError("delta must be positive")
    if abs(x) > SQRT2 - delta:
        raise ValidityError(f"|x| = {abs(x)} is within {delta} of sqrt(2)")
    phase = 0.5 * m * (x * math.sqrt(2.0 - x * x) + 2.0 * math.asin(x / SQRT2) - math.pi)
    r = ((SQRT2 - x) / (SQRT2 + x)) ** 0.25
    core = r * math.cos(phase - 0.25 * math.pi) + math.cos(phase + 0.25 * math.pi) / r
    if weighted:
        return core
    return core * math.exp(0.5 * m * (x * x - 1.0 - math.log(2.0)))


# ----------------------------------------------------------------------
# edge coordinates and limits

def _edge_denominator(t, phi):
    return math.sqrt((1.0 + t) ** 2 - 4.0 * t * math.cos(phi) ** 2)


def zeta(t: float, a: complex, phi: float) -> float:
    """Real edge coordinate of the offset a (unrotated) at ellipse parameter phi."""
    t = _check_t(t)
    a = complex(a)
    num = (1.0 - t) * math.cos(phi) * a.real + (1.0 + t) * math.sin(phi) * a.imag
    return SQRT2 * num / _edge_denominator(t, phi)


def zeta_edge(t: float, abar: complex, phi: float) -> complex:
    """Complex edge coordinate of the conjugated offset, linear in abar."""
    t = _check_t(t)
    c = complex((1.0 - t) * math.cos(phi), (1.0 + t) * math.sin(phi))
    return complex(abar) / SQRT2 * c / _edge_denominator(t, phi)


@dataclass(frozen=True)
class EdgeFrame:
    """A boundary point with its ellipse parameter and outward-normal angle."""

    z0: complex
    phi: float
    psi: float

    @classmethod
    def from_phi(cls, t: float, phi: float) -> "EdgeFrame":
        return cls(ellipse_point(t, phi), float(phi), normal_angle(t, phi))


def limit_density(t: float, regime: Regime, a: complex = 0j,
                  frame: EdgeFrame | None = None, rotated: bool = True) -> float:
    """Limit of rho_n(z0 + offset/sqrt(n)).

    At the edge the offset is a e^{i psi} when ``rotated`` (the profile is
    then erfc(sqrt2 Re a)/(2 pi)), otherwise it is a itself.
    """
    regime = Regime(regime)
    if (regime is Regime.EDGE) != (frame is not None):
        raise InvalidArgument("an edge frame is required exactly in the edge regime")
    if regime is Regime.INSIDE:
        return 1.0 / math.pi
    if regime is Regime.OUTSIDE:
        return 0.0
    arg = SQRT2 * complex(a).real if rotated else zeta(t, a, frame.phi)
    return complex_erfc(arg).real / (2.0 * math.pi)


@dataclass(frozen=True)
class LimitKernelParams:
    """Inputs of the limiting kernel.

    ``phase`` is the full phase; ``oscillatory`` is its sqrt(n) part, which
    is the only piece depending on n.
    """

    regime: Regime
    a: complex
    b: complex
    phase: float
    n: int
    oscillatory: float = 0.0


def limit_kernel_params(t: float, regime: Regime, a: complex, b: complex, n: int = 0,
                        z0: complex = 0j, psi: float = 0.0,
                        frame: EdgeFrame | None = None) -> LimitKernelParams:
    """Build kernel parameters with the phase for base point z0 and rotation psi.

    In the edge regime z0 and psi come from ``frame``.
    """
    regime = Regime(regime)
    t = _check_t(t)
    if regime is Regime.EDGE:
        if frame is None:
            raise InvalidArgument("edge regime needs a frame")
        z0, psi = frame.z0, frame.psi
    a, b, z0 = complex(a), complex(b), complex(z0)
    rot = cmath.exp(-1j * psi)
    osc = math.sqrt(n) * (rot * (a - b).conjugate() * (z0 - t * z0.conjugate())).imag if n else 0.0
    rest = (a.conjugate() * b + 0.5 * t * cmath.exp(2j * psi) * (a * a - b * b)).imag
    return LimitKernelParams(regime, a, b, osc + rest, int(n), osc)


def limit_kernel(params: LimitKernelParams) -> complex:
    """Limit of K~_n(z0 + a e^{i psi}/sqrt n, z0 + b e^{i psi}/sqrt n)/n."""
    a, b = params.a, params.b
    if params.regime is Regime.OUTSIDE:
        return 0j
    mod = math.exp(-0.5 * abs(a - b) ** 2)
    if params.regime is Regime.INSIDE:
        amp = mod / math.pi
    else:
        amp = mod * complex_erfc((a.conjugate() + b) / SQRT2) / (2.0 * math.pi)
    return cmath.exp(1j * params.phase) * amp


def limit_correlation(t: float, regime: Regime, offsets: Sequence[complex],
                      phi: float = 0.0, n: int = 0, z0: complex = 0j,
                      renormalized: bool = False) -> float:
    """Limit of the rescaled m-point correlation function at the given offsets.

    The matrix is assembled from ``limit_kernel`` including its full phase,
    for the edge point at parameter ``phi`` or the base point ``z0``; the
    base-point dependent parts of the phase cancel in the determinant.
    With ``renormalized`` the offsets are measured in units of
    K~_n(z0, z0)^(-1/2) instead of n^(-1/2) and the kernel is divided by its
    diagonal value, so the inside limit has unit diagonal.
    """
    regime = Regime(regime)
    pts = [complex(a) for a in offsets]
    m = len(pts)
    if not 1 <= m <= 64:
        raise DomainError("need 1 <= m <= 64 offsets")
    if regime is Regime.OUTSIDE:
        return 0.0
    frame = EdgeFrame.from_phi(t, phi) if regime is Regime.EDGE else None
    if renormalized:
        diag = 1.0 / math.pi if regime is Regime.INSIDE else 1.0 / (2.0 * math.pi)
        scale = math.sqrt(1.0 / diag)
    else:
        diag, scale = 1.0, 1.0
    mat = np.empty((m, m), dtype=complex)
    for k in range(m):
        for l in range(m):
            p = limit_kernel_params(t, regime, pts[k] * scale, pts[l] * scale, n, z0, 0.0, frame)
            mat[k, l] = limit_kernel(p) / diag
    return float(np.linalg.det(mat).real)
