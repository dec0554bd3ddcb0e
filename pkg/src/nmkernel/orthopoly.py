"""Orthonormal polynomials for Gaussian weights on the plane.

For the canonical weight exp(-n(|z|^2 - t Re z^2)) the orthonormal
polynomials obey

    z p_m = r_{m+1} p_{m+1} + conj(t) r_m p_{m-1},   r_m = sqrt(m / (n (1 - |t|^2)))

with p_0 = sqrt(n sqrt(1-|t|^2) / pi).  They are rescaled Hermite polynomials,
which gives an independent closed form used for cross-checks.  A general
quadratic potential (t0, t1, t2) reduces to the canonical one by a shift,
a scaling and a rotation.

Values grow like exp(c n), so evaluation works on (mantissa, exponent)
pairs: each point carries one binary exponent shared by the two most recent
recurrence terms, renormalised after every step.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError
from .geometry import focus_distance
from .scaledcx import (
    ScaledComplex,
    log_factorial,
    normalize_arrays,
    scaled_from_log,
)

__all__ = [
    "CanonicalModel",
    "GeneralPotential",
    "CanonicalReduction",
    "PolySequence",
    "DerivativeResidual",
    "PolarQuadrature",
    "recurrence_coeff",
    "p0_value",
    "poly_table",
    "poly_sequence",
    "hermite_closed_form",
    "hermite_zeros",
    "polynomial_zeros",
    "derivative_relation_residual",
    "zero_bound",
    "reduce_general",
    "general_poly_table",
    "polar_integrate",
    "gram_matrix",
]


@dataclass(frozen=True)
class CanonicalModel:
    """Weight exp(-n V) with V(z) = |z|^2 - t Re(z^2), 0 <= t < 1."""

    n: int
    t: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not 0.0 <= float(self.t) < 1.0:
            raise DomainError(f"t must lie in [0, 1), got {self.t}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "t", float(self.t))

    def potential(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(z) ** 2 - self.t * np.real(z * z)


@dataclass(frozen=True)
class GeneralPotential:
    """V(z) = (|z|^2 - 2 Re(t1 z + t2 z^2)) / t0 with t0 > 0 and 2|t2| < 1."""

    t0: float
    t1: complex
    t2: complex

    def __post_init__(self):
        if not float(self.t0) > 0:
            raise DomainError("t0 must be positive")
        if not 2.0 * abs(complex(self.t2)) < 1.0:
            raise DomainError("need 2|t2| < 1")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t1", complex(self.t1))
        object.__setattr__(self, "t2", complex(self.t2))

    def potential(self, z):
        z = np.asarray(z, dtype=complex)
        return (np.abs(z) ** 2 - 2.0 * np.real(self.t1 * z + self.t2 * z * z)) / self.t0


@dataclass(frozen=True)
class CanonicalReduction:
    """Maps a general potential onto the canonical real-t model.

    ``shift`` is the centre v in the original coordinates; the canonical
    coordinate of z is exp(i rotation/2) (z - shift) / scale.  ``constant``
    is C with |z|^2 - 2Re(t1 z + t2 z^2) + C = |z-v|^2 - 2Re(t2 (z-v)^2).
    """

    scale: float
    shift: complex
    rotation: float
    canonical_t: float
    constant: float

    @property
    def scaled_shift(self) -> complex:
        """The shift measured in sqrt(t0)-scaled coordinates."""
        return self.shift / self.scale

    def to_canonical(self, z):
        return np.exp(0.5j * self.rotation) * (np.asarray(z, dtype=complex) - self.shift) / self.scale

    def from_canonical(self, zeta):
        return np.exp(-0.5j * self.rotation) * np.asarray(zeta, dtype=complex) * self.scale + self.shift


@dataclass(frozen=True)
class PolySequence:
    """p_0(z), ..., p_m(z) as scaled complex numbers."""

    z: complex
    values: tuple

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k) -> ScaledComplex:
        return self.values[k]

    def to_native(self) -> np.ndarray:
        out = np.empty(len(self.values), dtype=complex)
        for k, v in enumerate(self.values):
            try:
                out[k] = v.to_complex()
            except OverflowError:
                out[k] = complex(math.inf, 0)
        return out

    def log_abs(self) -> np.ndarray:
        return np.array([v.log_abs() for v in self.values])


def recurrence_coeff(m: int, n: int, t) -> float:
    """r_m = sqrt(m / (n (1 - |t|^2)))."""
    if m < 0 or n < 1:
        raise DomainError("need m >= 0 and n >= 1")
    return math.sqrt(m / (n * (1.0 - abs(t) ** 2)))


def p0_value(n: int, t) -> float:
    return math.sqrt(n * math.sqrt(1.0 - abs(t) ** 2) / math.pi)


# ----------------------------------------------------------------------
# scaled three-term recurrences

def _rescale_pair(cur, prev, expo):
    scale = np.maximum(np.abs(cur), np.abs(prev))
    _, k = np.frexp(scale)
    k = np.where(scale > 0, k.astype(np.int64), 0)
    # ldexp on the parts: 2**-k alone overflows for subnormal inputs
    return _ldexp_c(cur, -k), _ldexp_c(prev, -k), expo + k


def _ldexp_c(x, k):
    return np.ldexp(x.real, k) + 1j * np.ldexp(x.imag, k)


def poly_table(n: int, t, zs, m: int):
    """p_0..p_m at every point of ``zs`` for weight exp(-n(|z|^2 - Re(t z^2))).

    ``t`` may be complex with |t| < 1.  Returns normalised mantissas and
    exponents, both shaped (m+1,) + shape(zs).
    """
    zs = np.asarray(zs, dtype=complex)
    shape = zs.shape
    z = zs.ravel()
    tbar = complex(t).conjugate()
    denom = n * (1.0 - abs(t) ** 2)
    r = np.sqrt(np.arange(m + 2) / denom)
    mant = np.empty((m + 1, z.size), dtype=complex)
    expo = np.empty((m + 1, z.size), dtype=np.int64)

    p0 = p0_value(n, t)
    cur = np.full(z.size, p0, dtype=complex)
    prev = np.zeros(z.size, dtype=complex)
    e = np.zeros(z.size, dtype=np.int64)
    mant[0], expo[0] = normalize_arrays(cur, e)
    for k in range(m):
        nxt = (z * cur - tbar * r[k] * prev) / r[k + 1]
        prev, cur = cur, nxt
        cur, prev, e = _rescale_pair(cur, prev, e)
        mant[k + 1], expo[k + 1] = normalize_arrays(cur, e)
    return mant.reshape((m + 1,) + shape), expo.reshape((m + 1,) + shape)


def _to_sequence(z, mant, expo) -> PolySequence:
    vals = tuple(ScaledComplex(complex(mm), int(ee)) for mm, ee in zip(mant, expo))
    return PolySequence(complex(z), vals)


def poly_sequence(model: CanonicalModel, z: complex, m: int) -> PolySequence:
    """p_0(z), ..., p_m(z) by the three-term recurrence."""
    if m < 0 or m > 10**6:
        raise DomainError("need 0 <= m <= 10**6")
    mant, expo = poly_table(model.n, model.t, np.array([complex(z)]), m)
    return _to_sequence(z, mant[:, 0], expo[:, 0])


def _hermite_scaled(x, m: int):
    """Physicists' Hermite H_0..H_m at the points x, as (mantissa, exponent)."""
    x = np.asarray(x, dtype=complex).ravel()
    mant = np.empty((m + 1, x.size), dtype=complex)
    expo = np.empty((m + 1, x.size), dtype=np.int64)
    cur = np.ones(x.size, dtype=complex)
    prev = np.zeros(x.size, dtype=complex)
    e = np.zeros(x.size, dtype=np.int64)
    mant[0], expo[0] = normalize_arrays(cur, e)
    for k in range(m):
        nxt = 2.0 * x * cur - 2.0 * k * prev
        prev, cur = cur, nxt
        cur, prev, e = _rescale_pair(cur, prev, e)
        mant[k + 1], expo[k + 1] = normalize_arrays(cur, e)
    return mant, expo


def _hermite_argument_scale(n: int, t: float) -> float:
    # s = sqrt(n(1-t^2)/(2t)), formed in logs so large n does not overflow
    return math.exp(0.5 * (math.log(n) + math.log1p(-t * t) - math.log(2.0) - math.log(t)))


def hermite_closed_form(model: CanonicalModel, z: complex, m: int) -> PolySequence:
    """p_k(z) = H_k(s z) t^{k/2} p_0 / (2^{k/2} sqrt(k!)); monomials when t = 0."""
    n, t = model.n, model.t
    z = complex(z)
    ks = np.arange(m + 1)
    logfact = np.array([log_factorial(k) for k in ks])
    if t == 0.0:
        # p_k = sqrt(n^{k+1}/(pi k!)) z^k
        logc = 0.5 * ((ks + 1) * math.log(n) - math.log(math.pi) - logfact)
        if z == 0:
            vals = [ScaledComplex.from_log(logc[0])] + [ScaledComplex(0j, 0)] * m
            return PolySequence(z, tuple(vals))
        logv = logc + ks * cmath.log(z)
        mant, expo = scaled_from_log(logv)
        return _to_sequence(z, mant, expo)
    s = _hermite_argument_scale(n, t)
    hm, he = _hermite_scaled(np.array([s * z]), m)
    logc = 0.5 * ks * (math.log(t) - math.log(2.0)) + math.log(p0_value(n, t)) - 0.5 * logfact
    cm, ce = scaled_from_log(logc)
    mant, expo = normalize_arrays(hm[:, 0] * cm, he[:, 0] + ce)
    return _to_sequence(z, mant, expo)


def hermite_zeros(m: int) -> np.ndarray:
    """Zeros of H_m as eigenvalues of the symmetric Jacobi matrix."""
    if m < 1:
        return np.empty(0)
    off = np.sqrt(np.arange(1, m) / 2.0)
    jac = np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigvalsh(jac)


def polynomial_zeros(model: CanonicalModel, m: int) -> np.ndarray:
    """Zeros of p_m for real t > 0 (real, simple); t = 0 gives the m-fold zero at 0."""
    if model.t == 0.0:
        return np.zeros(m)
    s = _hermite_argument_scale(model.n, model.t)
    return hermite_zeros(m) / s


def zero_bound(model: CanonicalModel, m: int) -> float:
    """F_m = F sqrt((m + 1/2)/n); all zeros of p_m lie in [-F_m, F_m]."""
    if m < 1:
        raise DomainError("zero_bound needs m >= 1")
    return focus_distance(model.t) * math.sqrt((m + 0.5) / model.n)


class DerivativeResidual(NamedTuple):
    residual: float
    absolute: bool


def derivative_relation_residual(model: CanonicalModel, z: complex, m: int) -> DerivativeResidual:
    """Compare p_m'(z) with sqrt(n m (1-t^2)) p_{m-1}(z).

    The derivative comes from the Hermite form through H_m' = 2m H_{m-1};
    the right-hand side uses the three-term recurrence.  Near a zero of
    p_{m-1} the relative residual is meaningless, so the residual is then
    measured against the local size of the sequence and flagged absolute.
    """
    if m < 1:
        raise DomainError("derivative relation needs m >= 1")
    n, t = model.n, model.t
    z = complex(z)
    seq = poly_sequence(model, z, m)
    factor = math.sqrt(n * m * (1.0 - t * t))
    rhs = seq[m - 1] * factor
    ks = m - 1
    if t == 0.0:
        # p_m = c_m z^m, p_m' = m c_m z^{m-1}
        logc = 0.5 * ((m + 1) * math.log(n) - math.log(math.pi) - log_factorial(m))
        if z == 0 and m > 1:
            lhs = ScaledComplex(0j, 0)
        else:
            lhs = ScaledComplex.from_log(logc + math.log(m) + (ks * cmath.log(z) if ks else 0))
    else:
        s = _hermite_argument_scale(n, t)
        hm, he = _hermite_scaled(np.array([s * z]), ks)
        logc = 0.5 * m * (math.log(t) - math.log(2.0)) + math.log(p0_value(n, t)) - 0.5 * log_factorial(m)
        lhs = (ScaledComplex.from_log(logc + math.log(2.0 * m * s))
               * ScaledComplex.make(complex(hm[ks, 0]), int(he[ks, 0])))
    diff = lhs - rhs
    # local magnitude: the largest of the neighbouring sequence entries
    lo = max(0, m - 3)
    local = max(v.log_abs() for v in seq.values[lo:m + 1]) + math.log(factor)
    if rhs.is_zero() or rhs.log_abs() < local + math.log(1e-6):
        if diff.is_zero():
            return DerivativeResidual(0.0, True)
        return DerivativeResidual(math.exp(diff.log_abs() - local), True)
    if diff.is_zero():
        return DerivativeResidual(0.0, False)
    return DerivativeResidual(math.exp(diff.log_abs() - rhs.log_abs()), False)


# ----------------------------------------------------------------------
# general potentials

def reduce_general(p: GeneralPotential) -> CanonicalReduction:
    """Shift, scale and rotation taking ``p`` to the canonical model with t = 2|t2|."""
    t1, t2 = p.t1, p.t2
    if not 2.0 * abs(t2) < 1.0:
        raise DomainError("need 2|t2| < 1")
    v = (t1.conjugate() + 2.0 * t1 * t2.conjugate()) / (1.0 - 4.0 * abs(t2) ** 2)
    const = abs(v) ** 2 - 2.0 * (t2 * v * v).real
    theta = cmath.phase(t2) if t2 != 0 else 0.0
    return CanonicalReduction(
        scale=math.sqrt(p.t0),
        shift=v,
        rotation=theta,
        canonical_t=2.0 * abs(t2),
        constant=const,
    )


def general_poly_table(p: GeneralPotential, n: int, zs, m: int):
    """Orthonormal polynomials for exp(-n(V + C/t0)) evaluated directly.

    Uses the complex-t recurrence with t = 2 t2 at (z - v)/sqrt(t0), so no
    rotation is involved; the rotated real-t route is in ``reduce_general``.
    Adding the constant C/t0 to V leaves every normalised kernel unchanged.
    """
    red = reduce_general(p)
    zeta = (np.asarray(zs, dtype=complex) - red.shift) / red.scale
    mant, expo = poly_table(n, 2.0 * p.t2, zeta, m)
    # 1/sqrt(t0) prefactor
    mant = mant / red.scale
    return normalize_arrays(mant, expo)


# ----------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class PolarQuadrature:
    """Trapezoid rule in angle times Gauss-Legendre in radius on [0, R].

    Both orders double until two successive results agree to ``tol``.
    """

    n_theta: int = 64
    n_r: int = 48
    radius: float | None = None
    tol: float = 1e-11
    max_levels: int = 5

    def nodes(self, radius: float, level: int, center: complex = 0j):
        nt = self.n_theta * 2**level
        nr = self.n_r * 2**level
        x, w = np.polynomial.legendre.leggauss(nr)
        r = 0.5 * radius * (x + 1.0)
        wr = 0.5 * radius * w * r
        th = 2.0 * np.pi * np.arange(nt) / nt
        z = center + r[:, None] * np.exp(1j * th)[None, :]
        wt = wr[:, None] * np.full(nt, 2.0 * np.pi / nt)[None, :]
        return z.ravel(), wt.ravel()


def polar_integrate(func: Callable[[np.ndarray], np.ndarray], radius: float,
                    quad: PolarQuadrature | None = None, center: complex = 0j):
    """Integrate func(z) over the disc |z - center| <= radius with refinement.

    ``func`` maps an array of points to an array whose last axis runs over
    the points; the integral is taken along that axis.
    """
    quad = quad or PolarQuadrature()
    prev = None
    for level in range(quad.max_levels):
        z, w = quad.nodes(radius, level, center)
        val = np.tensordot(np.asarray(func(z)), w, axes=([-1], [0]))
        if prev is not None:
            change = np.max(np.abs(val - prev))
            size = max(1.0, float(np.max(np.abs(val))))
            if change <= quad.tol * size:
                return val
        prev = val
    if change > 1e-6 * size:
        raise ConvergenceError(f"quadrature did not settle (last change {change:.3e})")
    return prev


def _weight_radius(n: int, t: float, mmax: int) -> float:
    # smallest R where exp(-nV) |p_m|^2 is negligible on the whole rim
    r = 1.0
    while True:
        log_tail = -n * r * r * (1.0 - t) + 2 * mmax * math.log(max(r, 1.0)) + (mmax + 1) * math.log(n)
        if log_tail < -80.0:
            return r
        r *= 1.1


def gram_matrix(model: CanonicalModel, mmax: int, quad: PolarQuadrature | None = None) -> np.ndarray:
    """G_kl = integral of conj(p_k) p_l exp(-nV) over the plane, k, l <= mmax."""
    if mmax > 8 or model.n > 8:
        raise DomainError("gram_matrix is an oracle for mmax <= 8 and n <= 8")
    quad = quad or PolarQuadrature()
    radius = quad.radius or _weight_radius(model.n, model.t, mmax)

    def integrand(z):
        mant, expo = poly_table(model.n, model.t, z, mmax)
        p = np.ldexp(mant.real, expo) + 1j * np.ldexp(mant.imag, expo)
        w = np.exp(-model.n * model.potential(z))
        return (p.conj()[:, None, :] * p[None, :, :]) * w

    return polar_integrate(integrand, radius, quad)
