"""Overflow-safe complex numbers, the complex erfc and log-factorials.

A :class:`ScaledComplex` stores ``mantissa * 2**exponent`` with the mantissa
normalised to ``1 <= |mantissa| < 2`` (or exactly zero).  Orthonormal
polynomials of degree ~n grow like ``exp(c n)``, so anything that touches
them at n in the hundreds goes through this type or through the vectorised
``(mantissa, exponent)`` array helpers further down.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, DomainError

__all__ = [
    "ScaledComplex",
    "sc_mul",
    "sc_add",
    "complex_erfc",
    "log_factorial",
    "stirling_correction",
    "normalize_arrays",
    "scaled_from_log",
    "scaled_sum",
    "scaled_to_native",
]

# magnitudes up to 2**(2**31) are representable; beyond that is a bug
EXPONENT_LIMIT = 2**31
MANTISSA_BITS = 53

# Cody-Waite split of log(2) so that x - k*log(2) keeps full precision
_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_INV_LN2 = 1.0 / math.log(2.0)


def _check_exponent(e: int) -> int:
    if not -EXPONENT_LIMIT < e < EXPONENT_LIMIT:
        raise OverflowError(f"scaled exponent {e} exceeds the 2**31 limit")
    return e


def _normalize(m: complex, e: int) -> tuple[complex, int]:
    if m == 0:
        return 0j, 0
    re, im = m.real, m.imag
    if not (math.isfinite(re) and math.isfinite(im)):
        raise InvalidArgument(f"non-finite mantissa {m!r}")
    # coarse shift from the larger component, then fix up with the modulus
    _, k = math.frexp(max(abs(re), abs(im)))
    k -= 1
    re, im = math.ldexp(re, -k), math.ldexp(im, -k)
    a = math.hypot(re, im)
    while a >= 2.0:
        re, im, k = re * 0.5, im * 0.5, k + 1
        a = math.hypot(re, im)
    while a < 1.0:
        re, im, k = re * 2.0, im * 2.0, k - 1
        a = math.hypot(re, im)
    return complex(re, im), _check_exponent(e + k)


@dataclass(frozen=True, slots=True)
class ScaledComplex:
    """Complex value ``mantissa * 2**exponent`` with a normalised mantissa."""

    mantissa: complex
    exponent: int

    # construction -----------------------------------------------------
    @classmethod
    def make(cls, mantissa: complex, exponent: int = 0) -> "ScaledComplex":
        m, e = _normalize(complex(mantissa), int(exponent))
        return cls(m, e)

    @classmethod
    def from_complex(cls, z: complex) -> "ScaledComplex":
        return cls.make(complex(z), 0)

    @classmethod
    def from_log(cls, logz: complex) -> "ScaledComplex":
        """The value ``exp(logz)``; the real part may be far outside float range."""
        logz = complex(logz)
        if not (math.isfinite(logz.imag) and not math.isnan(logz.real)):
            raise InvalidArgument(f"bad logarithm {logz!r}")
        if logz.real == -math.inf:
            return ZERO
        k = math.floor(logz.real * _INV_LN2)
        r = (logz.real - k * _LN2_HI) - k * _LN2_LO
        return cls.make(cmath.rect(math.exp(r), logz.imag), k)

    # conversion -------------------------------------------------------
    def to_complex(self) -> complex:
        """Native value; raises OverflowError if it does not fit."""
        if self.exponent > 1024:
            raise OverflowError("scaled value exceeds native range")
        return complex(math.ldexp(self.mantissa.real, self.exponent),
                       math.ldexp(self.mantissa.imag, self.exponent))

    def log_abs(self) -> float:
        if self.mantissa == 0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.exponent * math.log(2.0)

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def conj(self) -> "ScaledComplex":
        return ScaledComplex(self.mantissa.conjugate(), self.exponent)

    def __neg__(self) -> "ScaledComplex":
        return ScaledComplex(-self.mantissa, self.exponent)

    def __mul__(self, other):
        if isinstance(other, ScaledComplex):
            return sc_mul(self, other)
        return sc_mul(self, ScaledComplex.from_complex(other))

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, ScaledComplex):
            return sc_add(self, other)
        return sc_add(self, ScaledComplex.from_complex(other))

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        return sc_add(self, -other)

    def __truediv__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        if other.mantissa == 0:
            raise ZeroDivisionError("division by a zero ScaledComplex")
        return ScaledComplex.make(self.mantissa / other.mantissa,
                                  self.exponent - other.exponent)


ZERO = ScaledComplex(0j, 0)
ONE = ScaledComplex(1 + 0j, 0)


def sc_mul(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    """Product; exponents add and the mantissa product is renormalised."""
    if a.mantissa == 0 or b.mantissa == 0:
        return ZERO
    return ScaledComplex.make(a.mantissa * b.mantissa, a.exponent + b.exponent)


def sc_add(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    """Sum; the smaller-exponent operand is shifted onto the larger one."""
    if b.mantissa == 0:
        return a
    if a.mantissa == 0:
        return b
    if a.exponent < b.exponent:
        a, b = b, a
    gap = a.exponent - b.exponent
    if gap > MANTISSA_BITS:
        return a
    m = a.mantissa + complex(math.ldexp(b.mantissa.real, -gap),
                             math.ldexp(b.mantissa.imag, -gap))
    return ScaledComplex.make(m, a.exponent)


# ----------------------------------------------------------------------
# vectorised (mantissa, exponent) arrays

def normalize_arrays(mant, expo):
    """Renormalise complex mantissas into [1, 2); zeros get exponent 0."""
    mant = np.asarray(mant, dtype=complex)
    expo = np.asarray(expo, dtype=np.int64)
    scale = np.maximum(np.abs(mant.real), np.abs(mant.imag))
    _, k = np.frexp(scale)
    k = k.astype(np.int64) - 1
    re = np.ldexp(mant.real, -k)
    im = np.ldexp(mant.imag, -k)
    a = np.hypot(re, im)
    # hypot >= max component, so at most one halving is needed (|m| < 2*sqrt2)
    big = a >= 2.0
    re = np.where(big, re * 0.5, re)
    im = np.where(big, im * 0.5, im)
    k = k + big
    zero = scale == 0
    out = re + 1j * im
    out = np.where(zero, 0j, out)
    e = np.where(zero, 0, expo + k)
    return out, e


def scaled_from_log(logz):
    """Arrays (mantissa, exponent) representing exp(logz) elementwise."""
    logz = np.asarray(logz, dtype=complex)
    re = logz.real
    neg_inf = np.isneginf(re)
    re_safe = np.where(neg_inf, 0.0, re)
    k = np.floor(re_safe * _INV_LN2)
    r = (re_safe - k * _LN2_HI) - k * _LN2_LO
    mant = np.exp(r) * np.exp(1j * logz.imag)
    mant = np.where(neg_inf, 0j, mant)
    return normalize_arrays(mant, k.astype(np.int64))


def scaled_sum(mant, expo, axis=0):
    """Sum scaled entries along ``axis``; returns normalised (mantissa, exponent)."""
    mant = np.asarray(mant, dtype=complex)
    expo = np.asarray(expo, dtype=np.int64)
    nonzero = mant != 0
    big = np.where(nonzero, expo, np.iinfo(np.int64).min // 4)
    top = np.max(big, axis=axis, keepdims=True)
    top = np.where(np.any(nonzero, axis=axis, keepdims=True), top, 0)
    shift = np.clip(expo - top, -1100, 0)
    terms = np.where(nonzero, mant * np.ldexp(1.0, shift), 0j)
    total = np.sum(terms, axis=axis)
    return normalize_arrays(total, np.squeeze(top, axis=axis))


def scaled_to_native(mant, expo):
    """Native complex values; entries beyond float range become inf."""
    mant = np.asarray(mant, dtype=complex)
    expo = np.clip(np.asarray(expo, dtype=np.int64), -1200, 1200)
    with np.errstate(over="ignore"):
        return np.ldexp(mant.real, expo) + 1j * np.ldexp(mant.imag, expo)


# ----------------------------------------------------------------------
# complementary error function

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
# Re z above which the power series loses relative accuracy in erfc = 1 - erf
_SERIES_RE_MAX = 1.5
_SERIES_ABS_MAX = 12.0
_CF_MIN_LEVELS = 60
_CF_MAX_LEVELS = 20000


def _erf_series(z: complex) -> complex:
    z2 = z * z
    term = z
    total = z
    k = 0
    bound = abs(z2)
    while True:
        k += 1
        term *= -z2 / k
        piece = term / (2 * k + 1)
        total += piece
        if k > bound and abs(piece) <= 1e-17 * abs(total):
            break
    return _TWO_OVER_SQRT_PI * total


def _erfc_continued_fraction(z: complex) -> complex:
    # erfc z = exp(-z^2)/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    tiny = 1e-300
    f = z
    c = z
    d = 0j
    j = 0
    while True:
        j += 1
        a = 0.5 * j
        d = z + a * d
        if d == 0:
            d = tiny
        c = z + a / c
        if c == 0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if j >= _CF_MIN_LEVELS and abs(delta - 1.0) < 1e-16:
            break
        if j >= _CF_MAX_LEVELS:
            break
    return cmath.exp(-z * z) * _INV_SQRT_PI / f


def complex_erfc(z: complex) -> complex:
    """Complementary error function on the whole complex plane.

    Power series of erf near the origin, Laplace continued fraction further
    out, and ``erfc(-z) = 2 - erfc(z)`` for the left half-plane.
    """
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidArgument(f"erfc needs a finite argument, got {z!r}")
    if z.real < 0:
        return 2.0 - _erfc_right(-z)
    return _erfc_right(z)


def _erfc_right(z: complex) -> complex:
    # Past Re z = 1.5 the series loses relative accuracy (erfc is small
    # there).  Close to the imaginary axis the fraction converges slowly, but
    # the series stays accurate because |erfc| is large.
    if z.real <= _SERIES_RE_MAX and abs(z) <= _SERIES_ABS_MAX:
        return 1.0 - _erf_series(z)
    return _erfc_continued_fraction(z)


# ----------------------------------------------------------------------
# factorials

_EXACT_FACTORIAL_MAX = 1000


def log_factorial(n: int) -> float:
    """ln(n!)."""
    n = int(n)
    if n < 0:
        raise DomainError("log_factorial needs n >= 0")
    if n < 2:
        return 0.0
    if n <= _EXACT_FACTORIAL_MAX:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1.0)


def stirling_correction(n: int) -> float:
    """ln(n!) - ln(sqrt(2 pi n) n^n e^-n); lies in (1/(12n+1), 1/(12n))."""
    n = int(n)
    if n < 1:
        raise DomainError("stirling_correction needs n >= 1")
    if n < 20:
        return log_factorial(n) - (n * math.log(n) - n + 0.5 * math.log(2 * math.pi * n))
    x = 1.0 / n
    x2 = x * x
    return x * (1 / 12 - x2 * (1 / 360 - x2 * (1 / 1260 - x2 / 1680)))
