"""Finite-n kernels, densities, correlation determinants and kernel identities.

Everything is built from the orthonormal polynomials p_0..p_n of
``orthopoly``.  Sums run in (mantissa, exponent) form, and the Gaussian
prefactors are applied as logarithms before converting to native floats.

The identity checks compare two exact expressions whose common factor
exp(n(-wz + t(w^2+z^2)/2)) is dropped.  Inside the droplet the left-hand
sums cancel to many digits, so when the double-precision condition
estimate is poor they are re-evaluated with mpmath at a working
precision chosen from that estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import mpmath
import numpy as np

from .errors import ConvergenceError, DomainError, InvalidArgument, KernelOverflowError
from .orthopoly import (
    CanonicalModel,
    GeneralPotential,
    PolarQuadrature,
    general_poly_table,
    p0_value,
    poly_table,
    polar_integrate,
    reduce_general,
)
from .scaledcx import (
    ScaledComplex,
    normalize_arrays,
    scaled_from_log,
    scaled_sum,
    scaled_to_native,
)

__all__ = [
    "KernelEval",
    "CorrelationMatrix",
    "IdentityResiduals",
    "evaluate_kernel",
    "pre_kernel",
    "normalized_kernel",
    "normalized_kernel_matrix",
    "density",
    "density_grid",
    "correlation",
    "identity_residual_sym",
    "identity_residual_wz",
    "identity_report",
    "cd_recursion_residual",
    "normalization_integral",
    "density_series_at_zero",
    "general_kernel_matrix",
    "general_density_grid",
    "MAX_CORRELATION_POINTS",
]

MAX_CORRELATION_POINTS = 64
# largest condition estimate for which the double-precision sums are trusted
_DOUBLE_KAPPA_MAX = 1e3


@dataclass(frozen=True)
class KernelEval:
    """A kernel value and the largest binary exponent met while summing."""

    value: complex
    max_exponent: int


def _check_point(z) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidArgument(f"non-finite point {z}")
    return z


def _tables(model: CanonicalModel, pts, m=None):
    m = model.n - 1 if m is None else m
    return poly_table(model.n, model.t, np.asarray(pts, dtype=complex), m)


def _half_log_weight(model: CanonicalModel, pts) -> np.ndarray:
    return -0.5 * model.n * model.potential(pts)


# ----------------------------------------------------------------------
# kernels

def evaluate_kernel(model: CanonicalModel, w, z, pre: bool = False) -> KernelEval:
    """K~_n(w, z)/n, or the pre-kernel H_n(w, z) when ``pre`` is set."""
    w, z = _check_point(w), _check_point(z)
    n, t = model.n, model.t
    mw, ew = _tables(model, [w])
    mz, ez = _tables(model, [z])
    if pre:
        terms = mw[:, 0] * mz[:, 0]
        logpref = n * (-w * z + 0.5 * t * (w * w + z * z)) - math.log(n)
    else:
        terms = np.conj(mw[:, 0]) * mz[:, 0]
        logpref = -0.5 * n * (model.potential(w) + model.potential(z)) - math.log(n)
    expo = ew[:, 0] + ez[:, 0]
    sm, se = scaled_sum(terms, expo)
    pm, pe = scaled_from_log(logpref)
    total = ScaledComplex.make(complex(sm * pm), int(se + pe))
    try:
        value = total.to_complex()
    except OverflowError as exc:
        raise KernelOverflowError(str(exc)) from None
    if not pre and w == z:
        value = complex(value.real, 0.0)
    return KernelEval(value, int(np.max(expo)))


def pre_kernel(model: CanonicalModel, w, z) -> complex:
    """H_n(w,z) = (1/n) exp(n(-wz + t w^2/2 + t z^2/2)) sum_{m<n} p_m(w) p_m(z)."""
    return evaluate_kernel(model, w, z, pre=True).value


def normalized_kernel(model: CanonicalModel, w, z) -> complex:
    """K~_n(w,z)/n = (1/n) exp(-n(V(w)+V(z))/2) sum_{m<n} conj(p_m(w)) p_m(z)."""
    return evaluate_kernel(model, w, z).value


def _weighted_kernel_scaled(n, mw, ew, lw, mz, ez, lz):
    """Scaled K~/n for all pairs: rows index w, columns index z."""
    terms = np.conj(mw)[:, :, None] * mz[:, None, :]
    expo = ew[:, :, None] + ez[:, None, :]
    sm, se = scaled_sum(terms, expo, axis=0)
    pm, pe = scaled_from_log(lw[:, None] + lz[None, :] - math.log(n))
    return normalize_arrays(sm * pm, se + pe)


def normalized_kernel_matrix(model: CanonicalModel, ws, zs) -> np.ndarray:
    """Matrix of K~_n(w_j, z_k)/n; entries too small for a double become 0."""
    ws = np.atleast_1d(np.asarray(ws, dtype=complex))
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    mw, ew = _tables(model, ws)
    mz, ez = _tables(model, zs)
    m, e = _weighted_kernel_scaled(model.n, mw, ew, _half_log_weight(model, ws),
                                   mz, ez, _half_log_weight(model, zs))
    out = scaled_to_native(m, e)
    if not np.all(np.isfinite(out)):
        raise KernelOverflowError("kernel value beyond native range")
    return out


def density_grid(model: CanonicalModel, zs) -> np.ndarray:
    """rho_n at every point of ``zs`` (any shape)."""
    zs = np.asarray(zs, dtype=complex)
    flat = zs.ravel()
    mant, expo = _tables(model, flat)
    terms = (mant * np.conj(mant)).real.astype(complex)
    sm, se = scaled_sum(terms, 2 * expo, axis=0)
    pm, pe = scaled_from_log(-model.n * model.potential(flat) - math.log(model.n))
    m, e = normalize_arrays(sm * pm, se + pe)
    return scaled_to_native(m, e).real.reshape(zs.shape)


def density(model: CanonicalModel, z) -> float:
    """rho_n(z) = K~_n(z,z)/n."""
    return float(density_grid(model, np.array([_check_point(z)]))[0])


def density_series_at_zero(model: CanonicalModel) -> float:
    """rho_n(0) from the even terms |p_{2l}(0)|^2 of the closed-form series."""
    n, t = model.n, model.t
    total = 0.0
    for l in range((n + 1) // 2):
        if 2 * l >= n:
            break
        if t == 0.0:
            if l == 0:
                total += 1.0
            continue
        log_binom = math.lgamma(2 * l + 1) - 2.0 * math.lgamma(l + 1)
        total += math.exp(log_binom + l * (2.0 * math.log(t) - math.log(4.0)))
    return math.sqrt(1.0 - t * t) / math.pi * total


# ----------------------------------------------------------------------
# correlation functions

@dataclass(frozen=True)
class CorrelationMatrix:
    """Entries K~_n(z_k, z_l)/n and the determinant R = det(K~_n(z_k, z_l)).

    ``det`` is the raw correlation function with the kernel itself as
    entries; ``det_rescaled`` = det / n^m is the determinant of ``entries``
    and is the quantity that converges as n grows.
    """

    points: tuple
    entries: np.ndarray
    n: int
    sign: float
    logdet_rescaled: float

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def logdet(self) -> float:
        return self.logdet_rescaled + self.size * math.log(self.n)

    @property
    def det_rescaled(self) -> float:
        return _signed_exp(self.sign, self.logdet_rescaled)

    @property
    def det(self) -> float:
        return _signed_exp(self.sign, self.logdet)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


def _signed_exp(sign, logabs: float) -> float:
    if sign == 0 or logabs == -math.inf:
        return 0.0
    if logabs > 709.0:
        return math.copysign(math.inf, sign)
    return float(sign) * math.exp(logabs)


def correlation(model: CanonicalModel, points: Sequence[complex]) -> CorrelationMatrix:
    """The m-point correlation matrix at ``points`` (1 <= m <= 64)."""
    pts = [_check_point(p) for p in points]
    m = len(pts)
    if not 1 <= m <= MAX_CORRELATION_POINTS:
        raise DomainError(f"need 1 <= m <= {MAX_CORRELATION_POINTS}, got {m}")
    arr = np.array(pts, dtype=complex)
    mant, expo = _tables(model, arr)
    lw = _half_log_weight(model, arr)
    km, ke = _weighted_kernel_scaled(model.n, mant, expo, lw, mant, expo, lw)
    # hermitian part only; the computed lower triangle mirrors the upper
    km = np.triu(km) + np.conj(np.triu(km, 1)).T
    ke = np.triu(ke) + np.triu(ke, 1).T
    diag_log = np.log(np.abs(np.diag(km)).astype(float)) + np.diag(ke) * math.log(2.0)
    if np.any(np.diag(km) == 0):
        entries = scaled_to_native(km, ke)
        return CorrelationMatrix(tuple(pts), entries, model.n, 0.0, -math.inf)
    # D M' D with D = sqrt(diagonal); M' has unit diagonal and moduli <= 1
    half = 0.5 * diag_log
    logscale = half[:, None] + half[None, :]
    sm, se = scaled_from_log(-logscale)
    normed = scaled_to_native(*normalize_arrays(km * sm, ke + se))
    np.fill_diagonal(normed, 1.0)
    # real eigenvalues keep the determinant of the Hermitian matrix real
    lam = np.linalg.eigvalsh(normed)
    entries = scaled_to_native(km, ke)
    if np.any(lam == 0):
        return CorrelationMatrix(tuple(pts), entries, model.n, 0.0, -math.inf)
    sign = float(np.prod(np.sign(lam)))
    logabs = float(np.sum(np.log(np.abs(lam))))
    return CorrelationMatrix(tuple(pts), entries, model.n, sign, logabs + float(np.sum(diag_log)))


# ----------------------------------------------------------------------
# identities

class IdentityResiduals(NamedTuple):
    plus: float
    minus: float
    dw: float
    dz: float
    kappa: float
    precision_bits: int


def _side_values(pw, pz, n, t, w, z, cm, sqrt=math.sqrt):
    """Left and right sides plus the summed term magnitudes of each identity.

    ``t`` and ``sqrt`` must come from the same arithmetic as the sequences,
    otherwise rounding in the coefficients swamps the cancellation.
    """
    s0 = sw = sz = 0
    m0 = mw = mz = 0
    for m in range(n):
        a = pw[m] * pz[m]
        s0 += a
        m0 += abs(a)
        if m:
            # product first, so w = z gives bitwise equal b and c
            b = cm[m] * (pw[m - 1] * pz[m])
            c = cm[m] * (pw[m] * pz[m - 1])
            sw += b
            sz += c
            mw += abs(b)
            mz += abs(c)
    u = pw[n] * pz[n - 1]
    v = pw[n - 1] * pz[n]
    mu, mv = abs(u), abs(v)
    sq = 1 - t * t
    cp = sqrt((1 - t) / (1 + t))
    cmi = sqrt((1 + t) / (1 - t))
    isq = 1 / sqrt(sq)
    apw, apz = abs(w), abs(z)
    out = {}
    out["plus"] = (-(1 - t) * (w + z) * s0 + (sw + sz) / n,
                   -cp * (u + v),
                   (1 - t) * (apw + apz) * m0 + (mw + mz) / n + cp * (mu + mv))
    out["minus"] = ((1 + t) * (w - z) * s0 + (sw - sz) / n,
                    cmi * (u - v),
                    (1 + t) * (apw + apz) * m0 + (mw + mz) / n + cmi * (mu + mv))
    out["dw"] = ((-z + t * w) * s0 + sw / n,
                 (t * u - v) * isq,
                 (apz + t * apw) * m0 + mw / n + (t * mu + mv) * isq)
    out["dz"] = ((-w + t * z) * s0 + sz / n,
                 (-u + t * v) * isq,
                 (apw + t * apz) * m0 + mz / n + (mu + t * mv) * isq)
    return out


def _residual(lhs, rhs) -> tuple[float, float]:
    """Relative residual against max(|L|, |R|), and the denominator."""
    den = max(abs(lhs), abs(rhs))
    if den == 0:
        return 0.0, 0.0
    return float(abs(lhs - rhs) / den), den


def _double_sequences(model: CanonicalModel, w, z):
    mw, ew = _tables(model, [w], model.n)
    mz, ez = _tables(model, [z], model.n)
    # common scale for each argument; identities are bilinear in (p(w), p(z))
    sw = int(np.max(ew))
    sz = int(np.max(ez))
    pw = scaled_to_native(mw[:, 0], ew[:, 0] - sw)
    pz = scaled_to_native(mz[:, 0], ez[:, 0] - sz)
    return [complex(x) for x in pw], [complex(x) for x in pz]


def _mp_sequence(n, t, x):
    tt = mpmath.mpf(t)
    denom = n * (1 - tt * tt)
    p = [mpmath.sqrt(n * mpmath.sqrt(1 - tt * tt) / mpmath.pi)]
    prev = mpmath.mpc(0)
    rk = mpmath.mpf(0)
    for k in range(n):
        rk1 = mpmath.sqrt(mpmath.mpf(k + 1) / denom)
        nxt = (x * p[k] - tt * rk * prev) / rk1
        prev = p[k]
        p.append(nxt)
        rk = rk1
    return p


def identity_report(model: CanonicalModel, w, z) -> IdentityResiduals:
    """Relative residuals of the four kernel identities at (w, z).

    plus/minus are the symmetric combinations (derivative in w plus or
    minus derivative in z); dw/dz are the separate ones.  ``kappa`` is the
    largest ratio of summed term magnitudes to the compared value, and
    ``precision_bits`` the working precision that was finally used.
    """
    w, z = _check_point(w), _check_point(z)
    n, t = model.n, model.t
    cm = [math.sqrt(n * m * (1.0 - t * t)) for m in range(n + 1)]
    pw, pz = _double_sequences(model, w, z)
    sides = _side_values(pw, pz, n, t, w, z, cm)
    kappa = 0.0
    res = {}
    for key, (lhs, rhs, mag) in sides.items():
        r, den = _residual(lhs, rhs)
        res[key] = r
        if mag > 0:
            kappa = max(kappa, math.inf if den == 0 else mag / den)
    if kappa <= _DOUBLE_KAPPA_MAX:
        return IdentityResiduals(res["plus"], res["minus"], res["dw"], res["dz"], kappa, 53)
    return _identity_report_mp(model, w, z, kappa)


def _identity_report_mp(model, w, z, kappa_guess) -> IdentityResiduals:
    n, t = model.n, model.t
    bits_needed = 64 + (math.log2(kappa_guess) if math.isfinite(kappa_guess) else 2.0 * n)
    prec = int(bits_needed)
    for _ in range(6):
        with mpmath.workprec(prec):
            wm, zm = mpmath.mpc(w), mpmath.mpc(z)
            cm = [mpmath.sqrt(n * m * (1 - mpmath.mpf(t) ** 2)) for m in range(n + 1)]
            tm = mpmath.mpf(t)
            sides = _side_values(_mp_sequence(n, t, wm), _mp_sequence(n, t, zm), n, tm, wm, zm, cm,
                                 mpmath.sqrt)
            kappa = 0.0
            res = {}
            exact = True
            for key, (lhs, rhs, mag) in sides.items():
                den = max(abs(lhs), abs(rhs))
                if den == 0:
                    res[key] = 0.0
                    continue
                res[key] = float(abs(lhs - rhs) / den)
                k = float(mpmath.log(mag / den, 2)) if mag > 0 else 0.0
                kappa = max(kappa, k)
                # results carry about prec - log2(kappa) correct bits
                if prec - k < 60:
                    exact = False
        if exact:
            return IdentityResiduals(res["plus"], res["minus"], res["dw"], res["dz"],
                                     2.0**kappa, prec)
        prec = int(kappa + 80)
    raise ConvergenceError("working precision for the identity check did not settle")


def identity_residual_sym(model: CanonicalModel, w, z) -> tuple[float, float]:
    """Residuals of the (d/dw + d/dz) and (d/dw - d/dz) identities for H_n."""
    r = identity_report(model, w, z)
    return r.plus, r.minus


def identity_residual_wz(model: CanonicalModel, w, z) -> tuple[float, float]:
    """Residuals of the separate d/dw and d/dz identities for H_n."""
    r = identity_report(model, w, z)
    return r.dw, r.dz


def _cd_parts(pw, pz, n, t, w, z, k, sign, cm, sqrt=math.sqrt):
    """(D_k, D_{k-1} + a_{k-1}, magnitude) for the telescoping step at level k."""
    if sign > 0:
        c = -sqrt((1 - t) / (1 + t))
    else:
        c = sqrt((1 + t) / (1 - t))

    def d(j):
        if j == 0:
            return 0 * pw[0], 0.0
        q = sqrt(j / (n + 0 * t))
        val = c * q * (pw[j] * pz[j - 1] + sign * pw[j - 1] * pz[j])
        mag = abs(c) * q * (abs(pw[j] * pz[j - 1]) + abs(pw[j - 1] * pz[j]))
        return val, mag

    m = k - 1
    dk, mk = d(k)
    dk1, mk1 = d(k - 1)
    prod = pw[m] * pz[m]
    if sign > 0:
        coef = -(1 - t) * (w + z)
        acoef = (1 - t) * (abs(w) + abs(z))
    else:
        coef = (1 + t) * (w - z)
        acoef = (1 + t) * (abs(w) + abs(z))
    a = coef * prod
    mag = acoef * abs(prod)
    if m:
        b1 = cm[m] * (pw[m - 1] * pz[m])
        b2 = cm[m] * (pw[m] * pz[m - 1])
        a += (b1 + sign * b2) / n
        mag += (abs(b1) + abs(b2)) / n
    return dk, dk1 + a, mk + mk1 + mag


def cd_recursion_residual(model: CanonicalModel, w, z, k: int, sign: int = 1) -> float:
    """Relative residual of one telescoping step D_k = D_{k-1} + a_{k-1}.

    D_k = -+ sqrt(k/n) sqrt((1-+t)/(1+-t)) (p_k(w) p_{k-1}(z) +- p_{k-1}(w) p_k(z))
    and a_m is the m-th summand of the left side of the plus (sign=+1) or
    minus (sign=-1) identity.  Summing the steps for k = 1..n gives the
    identity itself.
    """
    n, t = model.n, model.t
    if not 1 <= k <= n:
        raise DomainError("need 1 <= k <= n")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    w, z = _check_point(w), _check_point(z)
    cm = [math.sqrt(n * m * (1.0 - t * t)) for m in range(n + 1)]
    pw, pz = _double_sequences(model, w, z)
    lhs, rhs, mag = _cd_parts(pw, pz, n, t, w, z, k, sign, cm)
    r, den = _residual(lhs, rhs)
    if den == 0 or mag / den <= _DOUBLE_KAPPA_MAX:
        return r
    prec = 64 + int(math.log2(mag / den))
    for _ in range(6):
        with mpmath.workprec(prec):
            wm, zm = mpmath.mpc(w), mpmath.mpc(z)
            cmm = [mpmath.sqrt(n * m * (1 - mpmath.mpf(t) ** 2)) for m in range(n + 1)]
            lhs, rhs, mag = _cd_parts(_mp_sequence(n, t, wm), _mp_sequence(n, t, zm),
                                      n, mpmath.mpf(t), wm, zm, k, sign, cmm, mpmath.sqrt)
            den = max(abs(lhs), abs(rhs))
            if den == 0:
                return 0.0
            bits = float(mpmath.log(mag / den, 2))
            if prec - bits >= 60:
                return float(abs(lhs - rhs) / den)
        prec = int(bits + 80)
    raise ConvergenceError("working precision for the recursion check did not settle")


# ----------------------------------------------------------------------
# normalisation

def normalization_integral(model: CanonicalModel, quad: PolarQuadrature | None = None) -> float:
    """Quadrature value of the integral of K~_n(z,z) over the plane (should be n)."""
    if model.n > 16:
        raise DomainError("normalization_integral is an oracle for n <= 16")
    a = math.sqrt((1.0 + model.t) / (1.0 - model.t))
    radius = a + 9.0 / math.sqrt(model.n)
    quad = quad or PolarQuadrature(n_theta=64, n_r=64, tol=1e-9, max_levels=5)
    val = polar_integrate(lambda z: model.n * density_grid(model, z), radius, quad)
    return float(np.real(val))


# ----------------------------------------------------------------------
# general potentials

def general_kernel_matrix(pot: GeneralPotential, n: int, ws, zs) -> np.ndarray:
    """K~_n(w_j, z_k)/n for the weight exp(-n V) of a general quadratic potential.

    Evaluated directly in the original coordinates with the complex-t
    recurrence; it does not pass through the rotated canonical model.
    """
    ws = np.atleast_1d(np.asarray(ws, dtype=complex))
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    red = reduce_general(pot)
    mw, ew = general_poly_table(pot, n, ws, n - 1)
    mz, ez = general_poly_table(pot, n, zs, n - 1)
    # the polynomials are orthonormal for exp(-n(V + C/t0))
    shift = red.constant / pot.t0
    lw = -0.5 * n * (pot.potential(ws) + shift)
    lz = -0.5 * n * (pot.potential(zs) + shift)
    m, e = _weighted_kernel_scaled(n, mw, ew, lw, mz, ez, lz)
    return scaled_to_native(m, e)


def general_density_grid(pot: GeneralPotential, n: int, zs) -> np.ndarray:
    """rho_n at the points ``zs`` for a general quadratic potential."""
    zs = np.asarray(zs, dtype=complex)
    flat = zs.ravel()
    red = reduce_general(pot)
    mant, expo = general_poly_table(pot, n, flat, n - 1)
    terms = (mant * np.conj(mant)).real.astype(complex)
    sm, se = scaled_sum(terms, 2 * expo, axis=0)
    logw = -n * (pot.potential(flat) + red.constant / pot.t0) - math.log(n)
    pm, pe = scaled_from_log(logw)
    m, e = normalize_arrays(sm * pm, se + pe)
    return scaled_to_native(m, e).real.reshape(zs.shape)
