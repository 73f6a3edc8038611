"""Saddle-point approximations of F, level predictors and height bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import mpmath
from mpmath import mp

from .errors import CapExceeded, DomainError, NoConvergence
from .limitfns import periodic_p_raw
from .moments import (CLOSED_CAP, MU_CAP, internal_mean, internal_mean_exact,
                      mean_closed, variance_exact)
from .precision import GUARD_BITS, PrecisionContext, resolve
from .qseries import frac_to_mpf, q_finite

SADDLE_SECTOR = 0.3
MAX_NEWTON = 200


@dataclass(frozen=True)
class SaddleResult:
    rho: object
    log_rho: object
    residual: object
    iterations: int


def saddle_solve(z, ctx: PrecisionContext | None = None,
                 eps: float = SADDLE_SECTOR) -> SaddleResult:
    """Solve rho / log rho = 1/(z log 2) on the branch with |rho| >= e.

    Newton runs on L = log rho.  For real z the branch exists only for
    z <= 1/(e log 2); at that endpoint the root is double and rho = e.
    """
    ctx = resolve(ctx)
    with mp.workprec(ctx.bits + GUARD_BITS):
        z = mpmath.mpmathify(z)
        if z == 0 or abs(z) > 1:
            raise DomainError("saddle point needs 0 < |z| <= 1")
        if abs(mpmath.arg(z)) > eps:
            raise DomainError("z outside the sector |arg z| <= eps")
        c = 1 / (z * mpmath.ln2)
        real = mpmath.im(z) == 0
        if real:
            z = mpmath.re(z)
            c = mpmath.re(c)
            if abs(c - mpmath.e) <= ctx.series_tol:
                one = mpmath.mpf(1)
                return SaddleResult(mpmath.e, one, abs(mpmath.e - c), 0)
            if c < mpmath.e:
                raise DomainError("no real saddle point for z > 1/(e log 2)")
        logc = mpmath.log(c)
        X = c
        L = mpmath.log(X * (mpmath.log(X) + mpmath.log(mpmath.log(X))))
        if real and L <= 1:
            L = mpmath.mpf(2)
        for it in range(1, MAX_NEWTON + 1):
            g = L - mpmath.log(L) - logc
            L_new = L - g / (1 - 1 / L)
            if real and L_new <= 1:
                L_new = (L + 1) / 2
            step = abs(L_new - L)
            L = L_new
            if step <= abs(L) * mpmath.ldexp(1, -(ctx.bits + GUARD_BITS) + 4):
                break
        rho = mpmath.exp(L)
        residual = abs(rho / L - c)
        if residual > ctx.series_tol:
            raise NoConvergence(f"saddle residual {mpmath.nstr(residual, 5)}")
        return SaddleResult(rho, L, residual, it)


def _saddle_value(res: SaddleResult, m: int, prec: int):
    L = res.log_rho
    ln2 = mpmath.ln2
    per, _ = periodic_p_raw(L / ln2, prec)
    expo = (m + mpmath.mpf(1) / 2 + 1 / ln2) * L - L ** 2 / (2 * ln2) - per
    return mpmath.exp(expo) / mpmath.sqrt(2 * mpmath.pi * L / ln2)


def F_saddle(z, m: int = 0, ctx: PrecisionContext | None = None):
    """Saddle-point approximation of F^(m)(z), relative error O(1/log rho)."""
    ctx = resolve(ctx)
    if m < 0:
        raise DomainError("derivative order must be >= 0")
    res = saddle_solve(z, ctx)
    prec = ctx.bits + GUARD_BITS
    with mp.workprec(prec):
        return _saddle_value(res, m, prec)


def F_small_explicit(x, ctx: PrecisionContext | None = None):
    """Explicit small-x form of F in X = 1/(x log 2)."""
    ctx = resolve(ctx)
    prec = ctx.bits + GUARD_BITS
    with mp.workprec(prec):
        x = mpmath.mpmathify(x)
        if isinstance(x, mpmath.mpc) or x <= 0:
            raise DomainError("explicit form needs real x > 0")
        ln2 = mpmath.ln2
        X = 1 / (x * ln2)
        if X <= 1:
            raise DomainError("explicit form needs x < 1/log 2")
        w = mpmath.log(X * mpmath.log(X))
        per, _ = periodic_p_raw(w / ln2, prec)
        return (mpmath.sqrt(ln2 / (2 * mpmath.pi)) * X ** (mpmath.mpf(1) / 2 + 1 / ln2)
                * mpmath.exp(-w ** 2 / (2 * ln2) - per))


def mean_elementary(n: int, k: int, ctx: PrecisionContext | None = None):
    """(2^k / Q_k) (1 - 2^-k)^n, the dominant term of the mean."""
    if n < 0 or k < 0:
        raise DomainError("need n >= 0 and k >= 0")
    ctx = resolve(ctx)
    with mp.workprec(ctx.bits + GUARD_BITS):
        if k == 0:
            return mpmath.mpf(1 if n == 0 else 0)
        base = mpmath.exp(n * mpmath.log1p(-mpmath.ldexp(1, -k)))
        return mpmath.ldexp(base, k) / frac_to_mpf(q_finite(k))


# ---------------------------------------------------------------------------
# level predictors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelPredictions:
    n: int
    k_s: float
    k_h: float
    k_H: int
    theta: float
    k_S: int


def central_range(n: int) -> Tuple[float, float]:
    """(k_s, k_h): levels where mean and variance of B_{n,k} grow."""
    if n < 3:
        raise DomainError("central range needs n >= 3")
    with mp.workprec(128):
        ln = mpmath.log(n)
        l2 = mpmath.log(n, 2)
        lln = mpmath.log(ln)
        ks = l2 - mpmath.log(ln, 2) + 1 + mpmath.log(ln, 2) / ln
        kh = (l2 + mpmath.sqrt(2 * l2) - mpmath.log(l2, 2) / 2 + 1 / mpmath.ln2
              - 3 * lln / (4 * mpmath.sqrt(2 * ln * mpmath.ln2)))
        return float(ks), float(kh)


def _height_expr(n: int):
    l2 = mpmath.log(n, 2)
    return l2 + mpmath.sqrt(2 * l2) - mpmath.log(l2, 2) / 2 + 1 / mpmath.ln2


def predict_height_level(n: int) -> Tuple[int, float]:
    """(k_H, theta): floor and fractional part of the height predictor."""
    if n < 2:
        raise DomainError("height predictor needs n >= 2")
    with mp.workprec(128):
        e = _height_expr(n)
        k = int(mpmath.floor(e))
        return k, float(e - k)


def predict_saturation_level(n: int) -> int:
    """k_S = ceil(log2 n - log2 log n)."""
    if n < 2:
        raise DomainError("saturation predictor needs n >= 2")
    with mp.workprec(128):
        return int(mpmath.ceil(mpmath.log(n, 2) - mpmath.log(mpmath.log(n), 2)))


def level_predictions(n: int) -> LevelPredictions:
    ks, kh = central_range(n) if n >= 3 else (math.nan, math.nan)
    kH, theta = predict_height_level(n)
    return LevelPredictions(n, ks, kh, kH, theta, predict_saturation_level(n))


# ---------------------------------------------------------------------------
# height bounds
# ---------------------------------------------------------------------------

def height_probability_bounds(n: int, k: int, ctx: PrecisionContext | None = None):
    """(lower, upper) for P(H_n <= k) by the first and second moment methods.

    lower = 1 - E I_{n,k}; upper = Var B_{n,k+1} / (E B_{n,k+1})^2.
    Exact rationals are used for n up to the mean-table cap.
    """
    if n < 0 or k < 0:
        raise DomainError("need n >= 0 and k >= 0")
    if n > CLOSED_CAP:
        raise CapExceeded(f"exact moments are capped at n = {CLOSED_CAP}")
    ctx = resolve(ctx)
    if n <= MU_CAP:
        iota = internal_mean_exact(n, k)
        lower = max(Fraction(0), 1 - iota)
        mu = mean_closed(n, k + 1, exact=True)
        if mu > 0:
            var = variance_exact(n, k + 1, exact=True)
            upper = min(Fraction(1), var / (mu * mu))
        else:
            upper = Fraction(1)
        with mp.workprec(ctx.bits):
            return frac_to_mpf(lower), frac_to_mpf(upper)
    iota = internal_mean(n, k, ctx)
    lower = max(mpmath.mpf(0), 1 - iota)
    mu = mean_closed(n, k + 1, ctx)
    upper = mpmath.mpf(1)
    if mu > 0:
        upper = min(upper, variance_exact(n, k + 1, ctx) / mu ** 2)
    return lower, upper
