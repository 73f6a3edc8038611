"""Dyadic q-products Q_n, Q(z), Q_inf and the logarithm of Q(-2s)."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import List

import mpmath
from mpmath import mp

from .errors import DomainError
from .precision import PrecisionContext, adaptive, resolve

_Q: List[Fraction] = [Fraction(1)]


def q_finite(n: int) -> Fraction:
    """Q_n = prod_{1<=l<=n} (1 - 2^-l) as an exact rational."""
    if n < 0:
        raise DomainError("Q_n needs n >= 0")
    while len(_Q) <= n:
        l = len(_Q)
        _Q.append(_Q[-1] * (1 - Fraction(1, 1 << l)))
    return _Q[n]


def frac_to_mpf(q: Fraction):
    """Round an exact rational to the current mp precision."""
    return mpmath.mpf(q.numerator) / q.denominator


def binom2(j: int) -> int:
    return j * (j - 1) // 2


@lru_cache(maxsize=None)
def _inv_q(prec: int, size: int):
    with mp.workprec(prec):
        return tuple(1 / frac_to_mpf(q_finite(i)) for i in range(size))


def inv_q_table(prec: int, n: int):
    """1/Q_0, ..., 1/Q_m (m >= n) rounded to ``prec`` bits."""
    size = 64
    while size < n + 1:
        size *= 2
    return _inv_q(prec, size)


@lru_cache(maxsize=None)
def _q_inf_at(prec: int):
    with mp.workprec(prec + 16):
        p = mpmath.mpf(1)
        for l in range(1, prec + 20):
            p *= 1 - mpmath.ldexp(1, -l)
    return p


def q_infinity(prec: int | None = None):
    """Q(1) to ``prec`` bits (current mp precision by default)."""
    return _q_inf_at(mp.prec if prec is None else prec)


def _product_terms(z, prec: int, tol_bits: int):
    """Truncation index L with 2^-L |z| below 2^-tol_bits / 4."""
    az = abs(z)
    L = 1
    if az > 0:
        L = max(1, int(mpmath.ceil(mpmath.log(az, 2))) + tol_bits + 3)
    return L


def q_product(z, ctx: PrecisionContext | None = None):
    """Q(z) = prod_{l>=1} (1 - 2^-l z) for complex ``z``.

    Truncated where 2^-L |z| < series_tol / 4, which keeps the relative
    truncation error below series_tol.
    """
    ctx = resolve(ctx)

    def run(prec):
        z_ = mpmath.mpmathify(z)
        L = _product_terms(z_, prec, ctx.tol_bits(prec))
        p = mpmath.mpf(1)
        mag = mpmath.mpf(1)
        for l in range(1, L + 1):
            w = z_ * mpmath.ldexp(1, -l)
            f = 1 - w
            if f == 0:
                return mpmath.mpf(0), mpmath.mpf(0)
            p *= f
            mag *= 1 + abs(w)
        return p, mag

    return adaptive(run, ctx)[0]


def q_log_direct(s, ctx: PrecisionContext | None = None):
    """log Q(-2s) as the sum of principal logs of (1 + 2^-j s), j >= 0."""
    ctx = resolve(ctx)
    if mpmath.im(s) == 0 and mpmath.re(s) <= -1:
        raise DomainError("Q(-2s) vanishes or log is cut for s <= -1")

    def run(prec):
        s_ = mpmath.mpmathify(s)
        L = _product_terms(s_, prec, ctx.tol_bits(prec))
        acc = 0
        mag = mpmath.mpf(0)
        for j in range(0, L + 1):
            t = mpmath.log(1 + s_ * mpmath.ldexp(1, -j))
            acc += t
            mag = max(mag, abs(t))
        return acc, mag

    return adaptive(run, ctx)[0]


def q_log_asymptotic(s, ctx: PrecisionContext | None = None, eps: float | None = None):
    """log Q(-2s) through the modular-type identity.

    (log s)^2/(2 log 2) + (log s)/2 + P(log2 s) - log Q(-1/s), principal
    branches, valid off the cut (-inf, 0].  ``eps`` keeps |arg s| <= pi - eps.
    """
    from .limitfns import periodic_p_raw

    ctx = resolve(ctx)
    eps = ctx.sector_eps if eps is None else eps
    s_ = mpmath.mpmathify(s)
    if s_ == 0:
        raise DomainError("s = 0 is a branch point")
    if abs(mpmath.arg(s_)) > mpmath.pi - eps:
        raise DomainError("s too close to the cut (-inf, 0]")

    def run(prec):
        s1 = mpmath.mpmathify(s)
        ls = mpmath.log(s1)
        ln2 = mpmath.ln2
        main = ls ** 2 / (2 * ln2) + ls / 2
        per, pmag = periodic_p_raw(ls / ln2, prec)
        inv = 1 / s1
        L = _product_terms(inv, prec, ctx.tol_bits(prec))
        tail = 0
        for l in range(1, L + 1):
            tail += mpmath.log(1 + inv * mpmath.ldexp(1, -l))
        mag = max(abs(main), pmag, abs(tail), mpmath.mpf(1))
        return main + per - tail, mag

    return adaptive(run, ctx)[0]


@dataclass
class QTable:
    """Exact Q_0..Q_n_max together with Q_inf at a given precision."""
    n_max: int
    prec: int = 128
    q: List[Fraction] = field(init=False)
    q_inf: object = field(init=False)

    def __post_init__(self):
        q_finite(self.n_max)
        self.q = _Q[: self.n_max + 1]
        self.q_inf = q_infinity(self.prec)

    def tail_bound(self, n: int) -> Fraction:
        """Relative bound on Q_n - Q_inf: 0 <= 1 - Q_inf/Q_n <= 2^-n."""
        return Fraction(1, 1 << n)
