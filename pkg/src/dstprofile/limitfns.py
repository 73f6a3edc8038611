"""Limit functions F, F_I, G, G_I, the kernel phi and the periodic P.

All evaluators return a :class:`LimitFnValue` whose ``tail_bound`` is a
rigorous bound on the neglected part of the series; rounding is controlled
separately by the adaptive precision loop in :mod:`dstprofile.precision`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Tuple

import gmpy2
import mpmath
from mpmath import mp

from .errors import DomainError
from .precision import PrecisionContext, adaptive, resolve
from .qseries import binom2, inv_q_table, q_finite, q_infinity

LN2 = math.log(2.0)


@dataclass(frozen=True)
class LimitFnValue:
    value: object
    tail_bound: float
    terms_used: int
    prec: int = 0

    def __float__(self):
        return float(mpmath.re(self.value))


def _target_bits(ctx: PrecisionContext, prec: int, x) -> float:
    """log2 of the absolute truncation budget; scaled by e^-x for large x."""
    return -ctx.tol_bits(prec) - max(0.0, float(x)) / LN2


@lru_cache(maxsize=None)
def _log2_q(n: int) -> float:
    return math.log2(float(q_finite(n))) if n < 1100 else math.log2(0.2887880950866024)


LOG2_QINF = math.log2(0.28878809508660242)


# ---------------------------------------------------------------------------
# P
# ---------------------------------------------------------------------------

def periodic_p_raw(t, prec: int):
    """Series for P at ``t`` (real or complex) under the current precision.

    Returns ``(value, magnitude)``; the real part of ``t`` is reduced mod 1
    first, so P(t + 1) and P(t) are computed from identical arguments.
    """
    t = mpmath.mpmathify(t)
    if isinstance(t, mpmath.mpc):
        t = mpmath.mpc(mpmath.frac(t.real), t.imag)
    else:
        t = mpmath.frac(t)
    b = abs(float(mpmath.im(t)))
    rate = 2 * math.pi ** 2 / LN2 - 2 * math.pi * b
    if rate <= 0:
        raise DomainError("P series diverges for |Im t| >= pi/log 2")
    ln2 = mpmath.ln2
    c = 2 * mpmath.pi ** 2 / ln2
    val = ln2 / 12 + mpmath.pi ** 2 / (6 * ln2)
    # terms decay like exp(-rate*j); stop once the geometric tail is negligible
    need = prec + 8
    j = 1
    while True:
        val -= mpmath.cos(2 * j * mpmath.pi * t) / (j * mpmath.sinh(j * c))
        tail_log2 = -rate * (j + 1) / LN2 + 1.01 - math.log2(1 - math.exp(-rate))
        if tail_log2 < -need:
            break
        j += 1
    return val, mpmath.mpf(4)


def P_eval(t, ctx: PrecisionContext | None = None) -> LimitFnValue:
    """The 1-periodic function P in the asymptotics of Q(-2s)."""
    ctx = resolve(ctx)
    if isinstance(mpmath.mpmathify(t), mpmath.mpc):
        raise DomainError("P_eval takes real t")
    value, prec = adaptive(lambda p: periodic_p_raw(t, p), ctx)
    rate = 2 * math.pi ** 2 / LN2
    terms = max(1, int((prec + 8) * LN2 / rate) + 1)
    return LimitFnValue(value, 2.0 ** -(prec + 8), terms, prec)


# ---------------------------------------------------------------------------
# F and F_I
# ---------------------------------------------------------------------------

def _exp_neg(z, j: int):
    return mpmath.exp(-z * mpmath.ldexp(1, j))


def _f_like(z, m: int, shift: int, prec: int, ctx: PrecisionContext):
    """Sum_j (-1)^j 2^-C(j+shift,2) (-2^j)^m e^{-2^j z} / (Q_j Q_inf).

    ``shift`` = 0 gives F^(m); ``shift`` = 1 gives the series inside F_I.
    Returns (value, magnitude, tail_bound, terms).
    """
    x = float(mpmath.re(z))
    target = _target_bits(ctx, prec, x) - 2
    qi = q_infinity(prec)
    acc = mpmath.mpf(0)
    mag = mpmath.mpf(0)
    j = 0
    while True:
        # bound on the rest, j' > j: first term times 2 once ratios are <= 1/2
        jn = j + 1
        lb = (-binom2(jn + shift) + jn * m - 2 * LOG2_QINF
              - (2.0 ** jn) * x / LN2 + 1)
        inv = inv_q_table(prec, j)
        c = mpmath.ldexp(inv[j], -binom2(j + shift)) / qi
        if m:
            c *= mpmath.ldexp(1, j * m)
        if (j + m) % 2:
            c = -c
        term = c * _exp_neg(z, j)
        acc += term
        mag = max(mag, abs(term))
        if jn >= m + 2 and lb < target:
            return acc, mag, 2.0 ** lb, jn
        j += 1


def F_eval(z, m: int = 0, ctx: PrecisionContext | None = None) -> LimitFnValue:
    """m-th derivative of the density F at complex z with Re z >= 0."""
    ctx = resolve(ctx)
    if m < 0:
        raise DomainError("derivative order must be >= 0")
    z = mpmath.mpmathify(z)
    if mpmath.re(z) < 0:
        raise DomainError("F needs Re z >= 0")
    if z == 0:
        return LimitFnValue(mpmath.mpf(0), 0.0, 0, ctx.bits)
    info = {}

    def run(prec):
        v, mag, tb, n = _f_like(z, m, 0, prec, ctx)
        info.update(tb=tb, n=n)
        return v, mag

    value, prec = adaptive(run, ctx)
    return LimitFnValue(value, info["tb"], info["n"], prec)


def FI_eval(x, ctx: PrecisionContext | None = None) -> LimitFnValue:
    """Distribution function F_I(x) = int_0^x F."""
    ctx = resolve(ctx)
    x = mpmath.mpmathify(x)
    if isinstance(x, mpmath.mpc) or x < 0:
        raise DomainError("F_I needs real x >= 0")
    if x == 0:
        return LimitFnValue(mpmath.mpf(0), 0.0, 0, ctx.bits)
    info = {}

    def run(prec):
        v, mag, tb, n = _f_like(x, 0, 1, prec, ctx)
        info.update(tb=tb, n=n)
        return 1 - v, max(mag, mpmath.mpf(1))

    value, prec = adaptive(run, ctx)
    return LimitFnValue(value, info["tb"], info["n"], prec)


# ---------------------------------------------------------------------------
# phi and G
# ---------------------------------------------------------------------------

def _phi(u, v, x):
    if u == v:
        return x * x * mpmath.exp(-u * x) / 2, abs(x * x) / 2
    d = u - v
    a = mpmath.exp(-u * x)
    b = (d * x - 1) * mpmath.exp(-v * x)
    return (a + b) / (d * d), max(abs(a), abs(b)) / (d * d)


def phi_eval(u, v, x, ctx: PrecisionContext | None = None):
    """phi(u, v; x), the convolution of e^{-ut} with t e^{-vt} at x."""
    ctx = resolve(ctx)
    if u <= 0 or v <= 0 or x < 0:
        raise DomainError("phi needs u, v > 0 and x >= 0")

    def run(prec):
        return _phi(mpmath.mpf(u), mpmath.mpf(v), mpmath.mpf(x))

    return adaptive(run, ctx)[0]


def _gmp_ctx(prec: int):
    return gmpy2.context(gmpy2.get_context(), precision=prec)


def _to_mpf(v):
    man, exp = v.as_mantissa_exp()
    return mpmath.mpf((int(man), int(exp)))


def _from_mpf(v):
    sign, man, exp, _ = v._mpf_
    r = gmpy2.mul_2exp(gmpy2.mpfr(man), exp)
    return -r if sign else r


def _lg(v) -> float:
    """Upper bound on log2 |v| for a gmpy2 mpfr."""
    if not v:
        return -math.inf
    return float(gmpy2.get_exp(v))


class _GConstants:
    """Per-precision data for G: a_r, 1/Q_h and cached x-free sums over r.

    Arithmetic in the inner loops runs on gmpy2 mpfr, which is much
    cheaper per operation than mpmath at these precisions.
    """

    def __init__(self, prec: int):
        self.prec = prec
        with _gmp_ctx(prec):
            self.qinf = gmpy2.mpfr(1)
            for l in range(1, prec + 20):
                self.qinf *= 1 - gmpy2.mpfr(2) ** -l
            self.inv_q: List = []
            self.a: List = []
            r = 0
            while True:
                ar = gmpy2.mpfr(2) ** -binom2(r) * self.invq(r)
                self.a.append(-ar if r % 2 else ar)
                if -binom2(r) - LOG2_QINF < -prec - 64:
                    break
                r += 1
        self.sums: Dict[Tuple[int, int], Tuple] = {}

    def invq(self, n: int):
        while len(self.inv_q) <= n:
            q = q_finite(len(self.inv_q))
            self.inv_q.append(gmpy2.mpfr(q.denominator) / q.numerator)
        return self.inv_q[n]

    def s12(self, j: int, v: int):
        key = (j, v)
        hit = self.sums.get(key)
        if hit is None:
            s1 = gmpy2.mpfr(0)
            s2 = gmpy2.mpfr(0)
            for r, ar in enumerate(self.a):
                d = (1 << (r + j)) - v
                if d == 0:
                    continue
                s1 += ar / d
                s2 += ar / (d * d)
            hit = self.sums[key] = (s1, s2)
        return hit


@lru_cache(maxsize=8)
def _gconst(prec: int) -> _GConstants:
    return _GConstants(prec)


@lru_cache(maxsize=None)
def _abs_a_sums() -> Tuple[float, float]:
    a = sum(2.0 ** -binom2(r) / float(q_finite(r)) for r in range(40))
    a1 = sum(2.0 ** (-binom2(r) - r) / float(q_finite(r)) for r in range(40))
    return a, a1


def _log2_beta(h: int, e2: int) -> float:
    """log2 of an upper bound on |b_h^{(j)}| valid for every j."""
    return -binom2(h) + e2 * h - _log2_q(min(h, 1000)) - LOG2_QINF


def _lse2(xs):
    m = max(xs)
    if m == -math.inf:
        return m
    return m + math.log2(sum(2.0 ** (t - m) for t in xs))


def _bstar_log2(x: float, m: int, e2: int) -> float:
    """log2 of sup_{t<=x} |f_j(t)| via the order-m Taylor remainder."""
    terms = []
    h = 0
    while True:
        t = _log2_beta(h, e2) + h * m
        terms.append(t)
        if h > m + 2 * e2 + 4 and t < max(terms) - 80:
            break
        h += 1
    lx = math.log2(x)
    return m * lx - math.lgamma(m + 1) / LN2 + _lse2(terms)


def _g_series(x, e2: int, prec: int, ctx: PrecisionContext):
    """Truncated G (e2 = 2) or G_I (e2 = 1) series with its tail bound."""
    xf = float(x)
    K = _gconst(prec)
    a = K.a
    target = _target_bits(ctx, prec, xf)
    A, A1 = _abs_a_sums()
    lx = math.log2(xf)

    # j range: Taylor tail bound, minimised over m <= J-1, plus the
    # uncancelled u = v term left at the truncation point
    gm: List[float] = []
    J = 2
    while True:
        while len(gm) < J:
            gm.append(lx + 2 * _bstar_log2(xf, len(gm), e2) - math.log2(3))
        tail = min(gm[:J]) - 2 * J
        bnd = (-J + 1 + 2 * _log2_beta(J, e2) + 2 * lx - 1
               - (2.0 ** (J + 1)) * xf / LN2 - LOG2_QINF)
        if _lse2([tail, bnd]) < target - 2:
            break
        J += 1
    bound_terms = [tail, bnd]

    pair_budget = target - 2 - math.log2(J + 1)
    lbeta = [_log2_beta(h, e2) for h in range(J + 1)]
    lbcum = [_lse2(lbeta[: h + 1]) for h in range(J + 1)]
    lA, lA1 = math.log2(A), math.log2(A1)
    drop_thr = target - 40

    with _gmp_ctx(prec):
        xg = _from_mpf(mpmath.mpf(x))
        E = [gmpy2.exp(-xg * (1 << i)) for i in range(J + len(a) + 3)]
        acc = gmpy2.mpfr(0)
        mag = gmpy2.mpfr(0)
        terms = 0
        for j in range(J + 1):
            # bound on all pairs with max(h, l) >= M, accumulated from the top
            pb = []
            for M in range(j + 1):
                c = min(lA + 2 * lx - 1 - (2.0 ** M) * xf / LN2, lA1 + lx - j)
                pb.append(-j - LOG2_QINF + 1 + lbeta[M] + lbcum[M] + c)
            H = j
            rest = -math.inf
            for M in range(j, -1, -1):
                cand = _lse2([rest, pb[M]])
                if cand >= pair_budget:
                    break
                rest = cand
                H = M - 1
            if H < j:
                bound_terms.append(rest)
            if H < 0:
                continue
            b = []
            for h in range(H + 1):
                bh = gmpy2.mul_2exp(K.invq(h) * K.invq(j - h), -binom2(h) + e2 * h)
                b.append(-bh if h % 2 else bh)
            scale = gmpy2.mul_2exp(1 / K.qinf, -j)
            rt = []
            for r, ar in enumerate(a):
                eu = E[r + j]
                rt.append((ar * eu, 1 << (r + j), _lg(ar) + _lg(eu), r >= 2 and eu < 0.25))
            drop_j = -math.inf
            for h in range(H + 1):
                for l in range(h, H + 1):
                    v = (1 << h) + (1 << l)
                    w = b[h] * b[l] * scale
                    if h != l:
                        w *= 2
                    lw = _lg(w)
                    ev = E[h] * E[l]
                    s1, s2 = K.s12(j, v)
                    p1 = ev * xg * s1
                    p2 = ev * s2
                    inner = p1 - p2
                    m_in = max(abs(p1), abs(p2))
                    cut = False
                    for aeu, u, lae, decaying in rt:
                        if decaying and lae + lw < drop_thr:
                            drop_j = max(drop_j, lae + lw + 1)
                            cut = True
                            break
                        if u != v:
                            d = u - v
                            t = aeu / (d * d)
                            inner += t
                            m_in = max(m_in, abs(t))
                        terms += 1
                    if not cut:
                        # ran off the a_r table, whose remainder is negligible
                        drop_j = max(drop_j, lw - prec - 60)
                    acc += w * inner
                    mag = max(mag, abs(w) * m_in)
                    terms += 1
            if drop_j > -math.inf:
                # at most (j+1)^2 pairs share this bound
                bound_terms.append(drop_j + 2 * math.log2(j + 1))
    return _to_mpf(acc), _to_mpf(mag), 2.0 ** _lse2(bound_terms), terms


def _g_entry(x, e2: int, ctx: PrecisionContext | None) -> LimitFnValue:
    ctx = resolve(ctx)
    x = mpmath.mpmathify(x)
    if isinstance(x, mpmath.mpc) or x < 0:
        raise DomainError("G needs real x >= 0")
    if x == 0:
        return LimitFnValue(mpmath.mpf(0), 0.0, 0, ctx.bits)
    info = {}

    def run(prec):
        v, mag, tb, n = _g_series(x, e2, prec, ctx)
        info.update(tb=tb, n=n)
        return v, mag

    value, prec = adaptive(run, ctx)
    return LimitFnValue(value, info["tb"], info["n"], prec)


def G_eval(x, ctx: PrecisionContext | None = None) -> LimitFnValue:
    """Limit function of the variance of the external profile."""
    return _g_entry(x, 2, ctx)


def GI_eval(x, ctx: PrecisionContext | None = None) -> LimitFnValue:
    """Limit function of the variance of the internal profile."""
    return _g_entry(x, 1, ctx)
