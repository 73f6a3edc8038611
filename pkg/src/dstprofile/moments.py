"""Exact moments of the external and internal level profiles.

Two independent routes are provided: the triangular recurrences, run in
exact dyadic arithmetic, and the closed forms, which work for any n in
exact-rational or multiprecision mode.  The Poissonized mean and variance
and the Poisson-Charlier de-Poissonization live here as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable, List, Optional, Sequence

import mpmath

from .errors import CapExceeded, DomainError
from .limitfns import _phi
from .precision import PrecisionContext, adaptive, resolve
from .qseries import binom2, inv_q_table, q_finite

MU_CAP = 200
NU_CAP = 64
CLOSED_CAP = 1 << 20

EXTERNAL = "external"
INTERNAL = "internal"


# ---------------------------------------------------------------------------
# recurrences
# ---------------------------------------------------------------------------

@dataclass
class MomentTable:
    kind: str
    n_max: int
    mu: List[List[Fraction]]
    nu: Optional[List[List[Fraction]]] = None
    var: Optional[List[List[Fraction]]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.nu is not None and self.var is None:
            self.var = [[b - a * a for a, b in zip(ra, rb)]
                        for ra, rb in zip(self.mu, self.nu)]


class _Dyadic:
    """Rows of numerators over a per-row power-of-two denominator."""

    def __init__(self):
        self.num: List[List[int]] = []
        self.den: List[int] = []

    def get(self, n: int, k: int) -> Fraction:
        row = self.num[n]
        if k >= len(row):
            return Fraction(0)
        return Fraction(row[k], 1 << self.den[n])


class _Builder:
    """Incrementally grown exact tables for one kind of profile."""

    def __init__(self, kind: str):
        self.kind = kind
        self.mu = _Dyadic()
        self.nu = _Dyadic()

    def _row0(self, n: int, second: bool) -> int:
        if self.kind == EXTERNAL:
            return 1 if n == 0 else 0
        return 0 if n == 0 else 1

    def grow_mu(self, n_max: int):
        mu = self.mu
        while len(mu.num) <= n_max:
            n = len(mu.num)
            width = n + 2
            if n == 0:
                mu.num.append([self._row0(0, False)] + [0] * (width - 1))
                mu.den.append(0)
                continue
            D = max(mu.den[:n])
            binoms = [comb(n - 1, j) for j in range(n)]
            shifts = [D - mu.den[j] for j in range(n)]
            row = [0] * width
            for k in range(1, width):
                s = 0
                for j in range(n):
                    r = mu.num[j]
                    if k - 1 < len(r) and r[k - 1]:
                        s += binoms[j] * (r[k - 1] << shifts[j])
                row[k] = s
            e = D + n - 2            # value = row * 2^-e
            if e < 0:
                row = [t << -e for t in row]
                e = 0
            row[0] = self._row0(n, False) << e
            mu.num.append(row)
            mu.den.append(e)

    def grow_nu(self, n_max: int):
        self.grow_mu(n_max)
        mu, nu = self.mu, self.nu
        while len(nu.num) <= n_max:
            n = len(nu.num)
            width = n + 2
            if n == 0:
                nu.num.append([self._row0(0, True)] + [0] * (width - 1))
                nu.den.append(0)
                continue
            Dn = max(nu.den[:n])
            Dm = max(mu.den[:n])
            D = max(Dn, 2 * Dm)
            binoms = [comb(n - 1, j) for j in range(n)]
            row = [0] * width
            for k in range(1, width):
                s = 0
                for j in range(n):
                    c = binoms[j]
                    r = nu.num[j]
                    if k - 1 < len(r) and r[k - 1]:
                        s += c * (r[k - 1] << (D - nu.den[j]))
                    a = mu.num[j]
                    b = mu.num[n - 1 - j]
                    if k - 1 < len(a) and k - 1 < len(b) and a[k - 1] and b[k - 1]:
                        sh = D - mu.den[j] - mu.den[n - 1 - j]
                        s += c * ((a[k - 1] * b[k - 1]) << sh)
                row[k] = s
            e = D + n - 2
            if e < 0:
                row = [t << -e for t in row]
                e = 0
            row[0] = self._row0(n, True) << e
            nu.num.append(row)
            nu.den.append(e)


_BUILDERS = {EXTERNAL: _Builder(EXTERNAL), INTERNAL: _Builder(INTERNAL)}


def _check_kind(kind: str):
    if kind not in _BUILDERS:
        raise DomainError(f"unknown profile kind {kind!r}")


def mean_table_entry(kind: str, n: int, k: int) -> Fraction:
    """One entry of the exact mean table (n <= MU_CAP)."""
    _check_kind(kind)
    if n > MU_CAP:
        raise CapExceeded(f"exact mean tables stop at n = {MU_CAP}")
    b = _BUILDERS[kind]
    b.grow_mu(n)
    return b.mu.get(n, k)


def second_table_entry(kind: str, n: int, k: int) -> Fraction:
    _check_kind(kind)
    if n > NU_CAP:
        raise CapExceeded(f"exact second-moment tables stop at n = {NU_CAP}")
    b = _BUILDERS[kind]
    b.grow_nu(n)
    return b.nu.get(n, k)


def recurrence_tables(kind: str, n_max: int, second: bool = True) -> MomentTable:
    """Exact mean (and second-moment) tables for n <= n_max, k <= n + 1."""
    _check_kind(kind)
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    if n_max > MU_CAP or (second and n_max > NU_CAP):
        raise CapExceeded("requested table exceeds the exact-rational cap")
    b = _BUILDERS[kind]
    (b.grow_nu if second else b.grow_mu)(n_max)
    width = n_max + 2
    mu = [[b.mu.get(n, k) for k in range(width)] for n in range(n_max + 1)]
    nu = None
    if second:
        nu = [[b.nu.get(n, k) for k in range(width)] for n in range(n_max + 1)]
    return MomentTable(kind, n_max, mu, nu)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _check_nk(n: int, k: int):
    if n < 0 or k < 0:
        raise DomainError("need n >= 0 and k >= 0")


def _pow1m(e: int, k: int, n: int):
    """(1 - 2^(e-k))^n in the current precision, e <= k."""
    if e == k:
        return mpmath.mpf(0 if n else 1)
    return mpmath.exp(n * mpmath.log1p(-mpmath.ldexp(1, e - k)))


def _mean_exact(n: int, k: int) -> Fraction:
    total = Fraction(0)
    for j in range(k + 1):
        c = Fraction(1 << k, (1 << binom2(j))) / (q_finite(j) * q_finite(k - j))
        t = c * (1 - Fraction(1 << j, 1 << k)) ** n
        total += -t if j % 2 else t
    return total


def _mean_raw(n: int, k: int, prec: int):
    inv = inv_q_table(prec, k)
    acc = mpmath.mpf(0)
    mag = mpmath.mpf(0)
    for j in range(k + 1):
        t = mpmath.ldexp(inv[j] * inv[k - j], k - binom2(j)) * _pow1m(j, k, n)
        acc += -t if j % 2 else t
        mag = max(mag, t)
    return acc, mag


def mean_closed(n: int, k: int, ctx: PrecisionContext | None = None, exact: bool = False):
    """E B_{n,k} from the alternating closed form.

    ``exact=True`` returns a Fraction; otherwise an mpf evaluated with
    adaptive precision.
    """
    _check_nk(n, k)
    if k > n:
        return Fraction(0) if exact else mpmath.mpf(0)
    if n > CLOSED_CAP:
        raise CapExceeded(f"closed forms are capped at n = {CLOSED_CAP}")
    if exact:
        return _mean_exact(n, k)
    return adaptive(lambda p: _mean_raw(n, k, p), ctx)[0]


def _delta_exact(u: Fraction, v: Fraction, n: int) -> Fraction:
    if u == v:
        return n * (1 - u) ** (n - 1)
    return ((1 - u) ** n - (1 - v) ** n) / (v - u)


@lru_cache(maxsize=None)
def _grouped_coeff(s: int, h: int, l: int, var: bool) -> Fraction:
    """Exact coefficient of one (s, h <= l) group of the quadruple sums.

    With s = r + j the factor 1/Q_{k-1-s} (or 1/Q_{k-s}) does not depend
    on j, so the j-sum collapses into this k-free rational.
    """
    e = 2 if var else 0
    w = Fraction(0)
    for j in range(max(h, l), s + 1):
        r = s - j
        t = Fraction(1, 1 << binom2(r)) / (q_finite(r) * q_finite(j - h) * q_finite(j - l))
        t = t / (1 << j) if var else t * (1 << (2 * j + 1))
        w += -t if r % 2 else t
    c = w * Fraction(1 << (e * (h + l)), 1 << (binom2(h) + binom2(l))) / (q_finite(h) * q_finite(l))
    if (h + l) % 2:
        c = -c
    return c if h == l else 2 * c


def _groups(k: int, var: bool):
    """(s, h, l, u*2^k, v*2^k, coefficient) for every group."""
    top = k if var else k - 1
    for s in range(top + 1):
        outer = Fraction(1, 1) / q_finite(top - s)
        un = 1 << (s if var else s + 1)
        for h in range(s + 1):
            for l in range(h, s + 1):
                vn = (1 << h) + (1 << l)
                yield s, h, l, un, vn, outer * _grouped_coeff(s, h, l, var)


_MPF_GROUPS: dict = {}


def _groups_mpf(k: int, var: bool, prec: int):
    key = (k, var, prec)
    hit = _MPF_GROUPS.get(key)
    if hit is None:
        hit = [(un, vn, mpmath.mpf(c.numerator) / c.denominator)
               for _, _, _, un, vn, c in _groups(k, var)]
        _MPF_GROUPS[key] = hit
    return hit


def _second_exact(n: int, k: int) -> Fraction:
    total = _mean_exact(n, k)
    den = 1 << k
    for _, _, _, un, vn, c in _groups(k, False):
        total += c * _delta_exact(Fraction(un, den), Fraction(vn, den), n)
    return total


def _second_raw(n: int, k: int, prec: int):
    mean, mag = _mean_raw(n, k, prec)
    acc = mean
    pw = {}

    def power(num):
        # (1 - num/2^k)^n, cached by numerator
        p = pw.get(num)
        if p is None:
            vv = mpmath.ldexp(num, -k)
            p = pw[num] = mpmath.mpf(0) if vv == 1 else mpmath.exp(n * mpmath.log1p(-vv))
        return p

    for un, vn, c in _groups_mpf(k, False, prec):
        pu = power(un)
        if un == vn:
            t = c * n * _pow1m(un.bit_length() - 1, k, n - 1)
            m_t = abs(t)
        else:
            pv = power(vn)
            dv = mpmath.ldexp(vn - un, -k)
            t = c * (pu - pv) / dv
            m_t = abs(c) * max(pu, pv) / abs(dv)
        acc += t
        mag = max(mag, m_t)
    return acc, mag


def second_moment_closed(n: int, k: int, ctx: PrecisionContext | None = None,
                         exact: bool = False):
    """E B_{n,k}^2 from the closed form with the dyadic difference quotient."""
    _check_nk(n, k)
    if k > n or (k == 0 and n > 0):
        return Fraction(0) if exact else mpmath.mpf(0)
    if n > CLOSED_CAP:
        raise CapExceeded(f"closed forms are capped at n = {CLOSED_CAP}")
    if exact:
        return _second_exact(n, k)
    return adaptive(lambda p: _second_raw(n, k, p), ctx)[0]


def variance_exact(n: int, k: int, ctx: PrecisionContext | None = None,
                   exact: bool = False):
    """Var B_{n,k} = nu - mu^2, checked to be nonnegative."""
    _check_nk(n, k)
    if exact:
        v = second_moment_closed(n, k, exact=True) - mean_closed(n, k, exact=True) ** 2
        if v < 0:
            raise ArithmeticError("negative exact variance")
        return v
    if k > n or (k == 0 and n > 0) or n <= 2:
        return mpmath.mpf(0)
    if n > CLOSED_CAP:
        raise CapExceeded(f"closed forms are capped at n = {CLOSED_CAP}")

    def run(prec):
        m, mm = _mean_raw(n, k, prec)
        s, ms = _second_raw(n, k, prec)
        return s - m * m, max(ms, mm * abs(m), abs(s))

    ctx = resolve(ctx)
    v = adaptive(run, ctx)[0]
    if v < 0:
        if -v > ctx.series_tol:
            raise ArithmeticError("variance evaluated negative beyond tolerance")
        v = mpmath.mpf(0)
    return v


# ---------------------------------------------------------------------------
# internal profile
# ---------------------------------------------------------------------------

def internal_mean_exact(n: int, k: int) -> Fraction:
    """E I_{n,k} from the exact internal table (n <= MU_CAP)."""
    _check_nk(n, k)
    if n > MU_CAP:
        raise CapExceeded(f"exact internal means stop at n = {MU_CAP}; use internal_mean")
    if n == 0:
        return Fraction(0)
    return mean_table_entry(INTERNAL, n, k)


def _log2_internal_tail(n: int, m: int) -> float:
    """log2 of a union bound on E I_{n,m}: 2^m C(n, m+1) 2^-C(m+1, 2)."""
    if m + 1 > n:
        return -math.inf
    lc = (math.lgamma(n + 1) - math.lgamma(m + 2) - math.lgamma(n - m)) / math.log(2)
    return m + lc - binom2(m + 1)


def internal_mean(n: int, k: int, ctx: PrecisionContext | None = None):
    """E I_{n,k} in multiprecision, truncating the level sum with a union bound."""
    _check_nk(n, k)
    ctx = resolve(ctx)
    if n <= MU_CAP:
        q = internal_mean_exact(n, k)
        return mpmath.mpf(q.numerator) / q.denominator
    tol = math.log2(ctx.series_tol) - 4
    total = mpmath.mpf(0)
    l = 1
    while k + l <= n:
        total += mpmath.ldexp(mean_closed(n, k + l, ctx), -l)
        # the rest equals 2^-l E I_{n,k+l}
        if -l + _log2_internal_tail(n, k + l) < tol:
            break
        l += 1
    return total


def internal_variance_exact(n: int, k: int) -> Fraction:
    """Var I_{n,k} from the exact internal recurrence (n <= NU_CAP)."""
    mu = mean_table_entry(INTERNAL, n, k)
    return second_table_entry(INTERNAL, n, k) - mu * mu


# ---------------------------------------------------------------------------
# Poisson model
# ---------------------------------------------------------------------------

@dataclass
class PoissonEval:
    k: int
    z: object
    derivatives: List[object]
    variance: object = None


def _poisson_mean_raw(k: int, z, m: int, prec: int):
    inv = inv_q_table(prec, k)
    z = mpmath.mpmathify(z)
    acc = 0
    mag = mpmath.mpf(0)
    for j in range(k + 1):
        c = mpmath.ldexp(inv[j] * inv[k - j], k - binom2(j) + (j - k) * m)
        if (j + m) % 2:
            c = -c
        t = c * mpmath.exp(-mpmath.ldexp(1, j - k) * z)
        acc += t
        mag = max(mag, abs(t))
    return acc, mag


def poisson_mean(k: int, z, m: int = 0, ctx: PrecisionContext | None = None):
    """m-th derivative of the Poissonized mean M~_{k,1} at complex z."""
    if k < 0 or m < 0:
        raise DomainError("need k >= 0 and m >= 0")
    return adaptive(lambda p: _poisson_mean_raw(k, z, m, p), ctx)[0]


def _vtilde_raw(k: int, z, prec: int, include_diagonal: bool = False):
    x = mpmath.mpmathify(z) * mpmath.ldexp(1, -k)
    acc = 0
    mag = mpmath.mpf(0)
    for un, vn, c in _groups_mpf(k, True, prec):
        if un == vn and not include_diagonal:
            continue
        val, m = _phi(mpmath.mpf(un), mpmath.mpf(vn), x)
        acc += mpmath.ldexp(c * val, k)
        mag = max(mag, mpmath.ldexp(abs(c) * m, k))
    return acc, mag


def poissonized_variance(k: int, z, ctx: PrecisionContext | None = None,
                         include_diagonal: bool = False):
    """Poissonized variance V~_k(z); the u = v terms cancel and are skipped."""
    if k < 0:
        raise DomainError("need k >= 0")
    if z == 0:
        return mpmath.mpf(0)
    return adaptive(lambda p: _vtilde_raw(k, z, p, include_diagonal), ctx)[0]


def poisson_eval(k: int, z, orders: int = 1, ctx: PrecisionContext | None = None,
                 with_variance: bool = False) -> PoissonEval:
    ders = [poisson_mean(k, z, m, ctx) for m in range(orders)]
    var = poissonized_variance(k, z, ctx) if with_variance else None
    return PoissonEval(k, z, ders, var)


# ---------------------------------------------------------------------------
# de-Poissonization
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def charlier_tau(j: int, n: int) -> int:
    """tau_j(n) = sum_l C(j, l) (-n)^(j-l) n!/(n-l)!."""
    if j < 0 or n < 0:
        raise DomainError("need j >= 0 and n >= 0")
    total = 0
    for l in range(j + 1):
        total += comb(j, l) * (-n) ** (j - l) * math.perm(n, l)
    return total


@dataclass
class CharlierCoeffs:
    n: int
    tau: List[int]


def charlier_coeffs(J: int, n: int) -> CharlierCoeffs:
    return CharlierCoeffs(n, [charlier_tau(j, n) for j in range(J + 1)])


def depoissonize(k: int, n: int, order: int = 3, ctx: PrecisionContext | None = None,
                 func: Optional[Callable[[int, object], object]] = None):
    """Partial Poisson-Charlier sum sum_{j<=order} f^(j)(n) tau_j(n) / j!.

    ``func(m, z)`` gives the m-th derivative of the Poissonized quantity;
    by default the Poissonized mean at level k.
    """
    if order < 0:
        raise DomainError("order must be >= 0")
    if func is None:
        def func(m, z):
            return poisson_mean(k, z, m, ctx)
    total = mpmath.mpf(0)
    for j in range(order + 1):
        tau = charlier_tau(j, n)
        if tau:
            total += func(j, mpmath.mpf(n)) * tau / math.factorial(j)
    return total


def unsuccessful_search_pmf(n: int, exact: bool = True,
                            ctx: PrecisionContext | None = None) -> Sequence:
    """Distribution of the insertion depth of a new record: mu_{n,k}/(n+1).

    In multiprecision mode entries whose union bound (B_{n,k} <= 2 I_{n,k-1})
    lies below series_tol are returned as 0, so the pmf is accurate to
    series_tol in absolute terms.
    """
    if exact and n <= MU_CAP:
        return [mean_table_entry(EXTERNAL, n, k) / (n + 1) for k in range(n + 1)]
    if exact:
        return [mean_closed(n, k, exact=True) / (n + 1) for k in range(n + 1)]
    ctx = resolve(ctx)
    cut = math.log2(ctx.series_tol) - 8
    out = []
    for k in range(n + 1):
        if k >= 1 and 1 + _log2_internal_tail(n, k - 1) < cut:
            out.append(mpmath.mpf(0))
        else:
            out.append(mean_closed(n, k, ctx) / (n + 1))
    return out
