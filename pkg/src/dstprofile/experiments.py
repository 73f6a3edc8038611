"""Experiments joining exact, asymptotic and simulated profile statistics."""
from __future__ import annotations

import csv
import io
import json
import subprocess
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

import mpmath
import numpy as np
from scipy import stats

from .asymptotics import central_range, height_probability_bounds, predict_height_level, \
    predict_saturation_level
from .errors import DegenerateVariance, DomainError, OutsideCentralRange
from .limitfns import F_eval, G_eval
from .moments import (CLOSED_CAP, EXTERNAL, MU_CAP, NU_CAP, internal_mean,
                      internal_mean_exact, internal_variance_exact, mean_closed,
                      mean_table_entry, poisson_mean, poissonized_variance,
                      second_table_entry, variance_exact)
from .precision import PrecisionContext, resolve
from .simulator import TrialConfig, level_samples, run_trials

TABLE_COLUMNS = ["n", "k", "mu_exact", "var_exact", "mu_poisson", "var_poisson",
                 "mean_approx_2kF", "var_approx_2kG", "internal_mu", "internal_var",
                 "p_unsuccessful"]


@dataclass
class ExperimentSpec:
    kind: str
    n: Optional[int] = None
    k: Optional[int] = None
    kmin: Optional[int] = None
    kmax: Optional[int] = None
    trials: Optional[int] = None
    seed: int = 0
    bits: int = 128
    tol: float = 1e-30
    format: str = "csv"
    out: Optional[str] = None
    fn: Optional[str] = None
    x: Optional[str] = None
    deriv: int = 0
    m: int = 0
    exact: bool = False
    stats: Optional[str] = None

    KINDS = ("mean", "variance", "limitfn", "saddle", "predict", "simulate", "clt",
             "table", "profile-table", "concentration")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        for name in ("n", "trials", "bits"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise DomainError(f"{name} must be nonnegative")
        if self.format not in ("csv", "json"):
            raise DomainError("format must be csv or json")

    def context(self) -> PrecisionContext:
        return PrecisionContext(bits=self.bits, series_tol=self.tol)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict) -> "ExperimentSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise DomainError(f"unknown experiment keys {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# CLT
# ---------------------------------------------------------------------------

@dataclass
class CltReport:
    n: int
    k: int
    trials: int
    seed: int
    mean: object
    variance: object
    surrogate: bool
    emp_mean: float
    emp_var: float
    ks: float
    sanity_ok: bool
    variance_ok: bool
    histogram: Dict[int, int] = field(repr=False)


def _exact_moments(n: int, k: int, ctx: PrecisionContext):
    """(mean, variance, surrogate flag); exact zero variance is detected exactly."""
    if n <= MU_CAP:
        mu = mean_closed(n, k, exact=True)
        var = variance_exact(n, k, exact=True)
        return mu, var, False
    if n <= CLOSED_CAP:
        return mean_closed(n, k, ctx), variance_exact(n, k, ctx), False
    return poisson_mean(k, n, 0, ctx), poissonized_variance(k, n, ctx), True


def in_central_range(n: int, k: int) -> bool:
    if n < 3:
        return False
    ks, kh = central_range(n)
    return ks <= k <= kh


def clt_experiment(n: int, k: int, trials: int, seed: int,
                   ctx: PrecisionContext | None = None) -> CltReport:
    """Standardise simulated B_{n,k} by exact moments and measure KS to N(0,1)."""
    ctx = resolve(ctx)
    if trials < 2:
        raise DomainError("need at least two trials")
    mu, var, surrogate = _exact_moments(n, k, ctx)
    if var == 0:
        raise DegenerateVariance(f"Var B_{{{n},{k}}} = 0")
    if not in_central_range(n, k):
        warnings.warn(f"level {k} is outside the central range for n = {n}",
                      OutsideCentralRange, stacklevel=2)
    # standardise in multiprecision: far outside the central range the
    # moments underflow doubles while the sample is still well defined
    with mpmath.mp.workprec(ctx.bits):
        mu_m = mpmath.mpf(mu.numerator) / mu.denominator if isinstance(mu, Fraction) \
            else mpmath.mpf(mu)
        var_m = mpmath.mpf(var.numerator) / var.denominator if isinstance(var, Fraction) \
            else mpmath.mpf(var)
        sigma = mpmath.sqrt(var_m)
        sample, _ = level_samples(n, k, trials, seed)
        values, inverse = np.unique(sample, return_inverse=True)
        zs = np.array([float((int(v) - mu_m) / sigma) for v in values])
        ks = float(stats.kstest(zs[inverse], "norm").statistic)
        emp_mean = float(Fraction(int(sample.sum()), trials))
        emp_var = float(np.var(sample, ddof=1))
        # six standard errors; the variance gate assumes near-normal kurtosis
        # and is only meaningful inside the central range
        sane = bool(abs(emp_mean - mu_m) <= 6 * sigma / mpmath.sqrt(trials))
        var_ok = bool(abs(emp_var - var_m) <= 6 * mpmath.sqrt(mpmath.mpf(2) / trials) * var_m)
    hist = dict(sorted(Counter(sample.tolist()).items()))
    return CltReport(n, k, trials, seed, mu_m, var_m, surrogate, emp_mean, emp_var, ks,
                     sane, var_ok, hist)


# ---------------------------------------------------------------------------
# concentration
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationReport:
    n: int
    trials: int
    seed: int
    k_H: int
    theta: float
    k_S: int
    mean_height: float
    height_pmf: Dict[int, float]
    saturation_pmf: Dict[int, float]
    height_two_point: float
    height_three_point: float
    saturation_two_point: float
    bounds: Dict[int, tuple]
    empirical_cdf: Dict[int, float]


def concentration_experiment(n: int, trials: int, seed: int,
                             ctx: PrecisionContext | None = None,
                             bound_levels: Optional[List[int]] = None) -> ConcentrationReport:
    """Height and saturation histograms against the two-point predictions."""
    ctx = resolve(ctx)
    run = run_trials(TrialConfig(n, trials, seed, frozenset({"height", "saturation"})))
    hp, sp = run.pmf("height"), run.pmf("saturation")
    kH, theta = predict_height_level(max(n, 2))
    kS = predict_saturation_level(max(n, 2))
    two = hp.get(kH, 0) + hp.get(kH + 1, 0)
    three = two + hp.get(kH - 1, 0)
    sat2 = sp.get(kS - 1, 0) + sp.get(kS, 0)
    if bound_levels is None:
        bound_levels = list(range(max(0, kH - 2), kH + 2))
    bounds = {}
    if n <= CLOSED_CAP:
        for k in bound_levels:
            lo, hi = height_probability_bounds(n, k, ctx)
            bounds[k] = (float(lo), float(hi))
    cdf = {}
    acc = 0.0
    for k in range(max(hp) + 1):
        acc += hp.get(k, 0)
        cdf[k] = acc
    return ConcentrationReport(n, trials, seed, kH, theta, kS, run.mean_height(), hp, sp,
                               two, three, sat2, bounds, cdf)


# ---------------------------------------------------------------------------
# profile table
# ---------------------------------------------------------------------------

def profile_table(n: int, kmin: int, kmax: int, ctx: PrecisionContext | None = None,
                  columns: Optional[List[str]] = None) -> List[Dict]:
    """Per-level exact, Poissonized and limit-function values.

    Exact columns hold Fractions within the exact-rational caps and
    multiprecision closed forms up to CLOSED_CAP; beyond that they are None.
    Where x = n/2^k < DEEP_X the variance approximations use G ~ 2F and
    V~_k ~ 2 M~_k, whose relative error is O(x); the series themselves
    become very expensive there.  ``columns`` restricts which of
    TABLE_COLUMNS are computed (n and k are always present).
    """
    ctx = resolve(ctx)
    if n < 0 or kmin < 0 or kmax < kmin:
        raise DomainError("need n >= 0 and 0 <= kmin <= kmax")
    want = set(TABLE_COLUMNS if columns is None else columns)
    unknown = want - set(TABLE_COLUMNS)
    if unknown:
        raise DomainError(f"unknown columns {sorted(unknown)}")
    rows = []
    for k in range(kmin, kmax + 1):
        row: Dict = {"n": n, "k": k}
        cells = _table_cells(n, k, ctx, want)
        row.update((c, cells.get(c)) for c in TABLE_COLUMNS[2:] if c in want)
        rows.append(row)
    return rows


DEEP_X = 2.0 ** -12


def _table_cells(n: int, k: int, ctx: PrecisionContext, want) -> Dict:
    out: Dict = {}
    mu = None
    if want & {"mu_exact", "var_exact", "p_unsuccessful"}:
        if n <= MU_CAP:
            mu = mean_table_entry(EXTERNAL, n, k)
        elif n <= CLOSED_CAP:
            mu = mean_closed(n, k, ctx)
        out["mu_exact"] = mu
        out["p_unsuccessful"] = None if mu is None else mu / (n + 1)
    if "var_exact" in want:
        if n <= NU_CAP:
            out["var_exact"] = second_table_entry(EXTERNAL, n, k) - mu * mu
        elif n <= CLOSED_CAP:
            out["var_exact"] = variance_exact(n, k, ctx)
    x = mpmath.ldexp(n, -k)
    deep = x < DEEP_X
    if want & {"mu_poisson", "var_poisson"}:
        mp_ = poisson_mean(k, n, 0, ctx)
        out["mu_poisson"] = mp_
        if "var_poisson" in want:
            out["var_poisson"] = 2 * mp_ if deep else poissonized_variance(k, n, ctx)
    if want & {"mean_approx_2kF", "var_approx_2kG"}:
        f = mpmath.ldexp(F_eval(x, 0, ctx).value, k) if n else mpmath.mpf(0)
        out["mean_approx_2kF"] = f
        if "var_approx_2kG" in want:
            out["var_approx_2kG"] = 2 * f if deep else mpmath.ldexp(G_eval(x, ctx).value, k)
    if "internal_mu" in want:
        if n <= MU_CAP:
            out["internal_mu"] = internal_mean_exact(n, k)
        elif n <= CLOSED_CAP:
            out["internal_mu"] = internal_mean(n, k, ctx)
    if "internal_var" in want and n <= NU_CAP:
        out["internal_var"] = internal_variance_exact(n, k)
    return out


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------

def to_plain(v):
    """JSON-ready value; numbers become shortest round-trip floats."""
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, Fraction, np.floating)):
        return float(v)
    if isinstance(v, mpmath.mpf):
        return float(v)
    if isinstance(v, mpmath.mpc):
        return [float(v.real), float(v.imag)]
    if isinstance(v, dict):
        return {str(k): to_plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_plain(x) for x in v]
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _cell(v) -> str:
    p = to_plain(v)
    if p is None:
        return ""
    if isinstance(p, list):
        return " ".join(repr(x) for x in p)
    return repr(p) if isinstance(p, float) else str(p)


def rows_to_csv(rows: List[Dict], columns: Optional[List[str]] = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def report(spec: ExperimentSpec, results) -> Dict:
    return {"spec": spec.to_dict(), "results": to_plain(results),
            "provenance": {"seed": spec.seed, "precision": spec.bits,
                           "git_describe": git_describe()}}


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"
