"""The thirteen acceptance criteria, one test each, at their stated tolerances.

Each test prints a PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""
import json
import math
import time
from pathlib import Path

import mpmath

from dstprofile.asymptotics import (F_saddle, central_range, height_probability_bounds,
                                    predict_height_level, predict_saturation_level,
                                    saddle_solve)
from dstprofile.bits import ExplicitBits
from dstprofile.experiments import clt_experiment, concentration_experiment
from dstprofile.limitfns import F_eval, FI_eval, G_eval, P_eval
from dstprofile.moments import (EXTERNAL, INTERNAL, mean_closed, poissonized_variance,
                                recurrence_tables, second_moment_closed, variance_exact)
from dstprofile.precision import PrecisionContext
from dstprofile.qseries import q_product
from dstprofile.simulator import TrialConfig, build_tree, profiles, run_trials

GOLDEN = json.loads((Path(__file__).parent / "golden.json").read_text())
FIVE_RECORDS = ["0100", "1011", "1101", "0010", "0111"]


def _mpf(q):
    return mpmath.mpf(q.numerator) / q.denominator


def test_c01_five_record_tree(criterion):
    sources = [ExplicitBits(r) for r in FIVE_RECORDS]
    profiles(build_tree(sources))  # warm-up
    best = math.inf
    for _ in range(5):
        t0 = time.perf_counter()
        p = profiles(build_tree(sources))
        best = min(best, time.perf_counter() - t0)
    ok = (p.external, p.internal, p.height, p.saturation) == ((0, 0, 2, 4), (1, 2, 2, 0), 3, 1)
    criterion(1, "five-record tree profiles", ok,
              f"B={p.external} I={p.internal} H={p.height} S={p.saturation}", best, 1e-3)


def test_c02_mean_closed_form_equals_recurrence(criterion):
    t0 = time.perf_counter()
    table = recurrence_tables(EXTERNAL, 30, second=False)
    bad = [(n, k) for n in range(31) for k in range(n + 1)
           if mean_closed(n, k, exact=True) != table.mu[n][k]]
    criterion(2, "mean closed form == exact recurrence, n <= 30", not bad,
              f"{len(bad)} mismatches", time.perf_counter() - t0, 10)


def test_c03_second_moment_closed_form(criterion):
    t0 = time.perf_counter()
    ctx = PrecisionContext(bits=256)
    table = recurrence_tables(EXTERNAL, 25)
    worst = mpmath.mpf(0)
    for n in range(26):
        for k in range(n + 1):
            d = abs(second_moment_closed(n, k, ctx) - _mpf(table.nu[n][k]))
            worst = max(worst, d)
    criterion(3, "second moment closed form vs recurrence at 256 bits, n <= 25",
              worst <= 1e-30, f"max |diff| = {mpmath.nstr(worst, 3)}",
              time.perf_counter() - t0, 60)


def test_c04_conservation(criterion):
    t0 = time.perf_counter()
    ext = recurrence_tables(EXTERNAL, 30, second=False).mu
    inn = recurrence_tables(INTERNAL, 30, second=False).mu
    ok = True
    for n in range(31):
        ok &= sum(ext[n]) == n + 1 and sum(inn[n]) == n
        ok &= all(2 * inn[n][k] == inn[n][k + 1] + ext[n][k + 1] for k in range(n + 1))
    criterion(4, "conservation and 2 iota_k = iota_{k+1} + mu_{k+1}, n <= 30", ok,
              "exact rationals", time.perf_counter() - t0, 5)


def test_c05_functional_equation(criterion):
    t0 = time.perf_counter()
    ctx = PrecisionContext(bits=128)
    xs = [mpmath.mpf(2) ** (e / 2) for e in range(-20, 13)]
    worst = max(abs(F_eval(x, 0, ctx).value + F_eval(x, 1, ctx).value
                    - 2 * F_eval(2 * x, 0, ctx).value) for x in xs)
    h = mpmath.mpf(2) ** -20
    worst_fi = max(abs((FI_eval(x + h, ctx).value - FI_eval(x - h, ctx).value) / (2 * h)
                       - F_eval(x, 0, ctx).value) for x in xs)
    ok = len(xs) == 33 and worst <= 1e-20 and worst_fi <= 1e-8
    criterion(5, "F + F' = 2F(2x) on 33 points; F_I' = F", ok,
              f"max residual {mpmath.nstr(worst, 3)}, F_I' gap {mpmath.nstr(worst_fi, 3)}",
              time.perf_counter() - t0, 5)


def test_c06_laplace_identity(criterion):
    t0 = time.perf_counter()
    worst = mpmath.mpf(0)
    with mpmath.workprec(80):
        for s in (1, 2, 4):
            integral = mpmath.quad(lambda x: mpmath.exp(-s * x) * F_eval(x).value,
                                   [0, 0.25, 1, 4, 16, 64])
            worst = max(worst, abs(integral - 1 / q_product(-2 * s)))
    criterion(6, "Laplace transform of F equals 1/Q(-2s), s = 1, 2, 4", worst <= 1e-8,
              f"max |diff| = {mpmath.nstr(worst, 3)}", time.perf_counter() - t0, 10)


def test_c07_periodic_function(criterion):
    t0 = time.perf_counter()
    grid = [mpmath.mpf(i) / 4096 for i in range(4096)]
    vals = [P_eval(t).value for t in grid]
    spread = max(vals) - min(vals)
    residual = max(abs(P_eval(t + 1).value - v) for t, v in zip(grid[::64], vals[::64]))
    ok = 0 < spread < 1.8e-12 and residual == 0
    criterion(7, "P(t) oscillation on a 4096-point grid; exact period", ok,
              f"peak-to-peak {mpmath.nstr(spread, 4)}, period residual {residual}",
              time.perf_counter() - t0, 60)


def test_c08_limit_function_deviation_bounded(criterion):
    t0 = time.perf_counter()
    ctx = PrecisionContext()
    mean_dev, var_dev = [], []
    for e in range(8, 15):
        n = 2 ** e
        ks, kh = central_range(n)
        dm = dv = mpmath.mpf(0)
        for k in range(math.ceil(ks), math.floor(kh) + 1):
            x = mpmath.ldexp(n, -k)
            dm = max(dm, abs(mean_closed(n, k, ctx) - mpmath.ldexp(F_eval(x, 0, ctx).value, k)))
            dv = max(dv, abs(variance_exact(n, k, ctx) - mpmath.ldexp(G_eval(x, ctx).value, k)))
        mean_dev.append(float(dm))
        var_dev.append(float(dv))
    slack = GOLDEN["growth_slack"]["bound"]
    bounded = (max(mean_dev) <= GOLDEN["mean_limit_deviation"]["bound"]
               and max(var_dev) <= GOLDEN["variance_limit_deviation"]["bound"])
    flat = (max(mean_dev) <= mean_dev[0] * (1 + slack)
            and max(var_dev) <= var_dev[0] * (1 + slack))
    criterion(8, "|mu - 2^k F| and |Var - 2^k G| bounded over n = 2^8..2^14", bounded and flat,
              "mean " + ", ".join(f"{d:.5f}" for d in mean_dev)
              + "; var " + ", ".join(f"{d:.5f}" for d in var_dev),
              time.perf_counter() - t0, 300)


def test_c09_poissonized_variance_bridge(criterion):
    t0 = time.perf_counter()
    gap = abs(poissonized_variance(10, 1024) - variance_exact(1024, 10))
    criterion(9, "|V~_10(1024) - Var B_{1024,10}|", gap <= GOLDEN["poissonized_variance_bridge"]
              ["bound"], f"gap {mpmath.nstr(gap, 5)}", time.perf_counter() - t0, 30)


def test_c10_saddle_accuracy(criterion):
    t0 = time.perf_counter()
    errs, limits = [], []
    for e in (6, 8, 10, 12, 14):
        x = mpmath.ldexp(1, -e)
        errs.append(abs(F_saddle(x) / F_eval(x).value - 1))
        limits.append(5 / saddle_solve(x).log_rho)
    within = all(a <= b for a, b in zip(errs, limits))
    decreasing = all(a > b for a, b in zip(errs, errs[1:]))
    criterion(10, "saddle-point relative error <= 5/log rho and decreasing",
              within and decreasing, "errors " + ", ".join(mpmath.nstr(e, 3) for e in errs),
              time.perf_counter() - t0, 10)


def test_c11_mean_height(criterion):
    t0 = time.perf_counter()
    run = run_trials(TrialConfig(100, 10 ** 5, 42, frozenset({"height"})))
    h = run.mean_height()
    criterion(11, "Monte Carlo mean height, n = 100, 10^5 trials, seed 42",
              abs(h - 8.986) <= 0.03, f"mean H = {h:.5f}", time.perf_counter() - t0, 30)


def test_c12_clt(criterion):
    t0 = time.perf_counter()
    g = GOLDEN["clt_ks"]
    rep = clt_experiment(8192, 13, 20000, g["seed"])
    criterion(12, "KS distance of standardized B_{8192,13} to N(0,1)",
              rep.ks < g["bound"] and rep.sanity_ok,
              f"KS = {rep.ks:.5f}, seed {g['seed']}", time.perf_counter() - t0, 180)


def test_c13_two_point_concentration(criterion):
    t0 = time.perf_counter()
    n = 2 ** 15
    rep = concentration_experiment(n, 2000, 13, bound_levels=[])
    kH, _ = predict_height_level(n)
    kS = predict_saturation_level(n)
    h3 = sum(rep.height_pmf.get(k, 0) for k in (kH - 1, kH, kH + 1))
    s2 = sum(rep.saturation_pmf.get(k, 0) for k in (kS - 1, kS))
    small = run_trials(TrialConfig(100, 10 ** 5, 42, frozenset({"height"})))
    p9 = sum(p for h, p in small.pmf("height").items() if h <= 9)
    lo, hi = height_probability_bounds(100, 9)
    ok = h3 >= 0.9 and s2 >= 0.9 and lo <= p9 <= hi
    criterion(13, "two-point concentration at n = 2^15; bounds bracket P(H_100 <= 9)", ok,
              f"height mass {h3:.4f}, saturation mass {s2:.4f}, "
              f"{float(lo):.4f} <= {p9:.4f} <= {float(hi):.4f}",
              time.perf_counter() - t0, 300)
