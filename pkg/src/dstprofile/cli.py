"""Command line interface: ``dstprofile <command> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath

from .asymptotics import F_saddle, level_predictions, saddle_solve
from .errors import (BitExhausted, CapExceeded, DegenerateVariance, DomainError,
                     NoConvergence, PrecisionExhausted)
from .experiments import (TABLE_COLUMNS, ExperimentSpec, clt_experiment,
                          concentration_experiment, dumps_json, profile_table, report,
                          rows_to_csv)
from .limitfns import F_eval, FI_eval, G_eval, GI_eval, P_eval
from .moments import mean_closed, variance_exact
from .simulator import STATS, TrialConfig, run_trials

EXIT_OK, EXIT_DOMAIN, EXIT_PRECISION, EXIT_CAP = 0, 2, 3, 4

# fields that have a default in ExperimentSpec; argparse leaves them None so
# that a config file can fill them before the defaults apply
_SPEC_DEFAULTS = {k: v for k, v in asdict(ExperimentSpec("mean")).items() if k != "kind"}
STAT_ALIASES = {"depth": "unsuccessful"}


def _global_parser() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--format", choices=["csv", "json"])
    g.add_argument("--out")
    g.add_argument("--config")
    g.add_argument("--prec", dest="bits", type=int, help="working precision in bits")
    g.add_argument("--tol", type=float, help="series truncation tolerance")
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_parser()
    p = argparse.ArgumentParser(prog="dstprofile", parents=[common],
                                description="Profiles of random digital search trees.")
    sub = p.add_subparsers(dest="kind", required=True)

    def cmd(name, help_, aliases=()):
        return sub.add_parser(name, parents=[common], help=help_, aliases=list(aliases))

    c = cmd("mean", "expected external profile E B_{n,k}")
    c.add_argument("--n", type=int)
    c.add_argument("--k", type=int)
    c.add_argument("--exact", action="store_true", default=None)
    c = cmd("variance", "variance of the external profile")
    c.add_argument("--n", type=int)
    c.add_argument("--k", type=int)
    c = cmd("limitfn", "evaluate F, FI, G, GI or P")
    c.add_argument("--fn", choices=["F", "FI", "G", "GI", "P"])
    c.add_argument("--x")
    c.add_argument("--deriv", type=int)
    c = cmd("saddle", "saddle point and saddle approximation of F^(m)")
    c.add_argument("--x")
    c.add_argument("--m", type=int)
    c = cmd("predict", "central range and height/saturation predictors")
    c.add_argument("--n", type=int)
    c = cmd("simulate", "Monte Carlo profile statistics")
    c.add_argument("--n", type=int)
    c.add_argument("--trials", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--stats", help="comma list of height,saturation,profile,depth")
    c = cmd("clt", "normal approximation of B_{n,k}")
    c.add_argument("--n", type=int)
    c.add_argument("--k", type=int)
    c.add_argument("--trials", type=int)
    c.add_argument("--seed", type=int)
    c = cmd("concentration", "height and saturation concentration")
    c.add_argument("--n", type=int)
    c.add_argument("--trials", type=int)
    c.add_argument("--seed", type=int)
    c = cmd("table", "per-level table of exact and approximate moments",
            aliases=["profile-table"])
    c.add_argument("--n", type=int)
    c.add_argument("--kmin", type=int)
    c.add_argument("--kmax", type=int)
    return p


def spec_from_args(ns: argparse.Namespace) -> ExperimentSpec:
    """Merge defaults < config file < command line."""
    given = {k: v for k, v in vars(ns).items() if v is not None and k != "config"}
    merged = dict(_SPEC_DEFAULTS)
    if ns.config:
        with open(ns.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise DomainError("config file must hold a flat JSON object")
        cfg.pop("kind", None)
        merged.update(cfg)
    merged.update(given)
    return ExperimentSpec.from_dict(merged)


def _need(spec: ExperimentSpec, *names):
    missing = [n for n in names if getattr(spec, n) is None]
    if missing:
        raise DomainError("missing " + ", ".join("--" + m for m in missing))


def _parse_number(text: str):
    v = mpmath.mpmathify(text.replace(" ", ""))
    return v.real if isinstance(v, mpmath.mpc) and v.imag == 0 else v


def _exact_or_float(v):
    return str(v) if isinstance(v, Fraction) else v


def execute(spec: ExperimentSpec) -> Tuple[List[Dict], object, Optional[List[str]]]:
    """Run one experiment; returns (csv rows, json results, csv columns)."""
    ctx = spec.context()
    kind = spec.kind
    if kind == "mean":
        _need(spec, "n", "k")
        v = mean_closed(spec.n, spec.k, ctx, exact=spec.exact)
        rows = [{"n": spec.n, "k": spec.k, "mean": _exact_or_float(v)}]
        return rows, rows, None
    if kind == "variance":
        _need(spec, "n", "k")
        rows = [{"n": spec.n, "k": spec.k, "variance": variance_exact(spec.n, spec.k, ctx)}]
        return rows, rows, None
    if kind == "limitfn":
        _need(spec, "fn", "x")
        x = _parse_number(spec.x)
        if spec.fn != "F" and spec.deriv:
            raise DomainError("--deriv is only available for F")
        fn = {"F": lambda: F_eval(x, spec.deriv, ctx), "FI": lambda: FI_eval(x, ctx),
              "G": lambda: G_eval(x, ctx), "GI": lambda: GI_eval(x, ctx),
              "P": lambda: P_eval(x, ctx)}[spec.fn]
        r = fn()
        rows = [{"fn": spec.fn, "x": spec.x, "deriv": spec.deriv, "value": r.value,
                 "tail_bound": r.tail_bound, "terms_used": r.terms_used, "prec": r.prec}]
        return rows, rows, None
    if kind == "saddle":
        _need(spec, "x")
        x = _parse_number(spec.x)
        res = saddle_solve(x, ctx)
        rows = [{"x": spec.x, "m": spec.m, "rho": res.rho, "log_rho": res.log_rho,
                 "residual": res.residual, "iterations": res.iterations,
                 "F_saddle": F_saddle(x, spec.m, ctx)}]
        return rows, rows, None
    if kind == "predict":
        _need(spec, "n")
        rows = [asdict(level_predictions(spec.n))]
        return rows, rows, None
    if kind == "simulate":
        _need(spec, "n", "trials")
        stats = STATS
        if spec.stats:
            names = [s.strip() for s in spec.stats.split(",") if s.strip()]
            stats = frozenset(STAT_ALIASES.get(s, s) for s in names)
        run = run_trials(TrialConfig(spec.n, spec.trials, spec.seed, stats))
        rows = [{"level": k, "mean_external": run.mean_external(k),
                 "var_external": run.var_external(k), "mean_internal": run.mean_internal(k),
                 "var_internal": run.var_internal(k)} for k in range(run.levels)]
        results = {"levels": rows}
        if "height" in stats:
            results["mean_height"] = run.mean_height()
            results["height_pmf"] = run.pmf("height")
        if "saturation" in stats:
            results["mean_saturation"] = run.mean_saturation()
            results["saturation_pmf"] = run.pmf("saturation")
        if "unsuccessful" in stats:
            results["unsuccessful_pmf"] = run.pmf("unsuccessful")
        if "profile" in stats:
            return rows, results, ["level", "mean_external", "var_external",
                                   "mean_internal", "var_internal"]
        # without profiles the CSV lists the distributions in long form
        long = [{"statistic": name[:-4], "value": v, "probability": p}
                for name in ("height_pmf", "saturation_pmf", "unsuccessful_pmf")
                for v, p in results.get(name, {}).items()]
        return long, results, ["statistic", "value", "probability"]
    if kind == "clt":
        _need(spec, "n", "k", "trials")
        rep = asdict(clt_experiment(spec.n, spec.k, spec.trials, spec.seed, ctx))
        hist = rep.pop("histogram")
        return [rep], dict(rep, histogram=hist), None
    if kind == "concentration":
        _need(spec, "n", "trials")
        rep = asdict(concentration_experiment(spec.n, spec.trials, spec.seed, ctx))
        flat = {k: v for k, v in rep.items() if not isinstance(v, dict)}
        return [flat], rep, None
    # table / profile-table
    _need(spec, "n", "kmin", "kmax")
    rows = profile_table(spec.n, spec.kmin, spec.kmax, ctx)
    return rows, rows, TABLE_COLUMNS


def render(spec: ExperimentSpec, rows, results, columns) -> str:
    if spec.format == "json":
        return dumps_json(report(spec, results))
    return rows_to_csv(rows, columns)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        spec = spec_from_args(ns)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            out = render(spec, *execute(spec))
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except (PrecisionExhausted, NoConvergence) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECISION
    except CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except (DomainError, DegenerateVariance, BitExhausted, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    if spec.out:
        with open(spec.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
