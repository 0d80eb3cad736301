"""Command-line front end.

Three subcommands::

    mixedpelt detect    --input panel.csv --groups groups.ini --model lmec-hb --output result.json
    mixedpelt simulate  --scenario multi_change --n 1000 --ki 5 --output-dir sim/
    mixedpelt benchmark --grid grid.ini --reps 100 --output-dir bench/

Every result file is JSON with a ``schema_version`` and the fully resolved
configuration. Files are written to a temporary name and renamed, so a
failed run leaves nothing behind; errors go to stderr as one line and the
exit status is nonzero.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .glmer import BERNOULLI, NORMAL, GlmerCost, bootstrap_fixed_effect_ci
from .lmec import HB, UB, LmecCost
from .panel import BINARY, CONTINUOUS, load_csv, load_groups, prewhiten_ar, write_csv, write_groups
from .pelt import MODEL_KINDS, default_min_seg, default_penalty, pelt_detect
from .sim import (HORIZONS, LMEC_SCENARIOS, BenchmarkConfig, BernoulliScenario, LmecScenario,
                  dumps_json, gen_bernoulli, gen_lmec, glmer_penalty_p, load_grid, run_benchmark)

SCHEMA_VERSION = 1
THREADS_ENV = "MIXEDPELT_THREADS"


class UsageError(ValueError):
    """Invalid option combination, detected before any computation."""


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return value


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and ``os.replace``."""
    path = os.path.abspath(path)
    directory = os.path.dirname(path)
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clock(tau: int, bin_minutes: float) -> str:
    minutes = int(round(tau * bin_minutes))
    day, minutes = divmod(minutes, 24 * 60)
    label = f"{minutes // 60:02d}:{minutes % 60:02d}"
    return label if day == 0 else f"day{day + 1} {label}"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


# ---------------------------------------------------------------------------
# detect


def _validate_detect(args):
    if args.model not in MODEL_KINDS:
        raise UsageError(f"unknown model {args.model!r}")
    if args.penalty_c is not None and not (math.isfinite(args.penalty_c) and args.penalty_c >= 0):
        raise UsageError("--penalty-c must be a finite non-negative number")
    if args.min_seg is not None and args.min_seg < 1:
        raise UsageError("--min-seg must be a positive integer")
    if args.prewhiten_order is not None:
        if args.prewhiten_order < 1:
            raise UsageError("--prewhiten-order must be a positive integer")
        if args.model == "glmer-bernoulli":
            raise UsageError("--prewhiten-order applies to continuous panels only")
    if args.bootstrap_b is not None:
        if not args.model.startswith("glmer"):
            raise UsageError("--bootstrap-b is only available for GLMER models")
        if args.bootstrap_b < 100:
            raise UsageError("--bootstrap-b must be at least 100")
    if args.bin_minutes is not None and not args.bin_minutes > 0:
        raise UsageError("--bin-minutes must be positive")
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")


def cmd_detect(args) -> int:
    _validate_detect(args)
    groups = load_groups(args.groups)
    kind = BINARY if args.model == "glmer-bernoulli" else CONTINUOUS
    panel = load_csv(args.input, groups, kind)
    offset = 0
    if args.prewhiten_order:
        panel = prewhiten_ar(panel, args.prewhiten_order)
        offset = args.prewhiten_order

    if args.model.startswith("glmer"):
        family = BERNOULLI if args.model == "glmer-bernoulli" else NORMAL
        model = GlmerCost(panel, family)
        p = glmer_penalty_p(panel)
    else:
        model = LmecCost(panel, HB if args.model == "lmec-hb" else UB)
        p = None
    penalty = default_penalty(args.model, panel.n, p=p, K=panel.K, C=args.penalty_c)
    result = pelt_detect(model, penalty, min_seg=args.min_seg, force=args.force)

    cis = None
    if args.bootstrap_b:
        cis = bootstrap_fixed_effect_ci(panel, result.segmentation, model.family, B=args.bootstrap_b,
                                        seed=args.seed, threads=args.threads)

    segments = []
    for i, ((s, e), cost, fit) in enumerate(zip(result.segmentation.segments(),
                                                result.segment_costs, result.segment_fits)):
        seg = {"start": s + 1, "end": e, "cost": cost}
        if args.model.startswith("glmer"):
            est = {"beta": fit.beta, "fixed_effect": fit.fixed_effect, "b": fit.b.tolist(),
                   "sigma_b2": fit.sigma_b2, "resid_var": fit.resid_var,
                   "minus2loglik": fit.minus2loglik}
            if cis is not None:
                lo, mean, hi = cis[i]
                est["bootstrap_ci"] = {"level": 0.95, "low": lo, "mean": mean, "high": hi}
        else:
            est = {"structure": fit.structure,
                   "sigma_mu": _jsonable(fit.sigma_mu),
                   "noise_variances": _jsonable(fit.sigma_eps),
                   "correlation": _jsonable(fit.correlation(panel.groups))}
        seg["estimates"] = est
        segments.append(seg)

    cps = list(result.changepoints)
    out = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": {
            "command": "detect",
            "input": os.path.abspath(args.input),
            "groups": os.path.abspath(args.groups),
            "model": args.model,
            "penalty_c": penalty.C,
            "penalty": penalty.beta,
            "min_seg": result.min_seg,
            "default_min_seg": model.default_min_seg,
            "force": bool(args.force),
            "prewhiten_order": args.prewhiten_order,
            "bootstrap_b": args.bootstrap_b,
            "seed": args.seed,
            "bin_minutes": args.bin_minutes,
        },
        "n": panel.n,
        "P": panel.P,
        "K": panel.K,
        "group_labels": list(panel.groups.labels),
        "columns": list(panel.columns),
        "row_offset": offset,
        "changepoints": cps,
        "changepoints_input_rows": [c + offset for c in cps],
        "objective": result.objective,
        "penalty": result.penalty,
        "min_seg": result.min_seg,
        "segments": segments,
    }
    if args.bin_minutes:
        out["changepoint_times"] = [_clock(c + offset, args.bin_minutes) for c in cps]
    atomic_write(args.output, dumps_json(out))
    return 0


# ---------------------------------------------------------------------------
# simulate


def _scenario_from_args(args):
    if args.scenario in HORIZONS:
        if args.n is not None or args.ki is not None:
            raise UsageError("--n/--ki apply to covariance scenarios; Bernoulli designs fix n")
        return BernoulliScenario(args.scenario, args.replicates, not args.constant_global,
                                 args.group_change)
    if args.scenario in LMEC_SCENARIOS:
        if args.replicates != 56 or args.constant_global or args.group_change != "none":
            raise UsageError("--replicates/--constant-global/--group-change apply to daily/weekly only")
        return LmecScenario(args.scenario, 1000 if args.n is None else args.n,
                            5 if args.ki is None else args.ki)
    raise UsageError(f"unknown scenario {args.scenario!r}")


def cmd_simulate(args) -> int:
    try:
        sc = _scenario_from_args(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ss = np.random.SeedSequence(args.seed)
    if isinstance(sc, BernoulliScenario):
        panel, truth, taus = gen_bernoulli(sc, ss)
        params = [{"global_p": float(g), "group_p": row.tolist()}
                  for g, row in zip(truth.global_p, truth.group_p)]
        scenario = {"family": "bernoulli", "horizon": sc.horizon, "replicates": sc.replicates,
                    "global_change": sc.global_change, "group_change": sc.group_change}
    else:
        panel, truth, taus = gen_lmec(sc, ss)
        params = [{"covariance": S.tolist()} for S in truth]
        scenario = {"family": "lmec", "id": sc.id, "n": sc.n, "ki": sc.k_i, "phi": sc.phi,
                    "true_group_sizes": list(sc.true_groups.sizes)}
    out_dir = args.output_dir
    os.makedirs(out_dir, exist_ok=True)
    tmp_csv = os.path.join(out_dir, ".tmp-panel.csv")
    try:
        write_csv(panel, tmp_csv)
        os.replace(tmp_csv, os.path.join(out_dir, "panel.csv"))
    finally:
        if os.path.exists(tmp_csv):
            os.unlink(tmp_csv)
    tmp_groups = os.path.join(out_dir, ".tmp-groups.ini")
    try:
        write_groups(panel.groups, panel.columns, tmp_groups)
        os.replace(tmp_groups, os.path.join(out_dir, "groups.ini"))
    finally:
        if os.path.exists(tmp_groups):
            os.unlink(tmp_groups)
    truth_doc = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": {"command": "simulate", "seed": args.seed, "scenario": scenario},
        "n": panel.n,
        "P": panel.P,
        "kind": panel.kind,
        "true_taus": list(taus),
        "segments": params,
    }
    atomic_write(os.path.join(out_dir, "truth.json"), dumps_json(truth_doc))
    return 0


# ---------------------------------------------------------------------------
# benchmark


def cmd_benchmark(args) -> int:
    if args.reps is not None and args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    config: BenchmarkConfig = load_grid(args.grid, reps=args.reps, seed=args.seed)
    result = run_benchmark(config, threads=args.threads)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": {"command": "benchmark", "grid": os.path.basename(args.grid), **config.to_dict()},
        **result.to_json_obj(),
    }
    timing = {
        "schema_version": SCHEMA_VERSION,
        "threads": args.threads,
        "runtime_seconds": result.runtimes(),
    }
    out = args.output_dir
    atomic_write(os.path.join(out, "results.csv"), result.to_csv())
    atomic_write(os.path.join(out, "results.json"), dumps_json(doc))
    atomic_write(os.path.join(out, "timing.json"), dumps_json(timing))
    return 0


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mixedpelt", description="Mixed-model changepoint detection with PELT.")
    p.add_argument("--version", action="version", version=f"mixedpelt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="detect changepoints in a CSV panel")
    d.add_argument("--input", required=True, help="CSV panel, one column per series")
    d.add_argument("--groups", required=True, help="INI group spec with a [groups] section")
    d.add_argument("--model", required=True, choices=MODEL_KINDS)
    d.add_argument("--output", required=True, help="result JSON path")
    d.add_argument("--penalty-c", type=float, help="penalty constant C (penalty is C log n)")
    d.add_argument("--min-seg", type=int, help="minimum segment length")
    d.add_argument("--force", action="store_true",
                   help="allow --min-seg below the model default")
    d.add_argument("--prewhiten-order", type=int, help="AR order for prewhitening each series")
    d.add_argument("--bootstrap-b", type=int, help="bootstrap replicates for GLMER fixed-effect CIs")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--bin-minutes", type=float,
                   help="minutes per time point; adds clock labels for changepoints")
    d.add_argument("--threads", type=int, default=None)
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate", help="simulate a panel from one design")
    s.add_argument("--scenario", required=True, choices=LMEC_SCENARIOS + tuple(HORIZONS))
    s.add_argument("--n", type=int, help="series length (covariance scenarios)")
    s.add_argument("--ki", type=int, help="series per fitted group (covariance scenarios)")
    s.add_argument("--replicates", type=int, default=56, help="series per group (daily/weekly)")
    s.add_argument("--constant-global", action="store_true",
                   help="hold the global probability constant across segments")
    s.add_argument("--group-change", default="none", choices=("none", "single_group", "all_groups"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output-dir", required=True)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("benchmark", help="run a scenario grid")
    b.add_argument("--grid", required=True, help="INI grid config")
    b.add_argument("--reps", type=int, help="replicates per cell (overrides the grid)")
    b.add_argument("--seed", type=int, help="seed (overrides the grid)")
    b.add_argument("--output-dir", required=True)
    b.add_argument("--threads", type=int, default=None)
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads is None:
            args.threads = _default_threads()
        return args.func(args)
    except UsageError as exc:
        _fail("usage", exc)
        return 2
    except Exception as exc:
        _fail(type(exc).__name__, exc)
        return 1


def _fail(kind: str, exc: BaseException):
    msg = " ".join(str(exc).split())
    print(f"mixedpelt: error: {kind}: {msg}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
