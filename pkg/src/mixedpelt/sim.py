"""Simulation designs and the benchmark harness.

Two families of designs are provided:

* LMEC scenarios: zero-mean Gaussian panels whose covariance is
  ``diag(sigma_eps) + Z Sigma_mu Z'`` with ``Sigma_mu`` a correlation matrix
  obtained from a Wishart draw, piecewise constant between changepoints.
* Bernoulli designs: binary activity panels of ``K = 4`` groups with a
  global success probability plus small group effects.

:func:`run_benchmark` runs generate -> detect -> score over a grid of
scenario cells and methods. Replicate ``r`` of cell ``c`` always uses the
random stream ``SeedSequence(seed, spawn_key=(c, r))``, so every number in
the result is independent of how work is scheduled over threads.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .glmer import BERNOULLI, GlmerCost
from .lmec import HB, UB, LmecCost, assemble_cov
from .panel import BINARY, CONTINUOUS, GroupSpec, Segmentation, TimeSeriesPanel
from .pelt import default_penalty, pelt_detect

__all__ = [
    "LMEC_SCENARIOS",
    "LmecScenario",
    "BernoulliScenario",
    "BernoulliTruth",
    "EvalRecord",
    "CellResult",
    "BenchmarkConfig",
    "BenchmarkResult",
    "wishart_correlation",
    "gen_lmec",
    "gen_bernoulli",
    "mae",
    "segment_mae",
    "expand_path",
    "evaluate",
    "run_benchmark",
    "glmer_penalty_p",
    "load_grid",
    "DAILY_TAUS",
    "WEEKLY_TAUS",
]

LMEC_SCENARIOS = ("no_change", "one_change", "multi_change", "misspecified_groups",
                  "autocorrelated")
GROUP_CHANGES = ("none", "single_group", "all_groups")
HORIZONS = {"daily": 96, "weekly": 672}
DAILY_TAUS = (28, 34, 88)
WEEKLY_TAUS = (27, 87, 121, 181, 222, 282, 316, 376, 410, 470, 511, 571, 605, 665)
DEFAULT_REPS = 100
AR_PHI = 0.6


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class LmecScenario:
    """One cell of the covariance-change design.

    ``k_i`` is the fitted group size, so the panel has ``P = 4 k_i``
    columns. For ``misspecified_groups`` the data come from five equal true
    groups of ``P / 5`` series and the fitted spec merges the last two.
    """

    id: str
    n: int = 1000
    k_i: int = 5
    phi: float | None = None
    K: int = 4

    def __post_init__(self):
        if self.id not in LMEC_SCENARIOS:
            raise ValueError(f"unknown LMEC scenario {self.id!r}")
        if self.n < 2 or self.k_i < 2:
            raise ValueError("need n >= 2 and k_i >= 2")
        if self.id == "misspecified_groups" and (self.K * self.k_i) % (self.K + 1):
            raise ValueError(f"P = {self.K * self.k_i} cannot be split into {self.K + 1} equal groups")
        phi = (AR_PHI if self.id == "autocorrelated" else 0.0) if self.phi is None else self.phi
        if not -1.0 < phi < 1.0:
            raise ValueError("AR coefficient must lie in (-1, 1)")
        object.__setattr__(self, "phi", float(phi))

    @property
    def P(self) -> int:
        return self.K * self.k_i

    @property
    def true_taus(self) -> tuple[int, ...]:
        n = self.n
        if self.id == "no_change":
            return ()
        if self.id == "one_change":
            return (int(round(n / 2)),)
        return tuple(int(round(f * n)) for f in (0.4, 0.6, 0.75))

    @property
    def fitted_groups(self) -> GroupSpec:
        return GroupSpec((self.k_i,) * self.K, tuple(f"g{u + 1}" for u in range(self.K)))

    @property
    def true_groups(self) -> GroupSpec:
        if self.id != "misspecified_groups":
            return self.fitted_groups
        k = self.P // (self.K + 1)
        return GroupSpec((k,) * (self.K + 1))

    @property
    def name(self) -> str:
        return f"{self.id}_P{self.P}_n{self.n}"


@dataclass(frozen=True)
class BernoulliScenario:
    """Binary activity design: ``K`` groups of ``replicates`` series each.

    With ``global_change=False`` and ``group_change="none"`` nothing changes
    and the design has a single segment. ``global_p`` fixes the global
    probability instead of drawing it from ``U(0.1, 0.9)``.
    """

    horizon: str = "daily"
    replicates: int = 56
    global_change: bool = True
    group_change: str = "none"
    K: int = 4
    global_p: float | None = None

    def __post_init__(self):
        if self.horizon not in HORIZONS:
            raise ValueError(f"unknown horizon {self.horizon!r}")
        if self.group_change not in GROUP_CHANGES:
            raise ValueError(f"unknown group_change mode {self.group_change!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if self.global_p is not None:
            if self.global_change:
                raise ValueError("a fixed global_p needs global_change=False")
            if not 0.0 < self.global_p < 1.0:
                raise ValueError("global_p must lie in (0, 1)")

    @property
    def n(self) -> int:
        return HORIZONS[self.horizon]

    @property
    def P(self) -> int:
        return self.K * self.replicates

    @property
    def true_taus(self) -> tuple[int, ...]:
        if not self.global_change and self.group_change == "none":
            return ()
        return DAILY_TAUS if self.horizon == "daily" else WEEKLY_TAUS

    @property
    def groups(self) -> GroupSpec:
        return GroupSpec((self.replicates,) * self.K, tuple(f"g{u + 1}" for u in range(self.K)))

    @property
    def name(self) -> str:
        g = "global" if self.global_change else "const"
        if self.global_p is not None:
            g = f"p{self.global_p:g}"
        return f"{self.horizon}_r{self.replicates}_{g}_{self.group_change}"


@dataclass(frozen=True, eq=False)
class BernoulliTruth:
    """Generating probabilities: ``global_p[m]`` and ``group_p[m, u]`` per segment."""

    global_p: np.ndarray
    group_p: np.ndarray


@dataclass
class EvalRecord:
    abs_m_error: int
    mae: float
    detected_taus: list[int]
    runtime: float = 0.0


# ---------------------------------------------------------------------------
# generators


def wishart_correlation(K: int, df: int, rng) -> np.ndarray:
    """Correlation matrix of a ``K x K`` Wishart(df, I) draw."""
    G = _rng(rng).standard_normal((df, K))
    W = G.T @ G
    s = 1.0 / np.sqrt(np.diag(W))
    R = W * s[:, None] * s[None, :]
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return R


def _lmec_cov(groups: GroupSpec, df: int, rng) -> np.ndarray:
    mu = wishart_correlation(groups.K, df, rng)
    g = groups.group_of
    Sigma = mu[np.ix_(g, g)]
    Sigma[np.diag_indices(groups.P)] += rng.uniform(0.75, 1.25, size=groups.P)
    return Sigma


def gen_lmec(scenario: LmecScenario, seed) -> tuple[TimeSeriesPanel, list[np.ndarray], tuple[int, ...]]:
    """Simulate one panel of an LMEC scenario.

    Returns
    -------
    panel : TimeSeriesPanel
        ``n x P`` panel carrying the fitted group spec.
    truth : list of ndarray
        True ``P x P`` covariance per segment; for autocorrelated data this
        is the innovation covariance.
    taus : tuple of int
        True changepoints.
    """
    rng = _rng(seed)
    sc = scenario
    taus = sc.true_taus
    bounds = (0,) + taus + (sc.n,)
    truth = [_lmec_cov(sc.true_groups, sc.P, rng) for _ in range(len(bounds) - 1)]
    Y = np.empty((sc.n, sc.P))
    phi = sc.phi
    for (s, e), Sigma in zip(zip(bounds[:-1], bounds[1:]), truth):
        L = np.linalg.cholesky(Sigma)
        Z = rng.standard_normal((e - s, sc.P)) @ L.T
        if phi == 0.0:
            Y[s:e] = Z
            continue
        # stationary start: Var(y_0) = Sigma / (1 - phi^2)
        y = Z[0] / math.sqrt(1.0 - phi * phi)
        Y[s] = y
        for t in range(1, e - s):
            y = phi * y + Z[t]
            Y[s + t] = y
    cols = tuple(f"s{j + 1}" for j in range(sc.P))
    panel = TimeSeriesPanel(Y, sc.fitted_groups, CONTINUOUS, cols)
    return panel, truth, taus


def gen_bernoulli(scenario: BernoulliScenario, seed) -> tuple[TimeSeriesPanel, BernoulliTruth, tuple[int, ...]]:
    """Simulate one binary panel.

    Per segment the global probability is ``U(0.1, 0.9)`` (one draw for the
    whole series when ``global_change`` is false); group effects are
    ``N(0, 0.05^2)``, redrawn at each changepoint for the last group
    (``single_group``) or every group (``all_groups``). Success probability
    is ``clip(p + effect, 0.01, 0.99)``; series are independent given it.
    """
    rng = _rng(seed)
    sc = scenario
    taus = sc.true_taus
    bounds = (0,) + taus + (sc.n,)
    nseg = len(bounds) - 1
    K = sc.K
    if sc.global_change:
        gp = rng.uniform(0.1, 0.9, size=nseg)
    elif sc.global_p is None:
        gp = np.full(nseg, rng.uniform(0.1, 0.9))
    else:
        gp = np.full(nseg, float(sc.global_p))
    eff = np.empty((nseg, K))
    eff[0] = rng.normal(0.0, 0.05, size=K)
    for m in range(1, nseg):
        eff[m] = eff[m - 1]
        if sc.group_change == "single_group":
            eff[m, K - 1] = rng.normal(0.0, 0.05)
        elif sc.group_change == "all_groups":
            eff[m] = rng.normal(0.0, 0.05, size=K)
    prob = np.clip(gp[:, None] + eff, 0.01, 0.99)
    g = sc.groups.group_of
    Y = np.empty((sc.n, sc.P))
    for m, (s, e) in enumerate(zip(bounds[:-1], bounds[1:])):
        Y[s:e] = rng.random((e - s, sc.P)) < prob[m][g][None, :]
    cols = tuple(f"g{u + 1}_r{j + 1}" for u in range(K) for j in range(sc.replicates))
    panel = TimeSeriesPanel(Y, sc.groups, BINARY, cols)
    return panel, BernoulliTruth(gp, prob), taus


# ---------------------------------------------------------------------------
# metrics


def expand_path(segment_values: Sequence[Any], changepoints: Sequence[int], n: int) -> np.ndarray:
    """Per-time parameter path from per-segment values (segment ``m`` is ``(tau_m, tau_{m+1}]``)."""
    seg = Segmentation(tuple(changepoints), n)
    vals = [np.asarray(v, dtype=float) for v in segment_values]
    if len(vals) != seg.M + 1:
        raise ValueError(f"{len(vals)} segment values for {seg.M + 1} segments")
    return np.stack(vals)[seg.labels()]


def mae(estimated, truth) -> float:
    """``(1/n) sum_t ||theta_hat_t - theta_t||_1`` over per-time paths (axis 0 is time)."""
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {tru.shape}")
    if est.ndim == 0 or est.shape[0] == 0:
        raise ValueError("parameter paths need a non-empty time axis")
    diff = np.abs(est - tru).reshape(est.shape[0], -1)
    return float(diff.sum(axis=1).mean())


def segment_mae(est_cps, est_values, true_cps, true_values, n: int) -> float:
    """:func:`mae` computed from piecewise-constant parameters without expanding paths."""
    eb = (0,) + tuple(est_cps) + (n,)
    tb = (0,) + tuple(true_cps) + (n,)
    if len(est_values) != len(eb) - 1 or len(true_values) != len(tb) - 1:
        raise ValueError("segment value count does not match changepoints")
    total = 0.0
    i = j = 0
    t = 0
    while t < n:
        end = min(eb[i + 1], tb[j + 1])
        d = np.abs(np.asarray(est_values[i], float) - np.asarray(true_values[j], float)).sum()
        total += (end - t) * d
        t = end
        if eb[i + 1] == t:
            i += 1
        if tb[j + 1] == t:
            j += 1
    return float(total / n)


# ---------------------------------------------------------------------------
# benchmark


def _method_kind(method: str) -> str:
    m = method.lower().replace("_", "-")
    if m in ("hb", "ub"):
        m = "lmec-" + m
    if m not in ("lmec-hb", "lmec-ub", "glmer-bernoulli"):
        raise ValueError(f"unknown benchmark method {method!r}")
    return m


def glmer_penalty_p(panel: TimeSeriesPanel) -> float:
    """Replicates per group, the GLMER penalty constant (56 for 4 x 56 daily series)."""
    return panel.P / panel.K


def _cost_model(method: str, panel: TimeSeriesPanel, center: bool):
    if method == "glmer-bernoulli":
        return GlmerCost(panel, BERNOULLI)
    return LmecCost(panel, HB if method == "lmec-hb" else UB, center=center)


def evaluate(method: str, panel: TimeSeriesPanel, truth, taus, penalty_c: float | None = None,
             center: bool = False) -> EvalRecord:
    """Detect on ``panel`` with ``method`` and score it against the truth."""
    method = _method_kind(method)
    t0 = time.perf_counter()
    model = _cost_model(method, panel, center)
    pen = default_penalty(method, panel.n, p=glmer_penalty_p(panel), K=panel.K, C=penalty_c)
    res = pelt_detect(model, pen, fits=True)
    cps = list(res.changepoints)
    if method == "glmer-bernoulli":
        est = [f.group_means() for f in res.segment_fits]
        tru = list(truth.group_p)
    else:
        est = [assemble_cov(f, panel.groups) for f in res.segment_fits]
        tru = truth
    err = segment_mae(cps, est, taus, tru, panel.n)
    return EvalRecord(abs(len(cps) - len(taus)), err, cps, time.perf_counter() - t0)


@dataclass
class BenchmarkConfig:
    """Scenario cells x methods x replicates.

    Attributes
    ----------
    cells : list of (name, scenario, methods)
    reps : int
        Replicates per cell.
    seed : int
    penalty_c : float, optional
        Overrides the default penalty constant for every method.
    center : bool
        Centre LMEC segments about their mean (the simulated data are
        zero-mean, so the default is not to).
    """

    cells: list[tuple[str, Any, tuple[str, ...]]]
    reps: int = DEFAULT_REPS
    seed: int = 0
    penalty_c: float | None = None
    center: bool = False

    def __post_init__(self):
        if int(self.reps) < 1:
            raise ValueError("replicate count must be at least 1")
        self.reps = int(self.reps)
        names = [c[0] for c in self.cells]
        if len(set(names)) != len(names):
            raise ValueError("duplicate cell names in benchmark grid")
        self.cells = [(name, sc, tuple(_method_kind(m) for m in methods))
                      for name, sc, methods in self.cells]
        for name, sc, methods in self.cells:
            if not methods:
                raise ValueError(f"cell {name!r} lists no methods")
            bern = isinstance(sc, BernoulliScenario)
            if any((m == "glmer-bernoulli") != bern for m in methods):
                raise ValueError(f"cell {name!r}: methods do not fit the scenario family")

    def to_dict(self) -> dict:
        cells = []
        for name, sc, methods in self.cells:
            family = "bernoulli" if isinstance(sc, BernoulliScenario) else "lmec"
            cells.append({"name": name, "family": family, "scenario": asdict(sc),
                          "methods": list(methods)})
        return {"reps": self.reps, "seed": self.seed, "penalty_c": self.penalty_c,
                "center": self.center, "cells": cells}


@dataclass
class CellResult:
    cell: str
    method: str
    n: int
    P: int
    true_taus: tuple[int, ...]
    records: list[EvalRecord | None]
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> list[EvalRecord]:
        return [r for r in self.records if r is not None]

    @property
    def mean_abs_m_error(self) -> float:
        ok = self.ok
        return float(np.mean([r.abs_m_error for r in ok])) if ok else float("nan")

    @property
    def mean_mae(self) -> float:
        ok = self.ok
        return float(np.mean([r.mae for r in ok])) if ok else float("nan")

    @property
    def runtime(self) -> float:
        return float(sum(r.runtime for r in self.ok))

    def histogram(self) -> np.ndarray:
        """Counts of detected changepoint locations in bins of width 1 (index = tau)."""
        h = np.zeros(self.n + 1, dtype=np.int64)
        for r in self.ok:
            np.add.at(h, np.asarray(r.detected_taus, dtype=np.int64), 1)
        return h


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    cells: list[CellResult]

    def cell(self, name: str, method: str) -> CellResult:
        method = _method_kind(method)
        for c in self.cells:
            if c.cell == name and c.method == method:
                return c
        raise KeyError((name, method))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell", "method", "n", "P", "reps", "failures", "mean_abs_m_error", "mean_mae"])
        for c in self.cells:
            w.writerow([c.cell, c.method, c.n, c.P, len(c.ok), len(c.failures),
                        repr(c.mean_abs_m_error), repr(c.mean_mae)])
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        cells = []
        for c in self.cells:
            h = c.histogram()
            nz = np.flatnonzero(h)
            cells.append({
                "cell": c.cell,
                "method": c.method,
                "n": c.n,
                "P": c.P,
                "true_taus": list(c.true_taus),
                "reps_ok": len(c.ok),
                "failures": [{"rep": r, "error": msg} for r, msg in c.failures],
                "mean_abs_m_error": _finite(c.mean_abs_m_error),
                "mean_mae": _finite(c.mean_mae),
                "histogram": {"bin_width": 1, "counts": {str(int(t)): int(h[t]) for t in nz}},
                "replicates": [None if r is None else
                               {"abs_m_error": r.abs_m_error, "mae": r.mae,
                                "detected_taus": r.detected_taus} for r in c.records],
            })
        return {"cells": cells}

    def runtimes(self) -> dict:
        """Wall-clock seconds per cell; kept apart from the reproducible results."""
        return {f"{c.cell}/{c.method}": c.runtime for c in self.cells}


def _finite(x: float):
    return x if math.isfinite(x) else None


def _generate(sc, seed_seq):
    if isinstance(sc, BernoulliScenario):
        return gen_bernoulli(sc, seed_seq)
    return gen_lmec(sc, seed_seq)


def run_benchmark(config: BenchmarkConfig, threads: int = 1) -> BenchmarkResult:
    """Run every cell of ``config``; replicate failures are recorded, not raised."""
    tasks = [(ci, r) for ci in range(len(config.cells)) for r in range(config.reps)]

    def work(task):
        ci, r = task
        _, sc, methods = config.cells[ci]
        ss = np.random.SeedSequence(config.seed, spawn_key=(ci, r))
        try:
            panel, truth, taus = _generate(sc, ss)
        except Exception as exc:  # recorded per cell
            return [f"{type(exc).__name__}: {exc}"] * len(methods)
        out = []
        for m in methods:
            try:
                out.append(evaluate(m, panel, truth, taus, config.penalty_c, config.center))
            except Exception as exc:
                out.append(f"{type(exc).__name__}: {exc}")
        return out

    threads = max(1, int(threads))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(work, tasks))
    else:
        outputs = [work(t) for t in tasks]

    results = []
    for ci, (name, sc, methods) in enumerate(config.cells):
        rows = outputs[ci * config.reps:(ci + 1) * config.reps]
        for mi, m in enumerate(methods):
            cr = CellResult(name, m, sc.n, sc.P, sc.true_taus, [])
            for r, row in enumerate(rows):
                item = row[mi]
                if isinstance(item, str):
                    cr.records.append(None)
                    cr.failures.append((r, item))
                else:
                    cr.records.append(item)
            results.append(cr)
    return BenchmarkResult(config, results)


# ---------------------------------------------------------------------------
# grid config files


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _methods(value: str) -> tuple[str, ...]:
    return tuple(m.strip() for m in value.split(",") if m.strip())


def load_grid(path, reps: int | None = None, seed: int | None = None) -> BenchmarkConfig:
    """Read a benchmark grid from an INI file.

    A ``[benchmark]`` section sets ``reps``, ``seed``, ``methods``,
    ``penalty_c`` and ``center``; every ``[cell NAME]`` section declares one
    scenario::

        [benchmark]
        reps = 100
        methods = lmec-hb, lmec-ub

        [cell m1_p20_n1000]
        scenario = one_change
        n = 1000
        ki = 5

        [cell daily]
        scenario = daily
        replicates = 56
        global_change = true
        group_change = none
        methods = glmer-bernoulli

    ``reps`` and ``seed`` arguments override the file.
    """
    path = os.fspath(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ValueError(f"{path}: cannot read grid config ({exc.strerror})") from exc
    except configparser.Error as exc:
        raise ValueError(f"{path}: malformed grid config: {exc}") from exc
    try:
        return _grid_from_parser(parser, reps, seed)
    except (ValueError, KeyError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


def _grid_from_parser(parser, reps, seed) -> BenchmarkConfig:
    base = parser["benchmark"] if parser.has_section("benchmark") else {}
    default_methods = _methods(base.get("methods", "lmec-hb, lmec-ub"))
    cells = []
    for section in parser.sections():
        if not section.startswith("cell"):
            if section != "benchmark":
                raise ValueError(f"unknown section [{section}]")
            continue
        name = section[4:].strip()
        if not name:
            raise ValueError("cell sections need a name: [cell NAME]")
        sec = parser[section]
        known = {"scenario", "n", "ki", "phi", "replicates", "global_change", "group_change",
                 "global_p", "methods"}
        extra = set(sec.keys()) - known
        if extra:
            raise ValueError(f"cell {name!r}: unknown keys {sorted(extra)}")
        scen = sec.get("scenario", "").strip()
        if scen in HORIZONS:
            gp = sec.get("global_p")
            sc = BernoulliScenario(scen, sec.getint("replicates", 56),
                                   _parse_bool(sec.get("global_change", "true")),
                                   sec.get("group_change", "none").strip(),
                                   global_p=None if gp is None else float(gp))
            methods = _methods(sec.get("methods", "glmer-bernoulli"))
        else:
            phi = sec.get("phi")
            sc = LmecScenario(scen, sec.getint("n", 1000), sec.getint("ki", 5),
                              None if phi is None else float(phi))
            methods = _methods(sec.get("methods", ",".join(default_methods)))
        cells.append((name, sc, methods))
    if not cells:
        raise ValueError("grid config declares no [cell ...] sections")
    pc = base.get("penalty_c")
    return BenchmarkConfig(
        cells,
        reps=int(base.get("reps", DEFAULT_REPS)) if reps is None else reps,
        seed=int(base.get("seed", 0)) if seed is None else seed,
        penalty_c=None if pc in (None, "") else float(pc),
        center=_parse_bool(base.get("center", "false")),
    )


def paper_grid(reps: int = DEFAULT_REPS, seed: int = 0) -> BenchmarkConfig:
    """The full covariance grid: five scenarios x n in {500, 1000} x k_i in {5, 15}."""
    cells = []
    for sid in LMEC_SCENARIOS:
        for k in (5, 15):
            for n in (500, 1000):
                sc = LmecScenario(sid, n, k)
                cells.append((sc.name, sc, ("lmec-hb", "lmec-ub")))
    return BenchmarkConfig(cells, reps=reps, seed=seed)


def dumps_json(obj) -> str:
    """Deterministic JSON text used for every result file."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
