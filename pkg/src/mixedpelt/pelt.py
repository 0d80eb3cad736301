"""Penalised optimal segmentation by dynamic programming with PELT pruning.

The objective is

    F(n) = min over segmentations of  sum_m cost(tau_m, tau_{m+1}) + beta * M

with every segment at least ``min_seg`` long. :func:`pelt_detect` prunes
last-changepoint candidates; :func:`exhaustive_detect` is the unpruned
O(n^2) recursion used as its oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .panel import Segmentation

__all__ = [
    "CostModel",
    "FunctionCost",
    "PenaltySpec",
    "DetectionResult",
    "CostEvaluationError",
    "DetectionError",
    "pelt_detect",
    "exhaustive_detect",
    "default_penalty",
    "penalty_constant",
    "default_min_seg",
    "MODEL_KINDS",
]

MODEL_KINDS = ("glmer-bernoulli", "glmer-normal", "lmec-ub", "lmec-hb")

TIE_TOL = 1e-12
EXHAUSTIVE_LIMIT = 2000


class DetectionError(ValueError):
    """Invalid detection request."""


class CostEvaluationError(RuntimeError):
    """A segment cost failed; ``segment`` holds the offending ``(s, e)``."""

    def __init__(self, s: int, e: int, cause: BaseException):
        super().__init__(f"cost evaluation failed on segment ({s}, {e}]: {cause}")
        self.segment = (s, e)
        self.cause = cause


class CostModel:
    """Segment cost: twice the negative log-likelihood of rows ``s+1..e``.

    Subclasses implement :meth:`_segment_cost` and may override
    :meth:`_segment_costs` with a vectorised version. With ``cache=True``
    evaluated costs are memoised on ``(s, e)``.
    """

    model_kind: str = "custom"

    def __init__(self, n: int, param_count: int, default_min_seg: int, cache: bool = False):
        self.n = int(n)
        self.param_count = int(param_count)
        self.default_min_seg = int(default_min_seg)
        self._cache: dict[tuple[int, int], float] | None = {} if cache else None

    def _segment_cost(self, s: int, e: int) -> float:
        raise NotImplementedError

    def _segment_costs(self, starts: np.ndarray, e: int) -> np.ndarray:
        return np.array([self._segment_cost(int(s), e) for s in starts], dtype=float)

    def cost(self, s: int, e: int) -> float:
        s, e = int(s), int(e)
        cache = self._cache
        if cache is not None and (s, e) in cache:
            return cache[(s, e)]
        try:
            value = float(self._segment_costs(np.array([s], dtype=np.int64), e)[0])
        except CostEvaluationError:
            raise
        except Exception as exc:
            raise CostEvaluationError(s, e, exc) from exc
        if cache is not None:
            cache[(s, e)] = value
        return value

    def costs(self, starts: Sequence[int], e: int) -> np.ndarray:
        """Costs of segments ``(s, e]`` for every ``s`` in ``starts``."""
        starts = np.asarray(starts, dtype=np.int64)
        cache = self._cache
        if cache is None:
            try:
                return np.asarray(self._segment_costs(starts, int(e)), dtype=float)
            except CostEvaluationError:
                raise
            except Exception:
                # locate the offending segment
                for s in starts:
                    self.cost(int(s), e)
                raise
        out = np.empty(len(starts))
        todo = []
        for i, s in enumerate(starts.tolist()):
            v = cache.get((s, e))
            if v is None:
                todo.append(i)
            else:
                out[i] = v
        if todo:
            sub = starts[todo]
            try:
                vals = np.asarray(self._segment_costs(sub, int(e)), dtype=float)
            except Exception:
                for s in sub:
                    self.cost(int(s), e)
                raise
            for i, v in zip(todo, vals.tolist()):
                out[i] = v
                cache[(int(starts[i]), int(e))] = v
        return out

    def fit(self, s: int, e: int) -> Any:
        """Fitted parameter bundle for segment ``(s, e]`` (None if not supported)."""
        return None


class FunctionCost(CostModel):
    """Wrap a plain ``cost(s, e)`` callable."""

    def __init__(self, fn: Callable[[int, int], float], n: int, param_count: int = 1,
                 default_min_seg: int = 1, cache: bool = True):
        super().__init__(n, param_count, default_min_seg, cache=cache)
        self._fn = fn

    def _segment_cost(self, s, e):
        return float(self._fn(s, e))


@dataclass(frozen=True)
class PenaltySpec:
    """Per-changepoint penalty ``beta`` (typically ``C * log(n)``)."""

    beta: float
    C: float | None = None

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise DetectionError(f"penalty must be a finite non-negative number, got {self.beta}")


@dataclass
class DetectionResult:
    segmentation: Segmentation
    objective: float
    penalty: float
    min_seg: int
    segment_costs: list[float]
    segment_fits: list[Any] = field(default_factory=list)
    pruning_stats: np.ndarray | None = None

    @property
    def changepoints(self) -> tuple[int, ...]:
        return self.segmentation.changepoints

    @property
    def M(self) -> int:
        return self.segmentation.M

    def recomputed_objective(self) -> float:
        return float(np.sum(self.segment_costs)) + self.penalty * self.M


def penalty_constant(model_kind: str, p: int | None = None, K: int | None = None) -> float:
    """BIC-like penalty constant ``C``.

    GLMER uses ``p``, the number of replicate series per group (56 for 56
    days of each of four people); both LMEC structures use the UB parameter
    count ``K + K(K+1)/2``.
    """
    kind = _normalise_kind(model_kind)
    if kind.startswith("glmer"):
        if p is None:
            raise DetectionError("GLMER penalty needs the series count p")
        return float(p)
    if K is None:
        raise DetectionError("LMEC penalty needs the group count K")
    return float(K + K * (K + 1) // 2)


def default_penalty(model_kind: str, n: int, p: int | None = None, K: int | None = None,
                    C: float | None = None) -> PenaltySpec:
    """``C * log(n)`` with ``C`` from :func:`penalty_constant` unless given."""
    if n < 2:
        raise DetectionError("penalty needs n >= 2")
    if C is None:
        C = penalty_constant(model_kind, p, K)
    return PenaltySpec(float(C) * math.log(n), float(C))


def default_min_seg(model_kind: str, p: int | None = None, P: int | None = None) -> int:
    """``p`` for GLMER, ``2P`` for both LMEC structures."""
    kind = _normalise_kind(model_kind)
    if kind.startswith("glmer"):
        if p is None:
            raise DetectionError("GLMER minimum segment length needs p")
        return max(int(p), 1)
    if P is None:
        raise DetectionError("LMEC minimum segment length needs the panel width P")
    return 2 * int(P)


def _normalise_kind(kind: str) -> str:
    kind = kind.lower().replace("_", "-")
    if kind in ("glmer", "lmec"):
        return kind
    if kind not in MODEL_KINDS:
        raise DetectionError(f"unknown model kind {kind!r}")
    return kind


def _resolve(model: CostModel, n, penalty, min_seg, force):
    n = model.n if n is None else int(n)
    if n > model.n:
        raise DetectionError(f"n={n} exceeds the cost model length {model.n}")
    beta = penalty.beta if isinstance(penalty, PenaltySpec) else float(penalty)
    PenaltySpec(beta)
    if min_seg is None:
        min_seg = model.default_min_seg
    min_seg = int(min_seg)
    if min_seg < 1:
        raise DetectionError("min_seg must be a positive integer")
    if min_seg < model.default_min_seg and not force:
        raise DetectionError(
            f"min_seg={min_seg} is below the model default {model.default_min_seg}; pass force=True")
    if n < min_seg:
        raise DetectionError(f"series length {n} is shorter than min_seg={min_seg}")
    return n, beta, min_seg


def _tol(x: float) -> float:
    return TIE_TOL * max(1.0, abs(x))


def _choose(vals: np.ndarray) -> int:
    """Index of the minimum, preferring the earliest within the tie tolerance."""
    best = vals.min()
    return int(np.flatnonzero(vals <= best + _tol(best))[0])


def _finish(model, n, beta, min_seg, F, last, stats, fits) -> DetectionResult:
    cps = []
    t = n
    while t > 0:
        t = int(last[t])
        if t > 0:
            cps.append(t)
    seg = Segmentation(tuple(reversed(cps)), n)
    costs = [model.cost(s, e) for s, e in seg.segments()]
    seg_fits = [model.fit(s, e) for s, e in seg.segments()] if fits else []
    return DetectionResult(seg, float(F[n]), beta, min_seg, costs, seg_fits, stats)


def pelt_detect(model: CostModel, penalty: PenaltySpec | float, n: int | None = None,
                min_seg: int | None = None, force: bool = False,
                fits: bool = True, prune_slack: float = 0.0) -> DetectionResult:
    """Exact penalised segmentation with PELT pruning.

    A candidate ``tau`` is dropped once ``F(tau) + cost(tau, t) - K > F(t)``
    at some ``t``, with ``K = prune_slack``; with a minimum segment length it
    stays available until ``t + min_seg``, the first time ``t`` itself can
    replace it. The result is exact when the cost satisfies
    ``cost(a, t) + cost(t, b) - K <= cost(a, b)`` for all ``a < t < b``.

    Parameters
    ----------
    model : CostModel
        Segment cost.
    penalty : PenaltySpec or float
        Per-changepoint penalty ``beta``.
    n : int, optional
        Number of leading time points to segment (default ``model.n``).
    min_seg : int, optional
        Minimum segment length (default ``model.default_min_seg``). Values
        below the model default need ``force=True``.
    fits : bool
        Attach fitted parameters of every segment to the result.
    prune_slack : float
        Pruning slack ``K >= 0``. The mixed-model costs are not exactly
        subadditive, so a positive slack keeps more candidates; ``inf``
        disables pruning.
    """
    n, beta, min_seg = _resolve(model, n, penalty, min_seg, force)
    prune_slack = float(prune_slack)
    if not prune_slack >= 0.0:
        raise DetectionError(f"prune_slack must be >= 0, got {prune_slack}")
    F = np.full(n + 1, np.inf)
    F[0] = -beta
    last = np.zeros(n + 1, dtype=np.int64)
    expiry = np.full(n + 1, np.iinfo(np.int64).max, dtype=np.int64)
    cands = np.empty(0, dtype=np.int64)
    stats = np.zeros(n + 1, dtype=np.int64)
    for t in range(min_seg, n + 1):
        new = t - min_seg
        if np.isfinite(F[new]):
            cands = np.append(cands, new)
        cands = cands[expiry[cands] > t]
        c = model.costs(cands, t)
        vals = F[cands] + c + beta
        i = _choose(vals)
        F[t] = vals[i]
        last[t] = cands[i]
        stats[t] = len(cands)
        prune = F[cands] + c - prune_slack > F[t] + _tol(F[t])
        if prune.any():
            hit = cands[prune]
            expiry[hit] = np.minimum(expiry[hit], t + min_seg)
    return _finish(model, n, beta, min_seg, F, last, stats, fits)


def exhaustive_detect(model: CostModel, penalty: PenaltySpec | float, n: int | None = None,
                      min_seg: int | None = None, force: bool = False,
                      fits: bool = True) -> DetectionResult:
    """Unpruned O(n^2) optimal partitioning; the oracle for :func:`pelt_detect`."""
    n, beta, min_seg = _resolve(model, n, penalty, min_seg, force)
    if n > EXHAUSTIVE_LIMIT and not force:
        raise DetectionError(f"exhaustive search limited to n <= {EXHAUSTIVE_LIMIT}; pass force=True")
    F = np.full(n + 1, np.inf)
    F[0] = -beta
    last = np.zeros(n + 1, dtype=np.int64)
    stats = np.zeros(n + 1, dtype=np.int64)
    for t in range(min_seg, n + 1):
        taus = np.arange(0, t - min_seg + 1, dtype=np.int64)
        taus = taus[np.isfinite(F[taus])]
        vals = F[taus] + model.costs(taus, t) + beta
        i = _choose(vals)
        F[t] = vals[i]
        last[t] = taus[i]
        stats[t] = len(taus)
    return _finish(model, n, beta, min_seg, F, last, stats, fits)
