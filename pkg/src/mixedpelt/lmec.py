"""Block-structured covariance segment model.

The covariance of a ``P``-vector whose coordinates fall into ``K`` groups is
modelled as

    Sigma = D + Z Sigma_mu Z'

where ``Z`` is the ``P x K`` group indicator, ``Sigma_mu`` the ``K x K``
random-effect covariance and ``D`` diagonal noise: one variance per group
(uniform blocks, "UB") or one per series (heterogeneous blocks, "HB").
Parameters are estimated by block averages of the sample covariance and the
Gaussian likelihood is evaluated through the Woodbury identity, so a segment
never needs a ``P x P`` factorisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .panel import GroupSpec, PanelError, TimeSeriesPanel
from .pelt import CostModel

__all__ = [
    "UB",
    "HB",
    "BlockCovParams",
    "SampleCov",
    "sample_cov",
    "estimate_ub",
    "estimate_hb",
    "assemble_cov",
    "logdet_quadform",
    "lmec_cost",
    "param_count",
    "LmecCost",
]

UB = "UB"
HB = "HB"
_STRUCT = {UB: 0, HB: 1}

NOISE_FLOOR = 1e-8
RIDGE = 1e-8
_LOG2PI = math.log(2.0 * math.pi)


def _structure(structure: str) -> str:
    s = str(structure).upper().replace("LMEC-", "")
    if s not in _STRUCT:
        raise ValueError(f"unknown covariance structure {structure!r}")
    return s


@dataclass(frozen=True, eq=False)
class BlockCovParams:
    """Fitted block covariance.

    ``sigma_eps`` has one entry per group for UB and one per series for HB.
    """

    structure: str
    sigma_mu: np.ndarray
    sigma_eps: np.ndarray

    def noise_diagonal(self, k: GroupSpec) -> np.ndarray:
        if self.structure == UB:
            return np.repeat(self.sigma_eps, k.sizes)
        return np.asarray(self.sigma_eps, dtype=float)

    def correlation(self, k: GroupSpec) -> np.ndarray:
        S = assemble_cov(self, k)
        sd = np.sqrt(np.diag(S))
        R = S / np.outer(sd, sd)
        np.fill_diagonal(R, 1.0)
        return R


@dataclass(frozen=True, eq=False)
class SampleCov:
    S: np.ndarray
    groups: GroupSpec
    dof: int = 0

    def block(self, u: int, v: int) -> np.ndarray:
        off = self.groups.offsets
        return self.S[off[u]:off[u + 1], off[v]:off[v + 1]]

    def block_sums(self) -> np.ndarray:
        Z = self.groups.indicator()
        return Z.T @ self.S @ Z

    def block_traces(self) -> np.ndarray:
        return np.bincount(self.groups.group_of, weights=np.diag(self.S), minlength=self.groups.K)


def param_count(structure: str, k: GroupSpec) -> int:
    """``K + K(K+1)/2`` for UB, ``P + K(K+1)/2`` for HB."""
    K = k.K
    noise = K if _structure(structure) == UB else k.P
    return noise + K * (K + 1) // 2


def sample_cov(panel, groups: GroupSpec | None = None, center: bool = True) -> SampleCov:
    """Sample covariance of a panel slice (or raw ``m x P`` array).

    With ``center=True`` this is the usual ``1/(m-1)`` estimator about the
    slice mean; with ``center=False`` it is ``(1/m) sum y y'`` about zero.
    """
    if isinstance(panel, TimeSeriesPanel):
        x, groups = panel.values, panel.groups
    else:
        x = np.asarray(panel, dtype=float)
        if groups is None:
            raise ValueError("groups required for a raw array")
    m = x.shape[0]
    if center:
        if m < 2:
            raise PanelError("sample covariance needs at least 2 rows")
        xc = x - x.mean(axis=0)
        dof = m - 1
    else:
        if m < 1:
            raise PanelError("sample covariance needs at least 1 row")
        xc = x
        dof = m
    S = xc.T @ xc / dof
    S = 0.5 * (S + S.T)
    return SampleCov(S, groups, dof)


# ---------------------------------------------------------------------------
# numeric core, shared by the direct route and the cumulative kernel


@njit(cache=True, nogil=True)
def _chol(A):
    K = A.shape[0]
    L = np.zeros_like(A)
    for i in range(K):
        for j in range(i + 1):
            s = A[i, j]
            for r in range(j):
                s -= L[i, r] * L[j, r]
            if i == j:
                if not (s > 0.0) or not np.isfinite(s):
                    return L, False
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L, True


@njit(cache=True, nogil=True)
def _chol_inverse(L):
    K = L.shape[0]
    Linv = np.zeros_like(L)
    for i in range(K):
        Linv[i, i] = 1.0 / L[i, i]
        for j in range(i):
            s = 0.0
            for r in range(j, i):
                s -= L[i, r] * Linv[r, j]
            Linv[i, j] = s / L[i, i]
    return Linv.T @ Linv


@njit(cache=True, nogil=True)
def _moments(B, T, diagS, sizes, hb):
    """Block-average estimates from block sums ``B``, block traces ``T``."""
    K = sizes.shape[0]
    mu = np.empty((K, K))
    for u in range(K):
        ku = sizes[u]
        for v in range(K):
            if u == v:
                mu[u, u] = (B[u, u] - T[u]) / (ku * (ku - 1.0))
            else:
                mu[u, v] = B[u, v] / (ku * float(sizes[v]))
    for u in range(K):
        for v in range(u):
            a = 0.5 * (mu[u, v] + mu[v, u])
            mu[u, v] = a
            mu[v, u] = a
    P = diagS.shape[0]
    d = np.empty(P)
    j = 0
    for u in range(K):
        avg = T[u] / sizes[u] - mu[u, u]
        for _ in range(sizes[u]):
            d[j] = diagS[j] - mu[u, u] if hb else avg
            j += 1
    return mu, d


@njit(cache=True, nogil=True)
def _group_weights(d, sizes):
    K = sizes.shape[0]
    w = np.zeros(K)
    j = 0
    for u in range(K):
        for _ in range(sizes[u]):
            w[u] += 1.0 / d[j]
            j += 1
    return w


@njit(cache=True, nogil=True)
def _capacitance(mu, w):
    K = w.shape[0]
    M = np.empty((K, K))
    sw = np.sqrt(w)
    for u in range(K):
        for v in range(K):
            M[u, v] = sw[u] * mu[u, v] * sw[v]
        M[u, u] += 1.0
    return M


@njit(cache=True, nogil=True)
def _repair(mu, d, sizes, scale):
    """Floor noise variances, clip Sigma_mu to PSD, ridge if still not PD."""
    if not (scale > 0.0) or not np.isfinite(scale):
        scale = 1.0
    floor = NOISE_FLOOR * scale
    d = d.copy()
    for j in range(d.shape[0]):
        if not (d[j] >= floor):
            d[j] = floor
    _, pd = _chol(mu)
    if pd:
        mu = mu.copy()
    else:
        evals, evecs = np.linalg.eigh(mu)
        if evals[0] < 0.0:
            for i in range(evals.shape[0]):
                if evals[i] < 0.0:
                    evals[i] = 0.0
            mu = (evecs * evals) @ evecs.T
            mu = 0.5 * (mu + mu.T)
        else:
            mu = mu.copy()
    w = _group_weights(d, sizes)
    L, ok = _chol(_capacitance(mu, w))
    if not ok:
        tr = d.sum()
        for u in range(sizes.shape[0]):
            tr += sizes[u] * mu[u, u]
        d = d + RIDGE * tr / d.shape[0]
    return mu, d


@njit(cache=True, nogil=True)
def _woodbury_terms(mu, d, sizes, V, trDinvS):
    """``log|Sigma|`` and ``tr(Sigma^-1 S)`` from K-level summaries.

    ``V = Z' D^-1 S D^-1 Z`` and ``trDinvS = tr(D^-1 S)``. Uses
    ``log|Sigma| = log|D| + log|I + W^1/2 Sigma_mu W^1/2|`` with
    ``W = Z' D^-1 Z``, which stays valid for singular ``Sigma_mu``.
    """
    w = _group_weights(d, sizes)
    L, ok = _chol(_capacitance(mu, w))
    if not ok:
        return np.nan, np.nan
    logdet = 0.0
    for j in range(d.shape[0]):
        logdet += math.log(d[j])
    K = w.shape[0]
    for u in range(K):
        logdet += 2.0 * math.log(L[u, u])
    Minv = _chol_inverse(L)
    corr = 0.0
    for u in range(K):
        for v in range(K):
            a = -Minv[u, v]
            if u == v:
                a += 1.0
            corr += a * V[v, u] / math.sqrt(w[u] * w[v])
    return logdet, trDinvS - corr


@njit(cache=True, nogil=True)
def _fit_and_score(B, T, diagS, S, sizes, hb, scale):
    """Estimate, repair and score one segment from its sample covariance.

    For UB only block sums are needed (``S`` may be empty); HB needs the
    packed lower triangle of ``S`` (row-major) for the per-series weighting.
    """
    mu, d = _moments(B, T, diagS, sizes, hb)
    mu, d = _repair(mu, d, sizes, scale)
    K = sizes.shape[0]
    V = np.zeros((K, K))
    trDinvS = 0.0
    if hb:
        P = d.shape[0]
        g = np.empty(P, dtype=np.int64)
        j = 0
        for u in range(K):
            for _ in range(sizes[u]):
                g[j] = u
                j += 1
        inv = 1.0 / d
        idx = 0
        for a in range(P):
            ga = g[a]
            ia = inv[a]
            for b in range(a):
                V[ga, g[b]] += S[idx] * ia * inv[b]
                idx += 1
            x = S[idx] * ia
            trDinvS += x
            V[ga, ga] += 0.5 * x * ia
            idx += 1
        for u in range(K):
            for v in range(u + 1):
                x = V[u, v] + V[v, u]
                V[u, v] = x
                V[v, u] = x
    else:
        off = 0
        dg = np.empty(K)
        for u in range(K):
            dg[u] = d[off]
            off += sizes[u]
        for u in range(K):
            trDinvS += T[u] / dg[u]
            for v in range(K):
                V[u, v] = B[u, v] / (dg[u] * dg[v])
    logdet, tr = _woodbury_terms(mu, d, sizes, V, trDinvS)
    return logdet, tr


# ---------------------------------------------------------------------------
# public direct-route API


def _check_k(S: SampleCov, k: GroupSpec):
    if S.S.shape != (k.P, k.P):
        raise ValueError(f"sample covariance is {S.S.shape}, group spec implies P={k.P}")
    k.require_pairs()


def _estimate(S: SampleCov, k: GroupSpec, hb: bool) -> BlockCovParams:
    _check_k(S, k)
    sizes = np.asarray(k.sizes, dtype=np.int64)
    diag = np.ascontiguousarray(np.diag(S.S))
    mu, d = _moments(S.block_sums(), S.block_traces(), diag, sizes, hb)
    mu, d = _repair(mu, d, sizes, float(diag.mean()))
    if hb:
        return BlockCovParams(HB, mu, d)
    return BlockCovParams(UB, mu, d[k.offsets[:-1]])


def estimate_ub(S: SampleCov, k: GroupSpec) -> BlockCovParams:
    """Uniform-block estimates.

    Off-diagonal ``sigma_mu[u, v]`` is the average of block ``S_uv``; the
    diagonal ``sigma_mu[u, u]`` the average off-diagonal entry of ``S_uu``;
    the group noise variance is the mean diagonal of ``S_uu`` minus
    ``sigma_mu[u, u]``. The result is repaired to be positive definite.
    """
    return _estimate(S, k, hb=False)


def estimate_hb(S: SampleCov, k: GroupSpec) -> BlockCovParams:
    """Heterogeneous-block estimates: as UB, but noise ``S_jj - sigma_mu[u, u]`` per series."""
    return _estimate(S, k, hb=True)


def assemble_cov(params: BlockCovParams, k: GroupSpec) -> np.ndarray:
    """Dense ``P x P`` covariance ``D + Z Sigma_mu Z'``."""
    mu = np.asarray(params.sigma_mu, dtype=float)
    if mu.shape != (k.K, k.K):
        raise ValueError(f"sigma_mu is {mu.shape}, group spec has K={k.K}")
    expect = k.K if params.structure == UB else k.P
    if np.shape(params.sigma_eps) != (expect,):
        raise ValueError(f"{params.structure} noise vector must have length {expect}")
    g = k.group_of
    Sigma = mu[np.ix_(g, g)].copy()
    Sigma[np.diag_indices(k.P)] += params.noise_diagonal(k)
    return Sigma


def logdet_quadform(params: BlockCovParams, k: GroupSpec, rows: np.ndarray) -> tuple[float, float]:
    """``log|Sigma|`` and ``sum_t y_t' Sigma^-1 y_t`` in O(m P K + K^3).

    ``rows`` is an ``m x P`` array, already centred as the caller wants.
    """
    y = np.atleast_2d(np.asarray(rows, dtype=float))
    d = params.noise_diagonal(k)
    if y.shape[1] != k.P:
        raise ValueError("row width does not match group spec")
    sizes = np.asarray(k.sizes, dtype=np.int64)
    U = (y / d) @ k.indicator()
    V = U.T @ U
    trDinv = float(np.sum(y * y / d))
    logdet, q = _woodbury_terms(np.asarray(params.sigma_mu, dtype=float), d, sizes, V, trDinv)
    if not np.isfinite(logdet):
        raise RuntimeError("covariance is not positive definite after repair (internal defect)")
    return float(logdet), float(q)


def lmec_cost(panel: TimeSeriesPanel, s: int, e: int, structure: str = HB,
              center: bool = False) -> float:
    """Twice the negative Gaussian log-likelihood of rows ``s+1..e``.

    Parameters are estimated on the segment itself. The model is zero-mean;
    with ``center=True`` rows are taken about the segment mean instead.
    """
    structure = _structure(structure)
    seg = panel.slice(s, e)
    m = e - s
    Sc = sample_cov(seg, center=center)
    params = _estimate(Sc, panel.groups, hb=structure == HB)
    y = seg.values - seg.values.mean(axis=0) if center else seg.values
    logdet, q = logdet_quadform(params, panel.groups, y)
    return m * panel.P * _LOG2PI + m * logdet + q


# ---------------------------------------------------------------------------
# cumulative-statistics cost model for the segmentation search


@njit(cache=True, nogil=True)
def _ub_costs(starts, e, cy, cG, cQ, sizes, center, P):
    K = sizes.shape[0]
    out = np.empty(starts.shape[0])
    empty = np.zeros(0)
    no_diag = np.zeros(P)
    for i in range(starts.shape[0]):
        s = starts[i]
        m = e - s
        dof = m - 1.0 if center else float(m)
        B = (cG[e] - cG[s]).copy()
        T = (cQ[e] - cQ[s]).copy()
        if center:
            gs = np.zeros(K)
            ssq = np.zeros(K)
            j = 0
            for u in range(K):
                for _ in range(sizes[u]):
                    ybar = (cy[e, j] - cy[s, j]) / m
                    gs[u] += ybar
                    ssq[u] += ybar * ybar
                    j += 1
            for u in range(K):
                T[u] -= m * ssq[u]
                for v in range(K):
                    B[u, v] -= m * gs[u] * gs[v]
        B /= dof
        T /= dof
        # UB noise comes from block traces; the diagonal argument only sets P
        logdet, tr = _fit_and_score(B, T, no_diag, empty, sizes, False, T.sum() / P)
        out[i] = m * P * _LOG2PI + m * logdet + dof * tr
    return out


@njit(cache=True, nogil=True)
def _hb_costs(starts, e, cy, cA, sizes, center, P):
    """``cA`` holds running sums of the packed lower triangle of ``y y'``."""
    K = sizes.shape[0]
    out = np.empty(starts.shape[0])
    S = np.empty(cA.shape[1])
    ybar = np.empty(P)
    diag = np.empty(P)
    g = np.empty(P, dtype=np.int64)
    j = 0
    for u in range(K):
        for _ in range(sizes[u]):
            g[j] = u
            j += 1
    for i in range(starts.shape[0]):
        s = starts[i]
        m = e - s
        dof = m - 1.0 if center else float(m)
        for a in range(P):
            ybar[a] = (cy[e, a] - cy[s, a]) / m if center else 0.0
        B = np.zeros((K, K))
        T = np.zeros(K)
        idx = 0
        for a in range(P):
            ga = g[a]
            ya = m * ybar[a]
            for b in range(a):
                v = (cA[e, idx] - cA[s, idx] - ya * ybar[b]) / dof
                S[idx] = v
                B[ga, g[b]] += v
                idx += 1
            v = (cA[e, idx] - cA[s, idx] - ya * ybar[a]) / dof
            S[idx] = v
            diag[a] = v
            T[ga] += v
            idx += 1
        for u in range(K):
            B[u, u] = 2.0 * B[u, u] + T[u]
            for v in range(u):
                x = B[u, v] + B[v, u]
                B[u, v] = x
                B[v, u] = x
        logdet, tr = _fit_and_score(B, T, diag, S, sizes, True, diag.sum() / P)
        out[i] = m * P * _LOG2PI + m * logdet + dof * tr
    return out


class LmecCost(CostModel):
    """LMEC segment cost backed by cumulative sums.

    Segment statistics come from running sums of ``y``, and of ``Z'y y'Z``
    and group sums of squares (UB) or full ``y y'`` (HB), so each cost is
    O(P + K^3) for UB and O(P^2 + K^3) for HB.
    """

    def __init__(self, panel: TimeSeriesPanel, structure: str = HB, center: bool = False,
                 cache: bool = False):
        structure = _structure(structure)
        panel.groups.require_pairs()
        self.structure = structure
        self.model_kind = "lmec-" + structure.lower()
        self.panel = panel
        self.groups = panel.groups
        self.center = bool(center)
        self.P = panel.P
        self.K = panel.K
        super().__init__(panel.n, param_count(structure, panel.groups), 2 * panel.P, cache=cache)
        y = panel.values
        if self.center:
            # shifting by a constant leaves centred costs unchanged and keeps sums small
            y = y - y.mean(axis=0)
        self._sizes = np.asarray(panel.groups.sizes, dtype=np.int64)
        zero = np.zeros((1,) + y.shape[1:])
        self._cy = np.concatenate([zero, np.cumsum(y, axis=0)])
        if structure == UB:
            gy = y @ panel.groups.indicator()
            G = gy[:, :, None] * gy[:, None, :]
            self._cG = np.concatenate([np.zeros((1, self.K, self.K)), np.cumsum(G, axis=0)])
            Q = (y * y) @ panel.groups.indicator()
            self._cQ = np.concatenate([np.zeros((1, self.K)), np.cumsum(Q, axis=0)])
        else:
            rows, cols = np.tril_indices(self.P)
            A = y[:, rows] * y[:, cols]
            self._cA = np.concatenate([np.zeros((1, A.shape[1])), np.cumsum(A, axis=0)])

    def _segment_costs(self, starts, e):
        starts = np.ascontiguousarray(starts, dtype=np.int64)
        if len(starts) == 0:
            return np.empty(0)
        if starts.min() < 0 or e > self.n or np.any(e - starts < (2 if self.center else 1)):
            raise PanelError(f"invalid segment end {e} for starts {starts.min()}..{starts.max()}")
        if self.structure == UB:
            return _ub_costs(starts, int(e), self._cy, self._cG, self._cQ, self._sizes,
                             self.center, self.P)
        return _hb_costs(starts, int(e), self._cy, self._cA, self._sizes, self.center, self.P)

    def fit(self, s, e) -> BlockCovParams:
        Sc = sample_cov(self.panel.slice(s, e), center=self.center)
        return _estimate(Sc, self.groups, hb=self.structure == HB)
