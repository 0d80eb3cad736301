"""Random-intercept GLMM segment model.

Within a segment every observation of series ``j`` in group ``g`` follows

    y | b_g ~ Distr(mu),   link(mu) = beta + b_g,   b_g ~ N(0, sigma_b^2)

with a Bernoulli/logit or Normal/identity family. The fixed part is an
intercept only and the random part one intercept per group, so a segment
enters the likelihood only through per-group counts, sums and sums of
squares; these come from running sums and make each cost O(K).

Bernoulli marginal likelihoods integrate each group's scalar random effect
with adaptive Gauss-Hermite quadrature. The fixed effect is confined to
``logistic(beta) in [1e-6, 1 - 1e-6]`` and reported probabilities are
clipped to the same range, so all-zero or all-one segments have an attained
optimum and a finite cost.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .panel import BINARY, PanelError, Segmentation, TimeSeriesPanel
from .pelt import CostModel

__all__ = [
    "BERNOULLI",
    "NORMAL",
    "GlmerFit",
    "ConvergenceError",
    "fit_glmer",
    "glmer_cost",
    "bootstrap_fixed_effect_ci",
    "GlmerCost",
]

BERNOULLI = "bernoulli_logit"
NORMAL = "normal_identity"

PROB_EPS = 1e-6
VAR_FLOOR = 1e-8
SIGMA_MIN = math.sqrt(VAR_FLOOR)
SIGMA_MAX = 50.0
MAX_ITER = 200
DEFAULT_NODES = 15

_LO = math.log(PROB_EPS / (1.0 - PROB_EPS))
_HI = -_LO
_LOG2PI = math.log(2.0 * math.pi)


def _family(family: str) -> str:
    f = str(family).lower().replace("-", "_")
    if f in (BERNOULLI, "bernoulli", "glmer_bernoulli", "binomial"):
        return BERNOULLI
    if f in (NORMAL, "normal", "gaussian", "glmer_normal"):
        return NORMAL
    raise ValueError(f"unknown GLMER family {family!r}")


class ConvergenceError(RuntimeError):
    """Outer optimisation did not converge; ``best`` holds the last iterate."""

    def __init__(self, message: str, best: "GlmerFit"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True, eq=False)
class GlmerFit:
    family: str
    beta: float
    b: np.ndarray
    sigma_b2: float
    minus2loglik: float
    n_obs: int
    resid_var: float | None = None
    iterations: int = 0

    @property
    def fixed_effect(self) -> float:
        """``beta`` on the response scale."""
        if self.family == BERNOULLI:
            return _clamped_prob(self.beta)
        return self.beta

    def group_means(self) -> np.ndarray:
        """Per-group conditional mean on the response scale."""
        eta = self.beta + np.asarray(self.b)
        if self.family == BERNOULLI:
            return np.clip(1.0 / (1.0 + np.exp(-eta)), PROB_EPS, 1.0 - PROB_EPS)
        return eta


def _clamped_prob(eta: float) -> float:
    return float(np.clip(1.0 / (1.0 + math.exp(-eta)), PROB_EPS, 1.0 - PROB_EPS))


# ---------------------------------------------------------------------------
# Bernoulli: adaptive Gauss-Hermite marginal likelihood


@njit(cache=True, nogil=True)
def _ell(eta, s, n):
    """Binomial log-likelihood ``s eta - n log(1 + e^eta)`` and two derivatives."""
    if eta >= 0.0:
        q = math.exp(-eta)
        sp = eta + math.log1p(q)
        p = 1.0 / (1.0 + q)
    else:
        q = math.exp(eta)
        sp = math.log1p(q)
        p = q / (1.0 + q)
    return s * eta - n * sp, s - n * p, -n * p * (1.0 - p)


@njit(cache=True, nogil=True)
def _mode(beta, sigma, s, n, z):
    """Maximiser of h(z) = ell(beta + sigma z) - z^2/2, started at ``z``.

    h'' <= -1, so the root of h' lies within |h'(z)| of any z; Newton steps
    leaving that bracket are replaced by bisection.
    """
    _, d1, d2 = _ell(beta + sigma * z, s, n)
    g = sigma * d1 - z
    lo = z - abs(g)
    hi = z + abs(g)
    for _ in range(200):
        if g == 0.0:
            break
        if g > 0.0:
            lo = z
        else:
            hi = z
        zn = z + g / (1.0 - sigma * sigma * d2)
        if not (lo < zn < hi):
            zn = 0.5 * (lo + hi)
        done = abs(zn - z) <= 1e-13 * (1.0 + abs(z))
        z = zn
        _, d1, d2 = _ell(beta + sigma * z, s, n)
        g = sigma * d1 - z
        if done or hi - lo <= 1e-15 * (1.0 + abs(z)):
            break
    return z, 1.0 - sigma * sigma * d2


@njit(cache=True, nogil=True)
def _marginal(beta, sigma, S, N, x, w, modes, want_derivs):
    """Sum over groups of log int exp(ell_g(beta + sigma z)) phi(z) dz.

    ``modes`` holds warm starts and is overwritten with the new modes.
    Derivatives in (beta, sigma) differentiate under the integral on the
    adaptive nodes.
    """
    K = S.shape[0]
    Q = x.shape[0]
    total = 0.0
    grad = np.zeros(2)
    hess = np.zeros((2, 2))
    lw = np.empty(Q)
    zq = np.empty(Q)
    d1q = np.empty(Q)
    d2q = np.empty(Q)
    for g in range(K):
        zhat, curv = _mode(beta, sigma, S[g], N[g], modes[g])
        modes[g] = zhat
        scale = math.sqrt(2.0 / curv)
        top = -np.inf
        for q in range(Q):
            z = zhat + scale * x[q]
            l, d1, d2 = _ell(beta + sigma * z, S[g], N[g])
            v = l + w[q] + x[q] * x[q] - 0.5 * z * z
            lw[q] = v
            zq[q] = z
            d1q[q] = d1
            d2q[q] = d2
            if v > top:
                top = v
        acc = 0.0
        for q in range(Q):
            lw[q] = math.exp(lw[q] - top)
            acc += lw[q]
        total += top + math.log(acc) + math.log(scale) - 0.5 * _LOG2PI
        if want_derivs:
            gb = 0.0
            gs = 0.0
            hbb = 0.0
            hbs = 0.0
            hss = 0.0
            for q in range(Q):
                r = lw[q] / acc
                z = zq[q]
                a = d1q[q]
                c = r * (d2q[q] + a * a)
                gb += r * a
                gs += r * a * z
                hbb += c
                hbs += c * z
                hss += c * z * z
            grad[0] += gb
            grad[1] += gs
            hess[0, 0] += hbb - gb * gb
            hess[0, 1] += hbs - gb * gs
            hess[1, 1] += hss - gs * gs
    hess[1, 0] = hess[0, 1]
    return total, grad, hess


@njit(cache=True, nogil=True)
def _project(beta, sigma):
    return min(max(beta, _LO), _HI), min(max(sigma, SIGMA_MIN), SIGMA_MAX)


@njit(cache=True, nogil=True)
def _maximise(beta, sigma, S, N, x, w, modes):
    """Projected Newton ascent on (beta, sigma) inside the box.

    Coordinates sitting on a bound with the gradient pointing outwards are
    held fixed; an indefinite Hessian is shifted (Levenberg) and every step
    is backtracked until the objective does not decrease.
    """
    beta, sigma = _project(beta, sigma)
    f, g, H = _marginal(beta, sigma, S, N, x, w, modes, True)
    trial = modes.copy()
    for it in range(1, MAX_ITER + 1):
        free_b = not ((beta <= _LO and g[0] <= 0.0) or (beta >= _HI and g[0] >= 0.0))
        free_s = not ((sigma <= SIGMA_MIN and g[1] <= 0.0) or (sigma >= SIGMA_MAX and g[1] >= 0.0))
        a = -H[0, 0]
        b = -H[0, 1]
        c = -H[1, 1]
        db = 0.0
        ds = 0.0
        if free_b and free_s:
            disc = math.sqrt((a - c) * (a - c) + 4.0 * b * b)
            lam = 0.5 * (a + c - disc)
            floor = 1e-8 * (1.0 + abs(a) + abs(c))
            if lam < floor:
                a += floor - lam
                c += floor - lam
            det = a * c - b * b
            db = (c * g[0] - b * g[1]) / det
            ds = (a * g[1] - b * g[0]) / det
        elif free_b:
            db = g[0] / max(a, 1e-8 * (1.0 + abs(a)))
        elif free_s:
            ds = g[1] / max(c, 1e-8 * (1.0 + abs(c)))
        else:
            return beta, sigma, f, it, True
        slope = g[0] * db + g[1] * ds
        if slope <= 1e-15 * (1.0 + abs(f)):
            return beta, sigma, f, it, True
        step = 1.0
        accepted = False
        for _ in range(60):
            nb, ns = _project(beta + step * db, sigma + step * ds)
            trial[:] = modes
            fn, gn, Hn = _marginal(nb, ns, S, N, x, w, trial, True)
            if fn >= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return beta, sigma, f, it, True
        moved = abs(nb - beta) + abs(ns - sigma)
        beta, sigma, f, g, H = nb, ns, fn, gn, Hn
        modes[:] = trial
        if moved <= 1e-11 * (1.0 + abs(beta) + sigma):
            return beta, sigma, f, it, True
    return beta, sigma, f, MAX_ITER, False


@njit(cache=True, nogil=True)
def _fit_bernoulli(S, N, x, w):
    """Maximum marginal likelihood; returns (beta, sigma, loglik, b, iters, ok).

    ``w`` holds log Gauss-Hermite weights. The interior optimum is compared
    with the pooled fit (sigma on its floor) and the better one is kept.
    """
    K = S.shape[0]
    p = min(max(S.sum() / N.sum(), PROB_EPS), 1.0 - PROB_EPS)
    pooled = math.log(p / (1.0 - p))
    modes = np.zeros(K)
    lg = np.empty(K)
    for g in range(K):
        pg = (S[g] + 0.5) / (N[g] + 1.0)
        lg[g] = math.log(pg / (1.0 - pg))
    s0 = max(lg.std(), 0.1) if K > 1 else 0.1
    beta, sigma, f, it, ok = _maximise(lg.mean(), s0, S, N, x, w, modes)
    if sigma > SIGMA_MIN:
        pm = np.zeros(K)
        fp, _, _ = _marginal(pooled, SIGMA_MIN, S, N, x, w, pm, False)
        if fp > f:
            beta, sigma, f = pooled, SIGMA_MIN, fp
            modes[:] = pm
    return beta, sigma, f, modes * sigma, it, ok


@njit(cache=True, nogil=True)
def _bernoulli_costs(starts, e, cs, counts, x, w):
    K = counts.shape[0]
    out = np.empty(starts.shape[0])
    ok_all = True
    S = np.empty(K)
    N = np.empty(K)
    for i in range(starts.shape[0]):
        m = e - starts[i]
        for g in range(K):
            S[g] = cs[e, g] - cs[starts[i], g]
            N[g] = m * counts[g]
        _, _, f, _, _, ok = _fit_bernoulli(S, N, x, w)
        ok_all = ok_all and ok
        out[i] = -2.0 * f
    return out, ok_all


# ---------------------------------------------------------------------------
# Normal: balanced one-way random effects, closed-form maximum likelihood


def _normal_fit_stats(S, SS, N):
    """ML fit of the one-way random intercept model from group stats.

    ``S``, ``SS`` and ``N`` are per-group sums, sums of squares and counts,
    with trailing axis of length K (leading axes are vectorised over).
    Returns beta, sigma_b2, resid_var, minus2loglik, group BLUPs.
    """
    S = np.asarray(S, dtype=float)
    SS = np.asarray(SS, dtype=float)
    N = np.asarray(N, dtype=float)
    K = S.shape[-1]
    Ntot = N.sum(axis=-1)
    ybar_g = S / N
    ssw_g = np.maximum(SS - S * ybar_g, 0.0)
    ssw = ssw_g.sum(axis=-1)
    if not np.all(N == N[..., :1]):
        return _normal_fit_unbalanced(ybar_g, ssw_g, N)
    n0 = N[..., 0]
    beta = ybar_g.mean(axis=-1)
    ssb = n0 * ((ybar_g - beta[..., None]) ** 2).sum(axis=-1)
    sst = ssw + ssb
    with np.errstate(divide="ignore", invalid="ignore"):
        resid = np.where(Ntot > K, ssw / (Ntot - K), 0.0)
        lam = ssb / K
        sb2 = (lam - resid) / n0
    interior = (K > 1) & (Ntot > K) & (sb2 >= VAR_FLOOR)
    resid = np.where(interior, resid, sst / Ntot)
    resid = np.maximum(resid, VAR_FLOOR)
    sb2 = np.where(interior, sb2, VAR_FLOOR)
    lam = resid + n0 * sb2
    m2ll = (Ntot * _LOG2PI + (Ntot - K) * np.log(resid) + K * np.log(lam)
            + ssw / resid + ssb / lam)
    shrink = (n0 * sb2 / lam)[..., None]
    b = shrink * (ybar_g - beta[..., None])
    return beta, sb2, resid, m2ll, b


@njit(cache=True, nogil=True)
def _normal_profile(log_g, ybar, ssw, N):
    """-2 log-likelihood profiled over beta and resid_var at sigma_b^2 / resid_var = e^log_g."""
    gam = math.exp(log_g)
    K = ybar.shape[0]
    sw = 0.0
    swy = 0.0
    Ntot = 0.0
    for g in range(K):
        wg = N[g] / (1.0 + N[g] * gam)
        sw += wg
        swy += wg * ybar[g]
        Ntot += N[g]
    beta = swy / sw
    q = 0.0
    for g in range(K):
        wg = N[g] / (1.0 + N[g] * gam)
        q += ssw[g] + wg * (ybar[g] - beta) ** 2
    resid = max(q / Ntot, VAR_FLOOR)
    sb2 = max(gam * resid, VAR_FLOOR)
    m2ll = 0.0
    for g in range(K):
        lam = resid + N[g] * sb2
        m2ll += (N[g] * _LOG2PI + (N[g] - 1.0) * math.log(resid) + math.log(lam)
                 + ssw[g] / resid + N[g] * (ybar[g] - beta) ** 2 / lam)
    return m2ll, beta, sb2, resid


@njit(cache=True, nogil=True)
def _normal_unbalanced(ybar, ssw, N):
    """Minimise the profile over log gamma: grid scan, then golden section."""
    lo_t = -30.0
    hi_t = 15.0
    best_t = lo_t
    best = _normal_profile(lo_t, ybar, ssw, N)[0]
    steps = 90
    h = (hi_t - lo_t) / steps
    for i in range(1, steps + 1):
        t = lo_t + i * h
        f = _normal_profile(t, ybar, ssw, N)[0]
        if f < best:
            best = f
            best_t = t
    a = max(lo_t, best_t - h)
    b = min(hi_t, best_t + h)
    r = 0.5 * (math.sqrt(5.0) - 1.0)
    c = b - r * (b - a)
    d = a + r * (b - a)
    fc = _normal_profile(c, ybar, ssw, N)[0]
    fd = _normal_profile(d, ybar, ssw, N)[0]
    while b - a > 1e-9:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = _normal_profile(c, ybar, ssw, N)[0]
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = _normal_profile(d, ybar, ssw, N)[0]
    t = c if fc < fd else d
    if min(fc, fd) > best:
        t = best_t
    return _normal_profile(t, ybar, ssw, N)


def _normal_fit_unbalanced(ybar_g, ssw_g, N):
    if ybar_g.ndim > 1:
        parts = [_normal_fit_unbalanced(a, b, c) for a, b, c in zip(ybar_g, ssw_g, N)]
        return tuple(np.array([p[i] for p in parts]) for i in range(5))
    m2ll, beta, sb2, resid = _normal_unbalanced(np.ascontiguousarray(ybar_g),
                                                np.ascontiguousarray(ssw_g),
                                                np.ascontiguousarray(N, dtype=float))
    b = N * sb2 / (resid + N * sb2) * (ybar_g - beta)
    return beta, sb2, resid, m2ll, b


# ---------------------------------------------------------------------------
# public API


def _gh(nodes: int):
    """Gauss-Hermite nodes and log weights."""
    x, w = np.polynomial.hermite.hermgauss(int(nodes))
    return np.ascontiguousarray(x), np.ascontiguousarray(np.log(w))


def _group_stats(values: np.ndarray, group_of: np.ndarray, K: int):
    S = np.bincount(group_of, weights=values.sum(axis=0), minlength=K)
    SS = np.bincount(group_of, weights=(values * values).sum(axis=0), minlength=K)
    N = np.bincount(group_of, minlength=K).astype(float) * values.shape[0]
    return S, SS, N


def _fit_from_stats(family, S, SS, N, nodes=DEFAULT_NODES) -> GlmerFit:
    if np.any(N <= 0):
        raise PanelError("a group has no observations in this segment")
    n_obs = int(N.sum())
    if family == BERNOULLI:
        x, w = _gh(nodes)
        beta, sigma, f, b, it, ok = _fit_bernoulli(np.asarray(S, float), np.asarray(N, float), x, w)
        fit = GlmerFit(BERNOULLI, float(beta), np.asarray(b), float(max(sigma * sigma, VAR_FLOOR)),
                       float(-2.0 * f), n_obs, None, int(it))
        if not ok:
            raise ConvergenceError(f"GLMER fit did not converge in {MAX_ITER} iterations", fit)
        return fit
    if n_obs < 2:
        raise PanelError("normal GLMER needs at least two observations per segment")
    beta, sb2, resid, m2ll, b = _normal_fit_stats(S, SS, N)
    return GlmerFit(NORMAL, float(beta), np.asarray(b, dtype=float), float(sb2), float(m2ll),
                    n_obs, float(resid))


def fit_glmer(panel: TimeSeriesPanel, s: int, e: int, family: str = BERNOULLI,
              nodes: int = DEFAULT_NODES) -> GlmerFit:
    """Fit the random-intercept model to rows ``s+1..e``.

    Parameters
    ----------
    panel : TimeSeriesPanel
        Columns are series; the panel's groups define the random intercepts.
    s, e : int
        Segment ``(s, e]``.
    family : str
        ``"bernoulli_logit"`` or ``"normal_identity"``.
    nodes : int
        Gauss-Hermite nodes per group integral (Bernoulli only).

    Returns
    -------
    GlmerFit
        ``b`` holds posterior modes (Bernoulli) or BLUPs (Normal) per group.
    """
    family = _family(family)
    seg = panel.slice(s, e)
    if family == BERNOULLI and panel.kind != BINARY:
        vals = seg.values
        if not np.all((vals == 0) | (vals == 1)):
            raise PanelError("Bernoulli GLMER needs 0/1 data")
    S, SS, N = _group_stats(seg.values, panel.group_of, panel.K)
    return _fit_from_stats(family, S, SS, N, nodes)


def glmer_cost(panel: TimeSeriesPanel, s: int, e: int, family: str = BERNOULLI,
               nodes: int = DEFAULT_NODES) -> float:
    """Twice the negative marginal log-likelihood of the fitted segment."""
    return fit_glmer(panel, s, e, family, nodes).minus2loglik


class GlmerCost(CostModel):
    """GLMER segment cost from running per-group sums.

    ``default_min_seg`` is the number of fixed-effect regressors (one
    intercept); override it for short or univariate Normal panels.
    """

    def __init__(self, panel: TimeSeriesPanel, family: str = BERNOULLI,
                 nodes: int = DEFAULT_NODES, min_seg: int | None = None, cache: bool = False):
        family = _family(family)
        self.family = family
        self.model_kind = "glmer-bernoulli" if family == BERNOULLI else "glmer-normal"
        if family == BERNOULLI and not np.all((panel.values == 0) | (panel.values == 1)):
            raise PanelError("Bernoulli GLMER needs 0/1 data")
        self.panel = panel
        self.P = panel.P
        self.K = panel.K
        self.nodes = int(nodes)
        n_params = 2 if family == BERNOULLI else 3
        default = 1 if min_seg is None else int(min_seg)
        if family == NORMAL and panel.P <= panel.K and min_seg is None:
            default = 2
        super().__init__(panel.n, n_params, default, cache=cache)
        Z = panel.groups.indicator()
        y = panel.values
        self._shift = 0.0 if family == BERNOULLI else float(y.mean())
        yc = y - self._shift
        zero = np.zeros((1, self.K))
        self._cs = np.concatenate([zero, np.cumsum(yc @ Z, axis=0)])
        self._css = np.concatenate([zero, np.cumsum((yc * yc) @ Z, axis=0)])
        self._counts = np.asarray(panel.groups.sizes, dtype=float)
        self._x, self._w = _gh(nodes)

    def _stats(self, starts, e):
        m = (e - starts).astype(float)
        S = self._cs[e] - self._cs[starts]
        SS = self._css[e] - self._css[starts]
        N = m[:, None] * self._counts[None, :]
        return S, SS, N

    def _segment_costs(self, starts, e):
        starts = np.ascontiguousarray(starts, dtype=np.int64)
        if len(starts) == 0:
            return np.empty(0)
        if starts.min() < 0 or e > self.n or np.any(starts >= e):
            raise PanelError(f"invalid segment end {e}")
        if self.family == BERNOULLI:
            out, ok = _bernoulli_costs(starts, int(e), self._cs, self._counts, self._x, self._w)
            if not ok:
                for s in starts:
                    self.fit(int(s), int(e))
            return out
        S, SS, N = self._stats(starts, e)
        if np.any(N.sum(axis=1) < 2):
            raise PanelError("normal GLMER needs at least two observations per segment")
        return np.asarray(_normal_fit_stats(S, SS, N)[3], dtype=float)

    def fit(self, s, e) -> GlmerFit:
        S, SS, N = (a[0] for a in self._stats(np.array([s]), e))
        fit = _fit_from_stats(self.family, S, SS, N, self.nodes)
        if self.family == NORMAL and self._shift:
            fit = GlmerFit(NORMAL, fit.beta + self._shift, fit.b, fit.sigma_b2, fit.minus2loglik,
                           fit.n_obs, fit.resid_var)
        return fit


def bootstrap_fixed_effect_ci(panel: TimeSeriesPanel, segmentation: Segmentation,
                              family: str = BERNOULLI, B: int = 1000, level: float = 0.95,
                              seed: int = 0, threads: int = 1,
                              nodes: int = DEFAULT_NODES) -> list[tuple[float, float, float]]:
    """Percentile bootstrap for the segment fixed effect.

    Whole series are resampled with replacement within their group and
    every segment of ``segmentation`` is refitted. The statistic is
    ``logistic(beta)`` for Bernoulli and ``beta`` for Normal.

    Returns
    -------
    list of (low, mean, high)
        One triple per segment; ``mean`` is the bootstrap mean.
    """
    family = _family(family)
    if B < 100:
        raise ValueError(f"bootstrap needs B >= 100 replicates, got {B}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if segmentation.n != panel.n:
        raise ValueError("segmentation length does not match panel")
    panel.groups.require_pairs()
    off = panel.groups.offsets
    K = panel.K
    group_of = panel.group_of
    segs = segmentation.segments()
    x, w = _gh(nodes)
    streams = np.random.SeedSequence(seed).spawn(B)

    def replicate(r):
        rng = np.random.default_rng(streams[r])
        cols = np.concatenate([rng.integers(off[u], off[u + 1], size=off[u + 1] - off[u])
                               for u in range(K)])
        vals = panel.values[:, cols]
        out = np.empty(len(segs))
        for i, (s, e) in enumerate(segs):
            S, SS, N = _group_stats(vals[s:e], group_of, K)
            if family == BERNOULLI:
                beta = _fit_bernoulli(S, N, x, w)[0]
                out[i] = _clamped_prob(beta)
            else:
                out[i] = _normal_fit_stats(S, SS, N)[0]
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            draws = np.array(list(pool.map(replicate, range(B))))
    else:
        draws = np.array([replicate(r) for r in range(B)])
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(draws, [alpha, 1.0 - alpha], axis=0)
    mean = draws.mean(axis=0)
    return [(float(a), float(m), float(b)) for a, m, b in zip(lo, mean, hi)]
