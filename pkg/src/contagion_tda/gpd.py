"""Gibbs models for projected persistence diagrams.

Each diagram point ``x`` is modelled conditionally on its ``K`` nearest
neighbours through the local energy

    H(z | N_K(x)) = (sum_q theta_q * |z - n_q(x)|) * g(z) ** theta_0

where ``n_q(x)`` is the q-th nearest neighbour of ``x`` and ``g`` a kernel
density of the diagram.  Parameters are fitted by maximum pseudo-likelihood;
each local normalizer is a Gauss-Legendre integral over a rectangle around
the diagram.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import minimize
from scipy.special import logsumexp

from .errors import ConfigError, FitError, InputError
from .tda import ProjectedDiagram, kde_evaluate, scott_bandwidth

logger = logging.getLogger(__name__)

THETA0_MAX = 20.0
THETA_MAX = 1e4
LOG_FLOOR = np.log(1e-300)


@dataclass(frozen=True)
class Domain:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass
class GibbsModel:
    K: int
    use_density: bool
    theta: np.ndarray  # (theta_0, theta_1, ..., theta_K)
    variances: np.ndarray
    converged: bool
    nll: float
    n_points: int
    domain: Domain
    history: list = field(default_factory=list, repr=False)

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.K + 1, dtype=bool)
        mask[0] = self.use_density
        return mask

    @property
    def n_params(self) -> int:
        return int(self.free.sum())


@dataclass(frozen=True)
class TestResult:
    param: int
    statistic: float
    p_value: float
    bonferroni_m: int
    reject: bool


def order_to_model(n_params: int) -> tuple:
    """Parameter count -> ``(K, use_density)``: one parameter is theta_1 alone."""
    if n_params < 1 or n_params > 4:
        raise ConfigError("parameter count must lie in 1..4")
    return (1, False) if n_params == 1 else (n_params - 1, True)


def _points(projected) -> np.ndarray:
    pts = projected.points if isinstance(projected, ProjectedDiagram) else np.asarray(projected, dtype=float)
    pts = pts.reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise InputError("diagram points must be finite")
    return pts


def neighbor_order(points) -> np.ndarray:
    """Row i lists the other points by distance from point i (ties broken by index)."""
    pts = _points(points)
    n = len(pts)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    idx = np.arange(n)
    order = np.empty((n, n - 1), dtype=int)
    for i in range(n):
        others = idx[idx != i]
        order[i] = others[np.lexsort((others, d[i, others]))]
    return order


def neighbor_energy(points, q: int) -> float:
    """Sum over points of the distance to their q-th nearest neighbour."""
    pts = _points(points)
    if q < 1:
        raise ConfigError("q must be >= 1")
    if len(pts) <= q:
        raise InputError(f"need more than {q} points, got {len(pts)}")
    nb = neighbor_order(pts)[:, q - 1]
    return float(np.linalg.norm(pts - pts[nb], axis=1).sum())


def integration_domain(points, factor: float = 3.0) -> Domain:
    """Bounding box widened by ``factor`` standard deviations per axis; persistence stays >= 0."""
    pts = _points(points)
    lo, hi = pts.min(0), pts.max(0)
    spread = pts.std(0)
    fallback = np.maximum(np.abs(hi), 1.0) * 1e-3
    spread = np.where(spread > 0, spread, np.where(hi > lo, hi - lo, fallback))
    a, b = lo - factor * spread, hi + factor * spread
    return Domain(float(a[0]), float(b[0]), max(0.0, float(a[1])), float(b[1]))


def quadrature(domain: Domain, n: int = 64):
    """Gauss-Legendre nodes (m, 2) and weights (m,) on the domain rectangle."""
    t, w = np.polynomial.legendre.leggauss(n)
    hx, hy = (domain.x1 - domain.x0) / 2, (domain.y1 - domain.y0) / 2
    xs = domain.x0 + hx * (t + 1)
    ys = domain.y0 + hy * (t + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    weights = np.outer(w * hx, w * hy).ravel()
    return np.column_stack([gx.ravel(), gy.ravel()]), weights


RADIAL_EDGES = np.concatenate([[0.0], np.logspace(-5, -1, 9)[:-1], np.linspace(0.1, 1.0, 6)])


def _graded_segment(length, foot, scale, n):
    """Gauss-Legendre nodes on ``[0, length]`` in panels growing 4x away from ``foot`` (at most length/4)."""
    t, w = np.polynomial.legendre.leggauss(n)
    cap = length / 4.0
    scale = min(scale, cap)
    edges = {0.0, length, min(max(foot, 0.0), length)}
    for direction in (-1.0, 1.0):
        pos, step = scale, scale
        while 0.0 < foot + direction * pos < length:
            edges.add(foot + direction * pos)
            step = min(4.0 * step, cap)
            pos += step
    edges = np.array(sorted(edges))
    nodes = [a + (b - a) * (t + 1) / 2 for a, b in zip(edges[:-1], edges[1:]) if b > a]
    weights = [w * (b - a) / 2 for a, b in zip(edges[:-1], edges[1:]) if b > a]
    return np.concatenate(nodes), np.concatenate(weights)


def polar_quadrature(center, domain: Domain, n: int = 4):
    """Nodes and weights over the rectangle, fanned out from ``center``.

    The rectangle is cut into four triangles with apex ``center``; each is
    mapped from a square by ``z = c + u * (A + s * (B - A) / |B - A|)``.  Both
    the radial variable ``u`` (towards the apex) and the side coordinate ``s``
    (towards the foot of the perpendicular) use geometrically graded panels,
    so a cone ``exp(-theta * |z - center|)`` stays resolved for any ``theta``
    up to the parameter bound.  Falls back to the tensor rule when the centre
    is not strictly inside.
    """
    c = np.asarray(center, dtype=float).reshape(2)
    if not (domain.x0 < c[0] < domain.x1 and domain.y0 < c[1] < domain.y1):
        return quadrature(domain, 64)
    corners = np.array([[domain.x0, domain.y0], [domain.x1, domain.y0], [domain.x1, domain.y1], [domain.x0, domain.y1]])
    tr, wr = np.polynomial.legendre.leggauss(n)
    u = np.concatenate([a + (b - a) * (tr + 1) / 2 for a, b in zip(RADIAL_EDGES[:-1], RADIAL_EDGES[1:])])
    wu = np.concatenate([wr * (b - a) / 2 for a, b in zip(RADIAL_EDGES[:-1], RADIAL_EDGES[1:])])
    nodes, weights = [], []
    for k in range(4):
        A, B = corners[k] - c, corners[(k + 1) % 4] - c
        length = float(np.hypot(*(B - A)))
        direction = (B - A) / length
        height = abs(A[0] * direction[1] - A[1] * direction[0])
        foot = -float(A @ direction)
        s, ws = _graded_segment(length, foot, height, n)
        edge = A[None, :] + s[:, None] * direction[None, :]
        nodes.append((c + u[None, :, None] * edge[:, None, :]).reshape(-1, 2))
        weights.append((height * ws[:, None] * (wu * u)[None, :]).ravel())
    return np.vstack(nodes), np.concatenate(weights)


def diagram_kde(points, eta: float | None = None):
    """Kernel density re-estimated on the diagram points themselves."""
    pts = _points(points)
    if eta is None:
        sd = pts.std(0)
        scale = float(np.mean(sd[sd > 0])) if np.any(sd > 0) else 1.0
        eta = scott_bandwidth(len(pts), 2) * scale
    return lambda q: kde_evaluate(pts, eta, q)


class PseudoLikelihood:
    """Negative log pseudo-likelihood, gradient and per-point scores for one diagram."""

    def __init__(self, points, K: int, use_density: bool = True, kde=None, domain=None, n_quad: int = 4):
        pts = _points(points)
        if K < 1 or K > 3:
            raise ConfigError("K must lie in 1..3")
        if len(pts) < K + 2:
            raise InputError(f"diagram has {len(pts)} points, need at least {K + 2}")
        self.points = pts
        self.K = K
        self.use_density = use_density
        self.domain = domain or integration_domain(pts)
        if not self.domain.area > 0:
            raise InputError("integration domain has zero area")
        kde = kde or diagram_kde(pts)
        nb = neighbor_order(pts)[:, :K]
        self.neighbors = nb
        # each local normalizer is integrated around the point's nearest neighbour
        rules = [polar_quadrature(pts[j], self.domain, n_quad) for j in nb[:, 0]]
        m = max(len(r[1]) for r in rules)
        # pad ragged rules (tensor fallback) with zero-weight copies of a node
        nodes = np.stack([np.vstack([r[0], np.repeat(r[0][:1], m - len(r[1]), 0)]) for r in rules])  # (N, M, 2)
        with np.errstate(divide="ignore"):
            self.log_w = np.log(np.stack([np.concatenate([r[1], np.zeros(m - len(r[1]))]) for r in rules]))
        self.d_x = np.linalg.norm(pts[:, None, :] - pts[nb], axis=-1)  # (N, K)
        self.d_z = np.linalg.norm(nodes[:, None, :, :] - pts[nb][:, :, None, :], axis=-1)  # (N, K, M)
        flat = nodes.reshape(-1, 2)
        self.lg_x = np.maximum(np.log(np.maximum(kde(pts), 0.0) + 1e-300), LOG_FLOOR)
        self.lg_z = np.maximum(np.log(np.maximum(kde(flat), 0.0) + 1e-300), LOG_FLOOR).reshape(nodes.shape[:2])

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.K + 1, dtype=bool)
        mask[0] = self.use_density
        return mask

    def full(self, free_theta) -> np.ndarray:
        theta = np.zeros(self.K + 1)
        theta[self.free] = free_theta
        return theta

    def _terms(self, theta, rows=None):
        rows = slice(None) if rows is None else rows
        th0, thq = theta[0], theta[1:]
        s_x = self.d_x[rows] @ thq
        s_z = np.einsum("k,nkm->nm", thq, self.d_z[rows])
        g_x = np.exp(th0 * self.lg_x[rows])
        lg_z = self.lg_z[rows]
        g_z = np.exp(th0 * lg_z)
        h_x = s_x * g_x
        h_z = s_z * g_z
        logits = self.log_w[rows] - h_z
        log_z = logsumexp(logits, axis=1)
        if not np.all(np.isfinite(log_z)) or not np.all(np.isfinite(h_x)):
            raise FitError("non-finite local normalizer")
        pi = np.exp(logits - log_z[:, None])
        # per-point score = gradient of the point's negative log term
        score = np.empty((len(h_x), self.K + 1))
        score[:, 1:] = self.d_x[rows] * g_x[:, None] - np.einsum("nm,nkm,nm->nk", pi, self.d_z[rows], g_z)
        score[:, 0] = h_x * self.lg_x[rows] - (pi * h_z * lg_z).sum(1)
        return h_x + log_z, score

    def value_and_grad(self, free_theta, rows=None):
        theta = self.full(free_theta)
        terms, score = self._terms(theta, rows)
        return float(terms.sum()), score.sum(0)[self.free]

    def scores(self, free_theta) -> np.ndarray:
        return self._terms(self.full(free_theta))[1][:, self.free]

    def log_normalizers(self, theta) -> np.ndarray:
        th0, thq = theta[0], theta[1:]
        h_z = np.einsum("k,nkm->nm", thq, self.d_z) * np.exp(th0 * self.lg_z)
        return logsumexp(self.log_w - h_z, axis=1)


def conditional_density(x, neighbors, theta, kde, domain: Domain, n_quad: int = 4) -> float:
    """``exp(-H(x)) / Z`` with ``Z`` integrated over ``domain`` around the nearest neighbour."""
    x = np.asarray(x, dtype=float).reshape(2)
    nb = np.asarray(neighbors, dtype=float).reshape(-1, 2)
    theta = np.asarray(theta, dtype=float)
    if len(theta) != len(nb) + 1:
        raise ConfigError("theta must hold theta_0 plus one weight per neighbour")
    nodes, weights = polar_quadrature(nb[0], domain, n_quad)

    def energy(z):
        d = np.linalg.norm(z[:, None, :] - nb[None, :, :], axis=-1)
        g = np.asarray(kde(z), dtype=float)
        return (d @ theta[1:]) * (g ** theta[0] if theta[0] != 0 else 1.0)

    h_nodes = energy(nodes)
    log_z = logsumexp(np.log(weights) - h_nodes)
    val = -energy(x[None, :])[0] - log_z
    if not np.isfinite(val):
        raise FitError("non-finite conditional density")
    return float(np.exp(val))


def _fisher_variances(scores) -> np.ndarray:
    info = scores.T @ scores
    if np.linalg.matrix_rank(info) < info.shape[0]:
        logger.warning("singular Fisher information, using the pseudo-inverse")
    return np.maximum(np.diag(np.linalg.pinv(info)), 0.0)


def fit(
    projected,
    K: int = 3,
    use_density: bool = True,
    kde=None,
    domain=None,
    n_starts: int = 4,
    seed=0,
    n_quad: int = 4,
    max_iter: int = 500,
) -> GibbsModel:
    """Maximum pseudo-likelihood fit, best of a zero start and ``n_starts`` random starts."""
    prob = PseudoLikelihood(projected, K, use_density, kde, domain, n_quad)
    n_free = int(prob.free.sum())
    scale = float(np.median(prob.d_x[:, 0])) or 1.0
    rng = np.random.default_rng(seed)
    starts = [np.zeros(n_free)]
    for _ in range(n_starts):
        s = rng.normal(0.0, 1.0 / scale, n_free)
        if use_density:
            s[0] = rng.uniform(0.0, 2.0)
        starts.append(s)
    bounds = [(-THETA_MAX, THETA_MAX)] * n_free
    if use_density:
        bounds[0] = (0.0, THETA0_MAX)

    best = None
    for s in starts:
        history = []

        def fun(t):
            try:
                return prob.value_and_grad(t)
            except FitError:
                return 1e300, np.zeros(n_free)

        res = minimize(
            fun, s, jac=True, method="L-BFGS-B", bounds=bounds,
            callback=lambda t: history.append(fun(t)[0]), options={"maxiter": max_iter},
        )
        if not np.isfinite(res.fun) or res.fun >= 1e300:
            continue
        if best is None or res.fun < best[0].fun:
            best = (res, [float(fun(s)[0])] + history)
    if best is None:
        raise FitError("no start produced a finite objective")
    res, history = best
    theta = prob.full(res.x)
    var = np.full(K + 1, np.nan)
    var[prob.free] = _fisher_variances(prob.scores(res.x))
    if not res.success:
        logger.warning("pseudo-likelihood fit did not converge: %s", res.message)
    return GibbsModel(K, use_density, theta, var, bool(res.success), float(res.fun), len(prob.points), prob.domain, history)


def held_out_score(projected, n_params: int, folds: int = 5, seed=0, **fit_kw) -> float:
    """Mean held-out negative log pseudo-likelihood per point (lower is better)."""
    K, use_density = order_to_model(n_params)
    pts = _points(projected)
    n = len(pts)
    prob = PseudoLikelihood(pts, K, use_density, fit_kw.get("kde"), fit_kw.get("domain"), fit_kw.get("n_quad", 4))
    folds = min(folds, n)
    assign = np.random.default_rng(seed).permutation(n) % folds
    n_free = int(prob.free.sum())
    bounds = [(-THETA_MAX, THETA_MAX)] * n_free
    if use_density:
        bounds[0] = (0.0, THETA0_MAX)
    total = 0.0
    for f in range(folds):
        train, test = np.flatnonzero(assign != f), np.flatnonzero(assign == f)

        def fun(t):
            try:
                return prob.value_and_grad(t, train)
            except FitError:
                return 1e300, np.zeros(n_free)

        res = minimize(fun, np.zeros(n_free), jac=True, method="L-BFGS-B", bounds=bounds)
        total += prob.value_and_grad(res.x, test)[0]
    return total / n


def select_order(projected, counts=(1, 2, 3, 4), folds: int = 5, seed=0) -> tuple:
    """``(best parameter count, {count: held-out score})`` over the feasible counts."""
    n = len(_points(projected))
    scores = {}
    for c in counts:
        K, _ = order_to_model(c)
        if n < K + 2:
            continue
        scores[c] = held_out_score(projected, c, folds, seed)
    if not scores:
        raise InputError("diagram too small for any model order")
    return min(scores, key=lambda c: (scores[c], c)), scores


def compare(model_a: GibbsModel, model_b: GibbsModel, m: int = 5, alpha: float = 0.1) -> list:
    """Per shared parameter: ``T = |diff| / sqrt(Var_a + Var_b)`` with a two-sided normal p-value."""
    if model_a.K != model_b.K or model_a.use_density != model_b.use_density:
        raise ConfigError("models must share K and parameterization")
    out = []
    for j in np.flatnonzero(model_a.free & model_b.free):
        v = model_a.variances[j] + model_b.variances[j]
        diff = float(abs(model_a.theta[j] - model_b.theta[j]))
        if not v > 0 or not np.isfinite(v):
            out.append(TestResult(int(j), math.nan, math.nan, m, False))
            continue
        t = diff / math.sqrt(v)
        p = math.erfc(t / math.sqrt(2.0))
        out.append(TestResult(int(j), t, p, m, p < alpha / m))
    return out


def paired_difference_test(ts_opportunistic, ts_reference) -> float:
    """One-sided paired t-test of ``mean(T_s - T_r) > 0``."""
    s = np.asarray(ts_opportunistic, dtype=float)
    r = np.asarray(ts_reference, dtype=float)
    if s.shape != r.shape:
        raise InputError("paired samples must have equal length")
    n = len(s)
    if n < 2:
        raise InputError("need at least two pairs")
    d = s - r
    mean, sd = d.mean(), d.std(ddof=1)
    if sd == 0:
        return 0.5 if mean == 0 else (0.0 if mean > 0 else 1.0)
    t = mean / (sd / math.sqrt(n))
    return float(stats.t.sf(t, n - 1))


def resampled_paired_test(ts_opportunistic, reference_pools, n_resamples: int = 30, seed=0) -> np.ndarray:
    """p-values of the paired test over reference sets drawn one per pair from ``reference_pools``."""
    pools = [np.asarray(p, dtype=float) for p in reference_pools]
    if len(pools) != len(ts_opportunistic) or any(len(p) == 0 for p in pools):
        raise InputError("need one nonempty reference pool per opportunistic statistic")
    rng = np.random.default_rng(seed)
    out = np.empty(n_resamples)
    for k in range(n_resamples):
        ref = [p[rng.integers(len(p))] for p in pools]
        out[k] = paired_difference_test(ts_opportunistic, ref)
    return out


def write_fits_csv(rows, path, K_max: int = 3) -> None:
    """``rows``: iterable of ``(agent_id, company_id, period, GibbsModel)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["agent_id", "company_id", "period", "K"]
            + [f"theta_{j}" for j in range(K_max + 1)]
            + [f"var_{j}" for j in range(K_max + 1)]
            + ["converged"]
        )
        for agent, company, period, mdl in rows:
            th = list(mdl.theta) + [math.nan] * (K_max + 1 - len(mdl.theta))
            va = list(mdl.variances) + [math.nan] * (K_max + 1 - len(mdl.variances))
            w.writerow([agent, company, period, mdl.K] + [repr(float(x)) for x in th + va] + [int(mdl.converged)])


def write_tests_csv(rows, path) -> None:
    """``rows``: iterable of ``(agent_id, company_id, TestResult)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "company_id", "param", "T", "p_value", "reject_at_0.1_bonferroni"])
        for agent, company, r in rows:
            w.writerow([agent, company, r.param, repr(r.statistic), repr(r.p_value), int(r.reject)])
