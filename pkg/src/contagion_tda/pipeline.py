"""End-to-end runs: benchmark comparison on simulated returns, and per-pair diagrams and fits."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .baselines import METHODS, BaselineConfig, predict
from .errors import ConfigError, FitError, InputError
from .filters import composite_features
from .gpd import compare, fit, integration_domain, order_to_model, resampled_paired_test
from .mapper import MapperConfig, identify_subpopulation
from .report import evaluate, truth_from_labels
from .tda import kde_evaluate, kde_field, project_diagram, scott_bandwidth, standardize, superlevel_persistence

logger = logging.getLogger(__name__)

ALL_METHODS = ("Mapper",) + METHODS


@dataclass(frozen=True)
class BenchmarkResult:
    rows: list  # EvaluationRow per method
    predictions: dict  # method -> (positive indices, per-point scores)
    subpopulation: object


def run_benchmark(matrix, methods=ALL_METHODS, mapper_cfg: MapperConfig | None = None, cluster_space="filters",
                  baseline_params=None, seed=0) -> BenchmarkResult:
    """Every method on the same matrix; baselines see the standardized filter features."""
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise ConfigError(f"unknown methods: {sorted(unknown)}")
    truth = truth_from_labels(matrix.truth)
    z, composite = composite_features(matrix.values, matrix.pre_mask)
    rows, preds, sub = [], {}, None
    for m in methods:
        if m == "Mapper":
            sub = identify_subpopulation(matrix.values, matrix.pre_mask, mapper_cfg, cluster_space)
            pos = np.array(sorted(sub.q), dtype=int)
            scores = np.isin(np.arange(len(z)), pos).astype(float)
        else:
            cfg = BaselineConfig(m, seed=seed, **(baseline_params or {}))
            pos, scores = predict(z, composite, cfg)
        preds[m] = (pos, scores)
        rows.append(evaluate(pos.tolist(), truth, m))
        logger.info("%s: %d predicted positive", m, len(pos))
    return BenchmarkResult(rows, preds, sub)


@dataclass(frozen=True)
class PairDiagrams:
    pre: tuple  # (H0, H1)
    non: tuple
    bandwidth: float


def pair_diagrams(series, resolution=48, bandwidth_factor=0.5, pad=3.0) -> PairDiagrams:
    """Superlevel diagrams of the pre and non-announcement clouds of one agent-company pair.

    Both clouds are standardized with the pair's pooled mean and spread and
    their densities are evaluated on one shared lattice, so the two diagrams
    live on a common scale.
    """
    if not series.is_active:
        raise InputError(f"agent {series.agent_id} lacks trades on one side of the windows")
    pre, non = series.cloud(True), series.cloud(False)
    z, loc, scale = standardize(np.vstack([pre, non]))
    eta = bandwidth_factor * scott_bandwidth(len(z), z.shape[1])
    bounds = list(zip(z.min(0) - pad * eta, z.max(0) + pad * eta))
    out = []
    for cloud in (pre, non):
        zc, _, _ = standardize(cloud, loc, scale)
        out.append(superlevel_persistence(kde_field(zc, eta=eta, resolution=resolution, bounds=bounds)))
    return PairDiagrams(out[0], out[1], eta)


def pair_models(pre_pd, non_pd, n_params=1, n_quad=4, seed=0) -> tuple:
    """Gibbs fits of two diagrams over one integration rectangle and one diagram-KDE bandwidth."""
    K, use_density = order_to_model(n_params)
    a, b = project_diagram(pre_pd).points, project_diagram(non_pd).points
    if min(len(a), len(b)) < K + 2:
        raise InputError("diagram too small for the requested model order")
    pooled = np.vstack([a, b])
    domain = integration_domain(pooled)
    h = scott_bandwidth(len(pooled), 2) * float(np.mean(np.where(pooled.std(0) > 0, pooled.std(0), 1.0)))
    models = []
    for pts in (a, b):
        kde = (lambda q, pts=pts: kde_evaluate(pts, h, q)) if use_density else None
        models.append(fit(pts, K, use_density, kde=kde, domain=domain, n_quad=n_quad, seed=seed))
    return tuple(models)


def pair_statistic(series, n_params=1, resolution=48, bandwidth_factor=0.5, n_quad=4, seed=0):
    """Per-parameter ``T`` between the H0 models of the two periods; None when the pair cannot be fitted."""
    try:
        d = pair_diagrams(series, resolution, bandwidth_factor)
        return compare(*pair_models(d.pre[0], d.non[0], n_params, n_quad, seed))
    except (InputError, FitError) as exc:
        logger.info("pair %s/%s skipped: %s", series.agent_id, series.company_id, exc)
        return None


@dataclass(frozen=True)
class PowerResult:
    p_values: np.ndarray  # (n_resamples, n_params) paired-test p-values
    ts: np.ndarray  # (pairs, n_params) opportunistic statistics
    n_pairs: int
    tests: list = field(default_factory=list)  # (agent_id, company_id, [TestResult]) per kept pair


def power_check(opportunistic, pools, n_params=1, n_resamples=30, seed=0, **stat_kw) -> PowerResult:
    """Paired test of opportunistic against resampled reference statistics, per parameter.

    Pairs whose opportunistic statistic or whole reference pool cannot be
    fitted are dropped.
    """
    ts, ref_pools, kept = [], [], []
    for s, pool in zip(opportunistic, pools):
        t = pair_statistic(s, n_params, seed=seed, **stat_kw)
        if t is None or not all(np.isfinite(r.statistic) for r in t):
            continue
        refs = []
        for r in pool:
            tr = pair_statistic(r, n_params, seed=seed, **stat_kw)
            if tr is not None and all(np.isfinite(x.statistic) for x in tr):
                refs.append([x.statistic for x in tr])
        if refs:
            ts.append([x.statistic for x in t])
            ref_pools.append(np.array(refs))
            kept.append((s.agent_id, s.company_id, t))
    if len(ts) < 2:
        raise InputError("fewer than two usable pairs")
    ts = np.array(ts)
    p = np.column_stack([
        resampled_paired_test(ts[:, j], [pool[:, j] for pool in ref_pools], n_resamples, seed)
        for j in range(ts.shape[1])
    ])
    return PowerResult(p, ts, len(ts), kept)
