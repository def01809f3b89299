"""Reference clustering and anomaly detectors for the benchmark comparison.

Clustering methods mark the cluster with the highest mean composite score as
positive; anomaly detectors flag the top 12% of scores.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import DBSCAN, AgglomerativeClustering
from sklearn.ensemble import IsolationForest
from sklearn.neighbors import LocalOutlierFactor, NearestNeighbors

from .clustering import kmeans
from .errors import ConfigError, InputError

logger = logging.getLogger(__name__)

CLUSTER_METHODS = ("KMeans", "KMeansPP", "DBSCAN", "HClustWard")
ANOMALY_METHODS = ("KNN", "LOF", "IForest")
METHODS = CLUSTER_METHODS + ANOMALY_METHODS


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    n_clusters: int = 3
    eps: float = 0.08
    min_pts: int = 30
    percentile: float = 88.0
    knn_k: int = 20
    n_trees: int = 100
    subsample: int = 256
    n_init: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.n_clusters < 1 or self.min_pts < 1 or self.knn_k < 1:
            raise ConfigError("cluster, neighbour and MinPts counts must be >= 1")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not 0 < self.percentile < 100:
            raise ConfigError("percentile must lie in (0, 100)")


def cluster(points, cfg: BaselineConfig) -> np.ndarray:
    """Cluster labels; DBSCAN marks noise with -1."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise InputError("points must be finite")
    if cfg.method in ("KMeans", "KMeansPP"):
        if len(x) < cfg.n_clusters:
            raise InputError("fewer points than clusters")
        init = "random" if cfg.method == "KMeans" else "k-means++"
        return kmeans(x, cfg.n_clusters, init=init, n_init=cfg.n_init, seed=cfg.seed).labels
    if cfg.method == "HClustWard":
        if len(x) < cfg.n_clusters:
            raise InputError("fewer points than clusters")
        return AgglomerativeClustering(n_clusters=cfg.n_clusters, linkage="ward").fit_predict(x)
    if cfg.method == "DBSCAN":
        labels = DBSCAN(eps=cfg.eps, min_samples=cfg.min_pts).fit_predict(x)
        if np.all(labels < 0):
            logger.warning("DBSCAN labelled every point as noise")
        return labels
    raise ConfigError(f"{cfg.method} is not a clustering method")


def select_positive_cluster(labels, composite) -> np.ndarray:
    """Indices of the non-noise cluster with the highest mean composite (lowest id on ties)."""
    labels = np.asarray(labels)
    composite = np.asarray(composite, dtype=float)
    ids = [c for c in np.unique(labels) if c >= 0]
    if not ids:
        logger.warning("no non-noise cluster to select")
        return np.array([], dtype=int)
    means = [composite[labels == c].mean() for c in ids]
    best = ids[int(np.argmax(means))]  # argmax keeps the first (lowest id) maximum
    return np.flatnonzero(labels == best)


def anomaly_scores(points, cfg: BaselineConfig) -> np.ndarray:
    """Higher means more anomalous."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if cfg.method == "KNN":
        if n <= cfg.knn_k:
            raise InputError("need more points than neighbours")
        dist, _ = NearestNeighbors(n_neighbors=cfg.knn_k + 1).fit(x).kneighbors(x)
        return dist[:, cfg.knn_k]
    if cfg.method == "LOF":
        if n <= cfg.knn_k:
            raise InputError("need more points than neighbours")
        lof = LocalOutlierFactor(n_neighbors=cfg.knn_k).fit(x)
        return -lof.negative_outlier_factor_
    if cfg.method == "IForest":
        forest = IsolationForest(
            n_estimators=cfg.n_trees, max_samples=min(cfg.subsample, n), random_state=cfg.seed
        ).fit(x)
        return -forest.score_samples(x)
    raise ConfigError(f"{cfg.method} is not an anomaly method")


def flag_top(scores, percentile: float = 88.0) -> np.ndarray:
    """Indices of the ``ceil((100 - percentile)% * n)`` highest scores; earlier index wins ties."""
    scores = np.asarray(scores, dtype=float)
    m = math.ceil(round((100.0 - percentile) / 100.0 * len(scores), 9))
    order = np.lexsort((np.arange(len(scores)), -scores))
    return np.sort(order[:m])


def predict(points, composite, cfg: BaselineConfig):
    """``(positive indices, per-point score)`` for any supported method."""
    if cfg.method in CLUSTER_METHODS:
        labels = cluster(points, cfg)
        return select_positive_cluster(labels, composite), labels.astype(float)
    scores = anomaly_scores(points, cfg)
    return flag_top(scores, cfg.percentile), scores


def write_predictions_csv(rows, path) -> None:
    """``rows``: iterable of ``(agent_id, method, predicted_positive, score)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "method", "predicted_positive", "score"])
        for agent, method, pos, score in rows:
            w.writerow([agent, method, int(bool(pos)), repr(float(score))])
