"""Run configuration: ``key = value`` lines with ``#`` comments, plus a stable hash."""
from __future__ import annotations

import configparser
import hashlib
import json

from .errors import ConfigError

DEFAULTS = {
    # simulation
    "n_core": 1703,
    "n_isolated": 127,
    "attach_param": 9,
    "runs": 1000,
    "mu_base": 0.0005,
    "p_uninformed": 0.5,
    "seed_set_size": 5,
    "n_companies": 1,
    # mapper and baselines
    "num_intervals": 3,
    "overlap": 0.25,
    "n_clusters": 150,
    "cluster_space": "filters",
    "methods": "Mapper,KMeans,KMeansPP,DBSCAN,HClustWard,KNN,LOF,IForest",
    "dbscan_eps": 0.08,
    "dbscan_min_pts": 30,
    "anomaly_percentile": 88.0,
    "knn_k": 20,
    # market data and the synthetic trading panel
    "delta": 5,
    "n_pairs": 30,
    "pool_size": 4,
    "n_days": 400,
    "shift": True,
    # persistence
    "resolution": 48,
    "bandwidth_factor": 0.5,
    "pad": 3.0,
    "wasserstein_p": 1.0,
    # gibbs models
    "n_params": 1,
    "n_quad": 4,
    "bonferroni_m": 5,
    "alpha": 0.1,
    "n_resamples": 30,
    "seed": 0,
}


def _coerce(key, raw):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw.strip()


def load_config(path=None, overrides=None) -> dict:
    """Defaults, then the file, then non-None ``overrides``; unknown keys are rejected."""
    cfg = dict(DEFAULTS)
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        with open(path) as fh:
            parser.read_string("[run]\n" + fh.read())
        for key, raw in parser["run"].items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            cfg[key] = _coerce(key, raw)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = _coerce(key, str(val)) if isinstance(val, str) else val
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
