"""Filter functions over agent return series and their standardized composite."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterValues:
    agent_id: object
    company_id: object
    f1: int
    f2: float
    z1: float = 0.0
    z2: float = 0.0
    composite: float = 0.0


def f1(series) -> int:
    """Number of strictly profitable days inside pre-announcement windows."""
    return int(np.count_nonzero(series.returns[series.pre_mask] > 0))


def f2(series) -> float:
    """Mean pre-announcement return minus mean return elsewhere."""
    pre = series.returns[series.pre_mask]
    non = series.returns[~series.pre_mask]
    if pre.size == 0 or non.size == 0:
        raise InputError(f"agent {series.agent_id} has no trades on one side of the windows")
    return float(pre.mean() - non.mean())


def zscore(x) -> np.ndarray:
    """Population z-scores; a constant feature maps to zeros."""
    x = np.asarray(x, dtype=float)
    sd = x.std()
    if not np.isfinite(sd) or sd <= 1e-12 * max(1.0, float(np.abs(x).max())):
        logger.warning("feature has zero variance, z-scores set to 0")
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def standardize_and_compose(batch) -> list:
    batch = list(batch)
    if len(batch) < 2:
        raise InputError("standardization needs at least two agents")
    z1 = zscore([b.f1 for b in batch])
    z2 = zscore([b.f2 for b in batch])
    comp = 0.5 * z1 + 0.5 * z2
    return [
        replace(b, z1=float(a), z2=float(c), composite=float(s))
        for b, a, c, s in zip(batch, z1, z2, comp)
    ]


def compute_filters(series_list) -> list:
    """Filter values for every active series, standardized over the active batch."""
    raw, dropped = [], 0
    for s in series_list:
        if not s.is_active:
            dropped += 1
            continue
        raw.append(FilterValues(s.agent_id, s.company_id, f1(s), f2(s)))
    if dropped:
        logger.info("excluded %d inactive series", dropped)
    return standardize_and_compose(raw)


def matrix_filters(values: np.ndarray, pre_mask: np.ndarray):
    """Row-wise (f1, f2) of a return matrix whose columns are split by ``pre_mask``."""
    values = np.asarray(values, dtype=float)
    pre_mask = np.asarray(pre_mask, dtype=bool)
    if values.ndim != 2 or values.shape[1] != pre_mask.size:
        raise InputError("pre_mask must have one entry per column")
    if pre_mask.all() or not pre_mask.any():
        raise InputError("both column groups must be nonempty")
    pre, non = values[:, pre_mask], values[:, ~pre_mask]
    return (pre > 0).sum(axis=1), pre.mean(axis=1) - non.mean(axis=1)


def composite_features(values: np.ndarray, pre_mask: np.ndarray):
    """``(Z, composite)``: standardized (f1, f2) columns and their equal-weight mean."""
    a, b = matrix_filters(values, pre_mask)
    z = np.column_stack([zscore(a), zscore(b)])
    return z, z.mean(axis=1)


def ranking(batch) -> list:
    """Batch ordered by composite, then f1 descending, then agent id."""
    return sorted(batch, key=lambda b: (-b.composite, -b.f1, str(b.agent_id)))


def write_filters_csv(batch, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "company_id", "f1", "f2", "z1", "z2", "composite"])
        for b in batch:
            w.writerow([b.agent_id, b.company_id, b.f1, repr(b.f2), repr(b.z1), repr(b.z2), repr(b.composite)])
