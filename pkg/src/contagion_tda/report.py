"""Confusion metrics, overlap enrichment and diagram-distance summaries."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .errors import InputError
from .tda import bottleneck, wasserstein

logger = logging.getLogger(__name__)

METRIC_FIELDS = ("method", "predicted_positive", "tp", "fp", "tn", "fn", "precision", "recall", "f1")


@dataclass(frozen=True)
class EvaluationRow:
    method: str
    predicted_positive: int
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float | None
    recall: float | None
    f1: float | None


def _ratio(a, b):
    return a / b if b > 0 else None


def metrics_from_counts(method, tp, fp, tn, fn) -> EvaluationRow:
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn)
    return EvaluationRow(method, tp + fp, tp, fp, tn, fn, precision, recall, f1)


def evaluate(predicted, truth, method: str = "") -> EvaluationRow:
    """Confusion counts of ``predicted`` ids against ``truth`` (id -> is_positive mapping).

    Ratios with an empty denominator are None.
    """
    truth = dict(truth)
    predicted = set(predicted)
    unknown = predicted - truth.keys()
    if unknown:
        raise InputError(f"{len(unknown)} predicted ids are not in the ground truth")
    positives = {k for k, v in truth.items() if v}
    tp = len(predicted & positives)
    fp = len(predicted) - tp
    fn = len(positives) - tp
    tn = len(truth) - tp - fp - fn
    return metrics_from_counts(method, tp, fp, tn, fn)


def truth_from_labels(labels, positive="Opportunistic") -> dict:
    return {i: lab == positive for i, lab in enumerate(labels)}


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x)) if isinstance(x, float) else str(x)


def write_metrics_csv(rows, path, extra=None) -> None:
    """``extra``: optional list of dicts with additional leading columns per row."""
    rows = list(rows)
    extra = extra or [{}] * len(rows)
    keys = list(extra[0].keys()) if extra else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys + list(METRIC_FIELDS))
        for e, r in zip(extra, rows):
            d = asdict(r)
            w.writerow([e[k] for k in keys] + [_fmt(d[f]) for f in METRIC_FIELDS])


def read_metrics_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            num = lambda s, t: None if s == "" else t(s)  # noqa: E731
            out.append(
                EvaluationRow(
                    row["method"],
                    int(row["predicted_positive"]),
                    int(row["tp"]),
                    int(row["fp"]),
                    int(row["tn"]),
                    int(row["fn"]),
                    num(row["precision"], float),
                    num(row["recall"], float),
                    num(row["f1"], float),
                )
            )
    return out


def _log_comb(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def fisher_overlap(total: int, set_a: int, set_b: int, overlap: int) -> float:
    """Upper-tail hypergeometric ``P(X >= overlap)`` for two sets drawn from ``total`` items."""
    for name, v in (("total", total), ("set_a", set_a), ("set_b", set_b), ("overlap", overlap)):
        if int(v) != v or v < 0:
            raise InputError(f"{name} must be a nonnegative integer")
    if set_a > total or set_b > total or overlap > min(set_a, set_b):
        raise InputError("inconsistent counts")
    lo = max(overlap, set_a + set_b - total)
    hi = min(set_a, set_b)
    if lo > hi:
        return 0.0
    log_den = _log_comb(total, set_b)
    terms = [_log_comb(set_a, x) + _log_comb(total - set_a, set_b - x) - log_den for x in range(lo, hi + 1)]
    return float(min(1.0, math.exp(logsumexp(terms))))


@dataclass(frozen=True)
class DistanceSummary:
    opportunistic: np.ndarray
    reference: np.ndarray
    dropped: int
    one_sample_p: float  # two-sided, opportunistic distances vs zero
    paired_p: float  # right-tailed, opportunistic > reference
    opportunistic_bottleneck: np.ndarray
    reference_bottleneck: np.ndarray
    bottleneck_paired_p: float


def one_sample_p(x) -> float:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return math.nan
    if np.all(x == x[0]):
        return 1.0 if x[0] == 0 else 0.0
    return float(stats.ttest_1samp(x, 0.0).pvalue)


def paired_right_p(a, b) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if len(d) < 2:
        return math.nan
    if np.all(d == d[0]):
        return 0.5 if d[0] == 0 else (0.0 if d[0] > 0 else 1.0)
    return float(stats.ttest_1samp(d, 0.0, alternative="greater").pvalue)


def _usable(pair) -> bool:
    return pair is not None and all(d is not None for d in pair)


def distance_summary(opportunistic_pairs, reference_pairs, p: float = 1.0) -> DistanceSummary:
    """Pre-vs-non diagram distances for two paired groups and their tests.

    Each group is a list of ``(diagram_pre, diagram_non)``; ``None`` marks an
    unusable pair, and both members of a matched pair are then dropped.
    """
    opportunistic_pairs, reference_pairs = list(opportunistic_pairs), list(reference_pairs)
    if len(opportunistic_pairs) != len(reference_pairs):
        raise InputError("groups must be paired one to one")
    keep = [
        i for i, (a, b) in enumerate(zip(opportunistic_pairs, reference_pairs))
        if _usable(a) and _usable(b)
    ]
    dropped = len(opportunistic_pairs) - len(keep)
    if dropped:
        logger.info("dropped %d pairs without usable diagrams", dropped)
    if len(keep) < 2:
        raise InputError("need at least two usable pairs per group")
    w_s = np.array([wasserstein(*opportunistic_pairs[i], p=p) for i in keep])
    w_r = np.array([wasserstein(*reference_pairs[i], p=p) for i in keep])
    b_s = np.array([bottleneck(*opportunistic_pairs[i]) for i in keep])
    b_r = np.array([bottleneck(*reference_pairs[i]) for i in keep])
    return DistanceSummary(
        w_s, w_r, dropped, one_sample_p(w_s), paired_right_p(w_s, w_r), b_s, b_r, paired_right_p(b_s, b_r)
    )
