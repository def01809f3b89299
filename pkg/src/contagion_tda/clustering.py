"""Lloyd's k-means with random or k-means++ seeding.

Kept in-house so the per-iteration inertia is observable and the tie rules
(lowest centre index wins) are fixed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: tuple  # inertia after every assignment step
    n_iter: int


def _sqdist(x, c):
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _init_plusplus(x, k, rng):
    n = len(x)
    idx = [int(rng.integers(n))]
    d2 = _sqdist(x, x[idx])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every point already coincides with a centre
            idx.append(idx[-1])
            continue
        j = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
        j = min(j, n - 1)
        idx.append(j)
        d2 = np.minimum(d2, _sqdist(x, x[j : j + 1])[:, 0])
    return x[idx].copy()


def _lloyd(x, centers, max_iter, tol):
    history = []
    labels = None
    for it in range(1, max_iter + 1):
        d = _sqdist(x, centers)
        new = d.argmin(axis=1)
        inertia = float(d[np.arange(len(x)), new].sum())
        history.append(inertia)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(len(centers)):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
        if len(history) > 1 and history[-2] - history[-1] <= tol * max(history[-2], 1e-300):
            break
    d = _sqdist(x, centers)
    labels = d.argmin(axis=1)
    return labels, centers, float(d[np.arange(len(x)), labels].sum()), tuple(history), it


def kmeans(x, k: int, init: str = "k-means++", n_init: int = 1, max_iter: int = 300, tol: float = 1e-10, seed=0):
    """Best of ``n_init`` Lloyd runs; labels are renumbered to 0..m-1 by first centre."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) == 0:
        raise InputError("no points to cluster")
    if k < 1 or n_init < 1:
        raise ConfigError("k and n_init must be >= 1")
    if init not in ("k-means++", "random"):
        raise ConfigError(f"unknown init {init!r}")
    k = min(k, len(x))
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        if init == "random":
            centers = x[np.sort(rng.choice(len(x), size=k, replace=False))].copy()
        else:
            centers = _init_plusplus(x, k, rng)
        res = _lloyd(x, centers, max_iter, tol)
        if best is None or res[2] < best[2]:
            best = res
    labels, centers, inertia, history, n_iter = best
    used, labels = np.unique(labels, return_inverse=True)
    return KMeansResult(labels.astype(int), centers[used], inertia, history, n_iter)
