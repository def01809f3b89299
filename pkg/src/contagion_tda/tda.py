"""Density filtrations, persistence diagrams and diagram distances.

A point cloud is smoothed with a Gaussian kernel on a regular grid.  The
grid is read as a cubical complex whose edges and squares take the minimum
of their corner values, and the superlevel filtration is swept from the top.
Components are tracked with union-find under the elder rule.  Loops are
obtained from the same sweep run backwards on the dual graph of squares,
where every loop that closes in the primal grid shows up as a merge.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class KdeField:
    values: np.ndarray
    axes: tuple
    bandwidth: float

    @property
    def dim(self) -> int:
        return self.values.ndim


@dataclass(frozen=True)
class PersistenceDiagram:
    dim: int
    pairs: np.ndarray  # (n, 2) rows of (birth, death), birth >= death

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class ProjectedDiagram:
    points: np.ndarray  # (n, 2) rows of (death, persistence)

    def __len__(self):
        return len(self.points)


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or len(x) == 0:
        raise InputError("point cloud must be a nonempty (n, D) array")
    if not np.all(np.isfinite(x)):
        raise InputError("point cloud has non-finite entries")
    return x


def kde_evaluate(points, eta: float, query, chunk: int = 4096) -> np.ndarray:
    """Gaussian kernel density with bandwidth ``eta`` at every query row."""
    if not eta > 0:
        raise ConfigError("bandwidth must be positive")
    z = _as_points(points)
    y = np.asarray(query, dtype=float)
    if y.ndim == 1:
        y = y[:, None] if z.shape[1] == 1 else y[None, :]
    n, d = z.shape
    norm = n * (np.sqrt(2.0 * np.pi) * eta) ** d
    out = np.empty(len(y))
    for s in range(0, len(y), chunk):
        q = y[s : s + chunk]
        d2 = ((q[:, None, :] - z[None, :, :]) ** 2).sum(-1)
        out[s : s + chunk] = np.exp(-d2 / (2.0 * eta * eta)).sum(1) / norm
    return out


def scott_bandwidth(n: int, dim: int) -> float:
    """``n ** (-1 / (dim + 4))`` in units of one standard deviation."""
    return float(n) ** (-1.0 / (dim + 4))


def standardize(points, loc=None, scale=None):
    """Per-axis centring and scaling; zero-spread axes keep unit scale."""
    x = _as_points(points)
    loc = x.mean(0) if loc is None else np.asarray(loc, dtype=float)
    if scale is None:
        scale = x.std(0)
    scale = np.where(np.asarray(scale, dtype=float) > 0, scale, 1.0)
    return (x - loc) / scale, loc, scale


def kde_field(points, eta: float | None = None, resolution: int = 64, pad: float = 3.0, bounds=None) -> KdeField:
    """KDE on a ``resolution``-per-axis lattice over the padded bounding box (or ``bounds``)."""
    x = _as_points(points)
    n, d = x.shape
    if resolution < 1:
        raise ConfigError("resolution must be >= 1")
    eta = scott_bandwidth(n, d) * float(np.mean(np.where(x.std(0) > 0, x.std(0), 1.0))) if eta is None else eta
    if bounds is None:
        bounds = [(x[:, k].min() - pad * eta, x[:, k].max() + pad * eta) for k in range(d)]
    if len(bounds) != d:
        raise InputError("bounds must give one (lo, hi) per axis")
    axes = tuple(np.linspace(lo, hi, resolution) for lo, hi in bounds)
    mesh = np.meshgrid(*axes, indexing="ij")
    q = np.column_stack([m.ravel() for m in mesh])
    vals = kde_evaluate(x, eta, q).reshape(mesh[0].shape)
    return KdeField(vals, axes, float(eta))


class _UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n)

    def find(self, a):
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root


def _grid_neighbors(shape):
    """Pairs of 4-adjacent vertex indices in a C-ordered grid (as two arrays)."""
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    a, b = [], []
    for axis in range(len(shape)):
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        a.append(idx[tuple(lo)].ravel())
        b.append(idx[tuple(hi)].ravel())
    return np.concatenate(a), np.concatenate(b)


def _h0(values: np.ndarray):
    flat = values.ravel()
    n = flat.size
    u, v = _grid_neighbors(values.shape)
    nbrs = [[] for _ in range(n)]
    for a, b in zip(u.tolist(), v.tolist()):
        nbrs[a].append(b)
        nbrs[b].append(a)
    order = np.lexsort((np.arange(n), -flat))
    rank = np.empty(n, dtype=int)
    rank[order] = np.arange(n)
    uf = _UnionFind(n)
    pairs = []
    for vtx in order.tolist():
        roots = {uf.find(w) for w in nbrs[vtx] if rank[w] < rank[vtx]}
        if not roots:
            continue
        # the root entered earliest is the elder; the others die here
        elder = min(roots, key=lambda r: rank[r])
        for r in roots:
            if r != elder:
                pairs.append((flat[r], flat[vtx]))
                uf.parent[r] = elder
        uf.parent[vtx] = elder
    pairs.append((flat[order[0]], flat[order[-1]]))
    return pairs


def _h1(values: np.ndarray):
    r, c = values.shape
    if r < 2 or c < 2:
        return []
    sq = np.minimum(np.minimum(values[:-1, :-1], values[1:, :-1]), np.minimum(values[:-1, 1:], values[1:, 1:]))
    n_sq = sq.size
    outside = n_sq
    sq_id = np.arange(n_sq).reshape(r - 1, c - 1)
    pad = np.full((r + 1, c + 1), outside)
    pad[1:-1, 1:-1] = sq_id
    # horizontal edge (i, j)-(i, j+1) separates squares (i-1, j) and (i, j)
    h_val = np.minimum(values[:, :-1], values[:, 1:])
    h_a, h_b = pad[:-1, 1:-1], pad[1:, 1:-1]
    # vertical edge (i, j)-(i+1, j) separates squares (i, j-1) and (i, j)
    v_val = np.minimum(values[:-1, :], values[1:, :])
    v_a, v_b = pad[1:-1, :-1], pad[1:-1, 1:]
    e_val = np.concatenate([h_val.ravel(), v_val.ravel()])
    e_a = np.concatenate([h_a.ravel(), v_a.ravel()])
    e_b = np.concatenate([h_b.ravel(), v_b.ravel()])
    n_e = e_val.size

    # forward order is (-value, dim, index); walk it backwards
    vals = np.concatenate([e_val, sq.ravel()])
    dims = np.concatenate([np.ones(n_e, int), np.full(n_sq, 2)])
    ids = np.concatenate([np.arange(n_e), np.arange(n_sq)])
    order = np.lexsort((ids, dims, -vals))[::-1]

    uf = _UnionFind(n_sq + 1)
    born = np.full(n_sq + 1, -1)  # reverse step at which each dual node appeared
    born_val = np.empty(n_sq + 1)
    pairs = []
    for step, k in enumerate(order.tolist()):
        if dims[k] == 2:
            s = ids[k]
            born[s] = step
            born_val[s] = vals[k]
            continue
        e = ids[k]
        ra, rb = uf.find(e_a[e]), uf.find(e_b[e])
        if ra == rb:
            continue
        young, old = (ra, rb) if born[ra] > born[rb] else (rb, ra)
        pairs.append((e_val[e], born_val[young]))
        uf.parent[young] = old
    return pairs


def _diagram(dim, pairs, essential_last=False):
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    keep = arr[:, 0] > arr[:, 1]
    if essential_last and len(arr):
        keep[-1] = True  # essential class
    return PersistenceDiagram(dim, arr[keep])


def superlevel_persistence(field) -> tuple:
    """``(H0, H1)`` of the superlevel filtration of a 1-D or 2-D grid.

    Zero-persistence pairs are discarded; the essential component is always
    reported as ``(max, min)``.
    """
    values = field.values if isinstance(field, KdeField) else np.asarray(field, dtype=float)
    if values.ndim not in (1, 2) or values.size == 0:
        raise InputError("field must be a nonempty 1-D or 2-D grid")
    if not np.all(np.isfinite(values)):
        raise InputError("field has non-finite values")
    h0 = _diagram(0, _h0(values), essential_last=True)
    h1 = _diagram(1, _h1(values) if values.ndim == 2 else [])
    return h0, h1


def project_diagram(pd) -> ProjectedDiagram:
    """``(b, d) -> (d, b - d)``, dropping zero-persistence pairs."""
    pairs = pd.pairs if isinstance(pd, PersistenceDiagram) else np.asarray(pd, dtype=float).reshape(-1, 2)
    pers = pairs[:, 0] - pairs[:, 1]
    keep = pers > 0
    return ProjectedDiagram(np.column_stack([pairs[keep, 1], pers[keep]]))


def _pairs(pd) -> np.ndarray:
    if isinstance(pd, PersistenceDiagram):
        return pd.pairs
    arr = np.asarray(pd, dtype=float)
    return arr.reshape(-1, 2)


def _augmented_costs(a, b):
    """L-infinity costs between points and diagonal slots, size (n+m) x (n+m)."""
    n, m = len(a), len(b)
    c = np.zeros((n + m, n + m))
    if n and m:
        c[:n, :m] = np.abs(a[:, None, :] - b[None, :, :]).max(-1)
    if n:
        c[:n, m:] = (np.abs(a[:, 0] - a[:, 1]) / 2.0)[:, None]
    if m:
        c[n:, :m] = (np.abs(b[:, 0] - b[:, 1]) / 2.0)[None, :]
    return c


def bottleneck(pd_a, pd_b) -> float:
    a, b = _pairs(pd_a), _pairs(pd_b)
    if len(a) + len(b) == 0:
        return 0.0
    c = _augmented_costs(a, b)
    cand = np.unique(c)
    lo, hi = 0, len(cand) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        graph = csr_matrix((c <= cand[mid]).astype(np.int8))
        if np.all(maximum_bipartite_matching(graph, perm_type="column") >= 0):
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo])


def wasserstein(pd_a, pd_b, p: float = 1.0) -> float:
    """Order-``p`` Wasserstein distance with L-infinity ground metric; ``p = inf`` is bottleneck."""
    if p == np.inf:
        return bottleneck(pd_a, pd_b)
    if not p >= 1:
        raise ConfigError("order p must be >= 1")
    a, b = _pairs(pd_a), _pairs(pd_b)
    if len(a) + len(b) == 0:
        return 0.0
    c = _augmented_costs(a, b) ** p
    rows, cols = linear_sum_assignment(c)
    return float(c[rows, cols].sum() ** (1.0 / p))


def write_diagrams_csv(diagrams, path, keys=None) -> None:
    """``diagrams``: iterable of PersistenceDiagram; ``keys`` adds leading id columns per diagram."""
    diagrams = list(diagrams)
    keys = keys or [()] * len(diagrams)
    width = max((len(k) for k in keys), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"key{i}" for i in range(width)] + ["dim", "birth", "death"])
        for key, pd in zip(keys, diagrams):
            for b, d in pd.pairs:
                w.writerow(list(key) + [pd.dim, repr(float(b)), repr(float(d))])
