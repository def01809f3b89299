"""Mapper graphs over a one-dimensional lens and the soft-cluster refinement.

For each lens the range is cut into overlapping intervals, the points of
every interval are clustered, and clusters that share points become
connected nodes.  Refinement keeps the clusters of the most suspicious
interval that share no point with any other interval's clusters; the
survivors of all lenses are intersected.
"""
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .clustering import kmeans
from .errors import ConfigError, InputError
from .filters import composite_features

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MapperConfig:
    num_intervals: int = 3
    overlap: float = 0.25
    n_clusters: int = 150
    seed: int = 0

    def __post_init__(self):
        if self.num_intervals < 1:
            raise ConfigError("num_intervals must be >= 1")
        if not 0 <= self.overlap < 1:
            raise ConfigError("overlap must lie in [0, 1)")
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")


@dataclass(frozen=True)
class LevelSet:
    index: int
    lo: float
    hi: float
    members: np.ndarray
    closed: bool = False  # True when hi itself belongs to the interval


@dataclass(frozen=True)
class MapperNode:
    level_set: int
    cluster: int
    members: frozenset


@dataclass
class MapperGraph:
    nodes: list
    edges: list
    level_sets: list = field(default_factory=list)

    def adjacency(self) -> dict:
        adj = defaultdict(set)
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def to_dot(self, name="mapper") -> str:
        lines = [f"graph {name} {{"]
        for i, nd in enumerate(self.nodes):
            lines.append(
                f'  n{i} [label="L{nd.level_set}C{nd.cluster}\\n{len(nd.members)}", level_set={nd.level_set}];'
            )
        for a, b in self.edges:
            shared = len(self.nodes[a].members & self.nodes[b].members)
            lines.append(f"  n{a} -- n{b} [weight={shared}];")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def write_csv(self, node_path, edge_path, ids=None) -> None:
        label = (lambda i: i) if ids is None else (lambda i: ids[i])
        with open(node_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "level_set", "size", "member_ids"])
            for i, nd in enumerate(self.nodes):
                w.writerow([i, nd.level_set, len(nd.members), " ".join(str(label(m)) for m in sorted(nd.members))])
        with open(edge_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["source", "target", "shared"])
            for a, b in self.edges:
                w.writerow([a, b, len(self.nodes[a].members & self.nodes[b].members)])


@dataclass(frozen=True)
class Subpopulation:
    survivors: tuple  # one frozenset of point indices per lens
    q: frozenset
    targets: tuple  # chosen level set per lens
    graphs: tuple = ()


def build_cover(values, cfg: MapperConfig) -> list:
    """Equal-width intervals over ``[min, max]`` widened so neighbours share a fraction ``overlap``."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InputError("lens values must be a nonempty 1-D array")
    if not np.all(np.isfinite(v)):
        raise InputError("lens values must be finite")
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return [LevelSet(0, lo, hi, np.arange(v.size), True)]
    n, p = cfg.num_intervals, cfg.overlap
    width = (hi - lo) / n
    ext = p * width / (2.0 * (1.0 - p))
    out = []
    for i in range(n):
        a = lo + i * width - ext
        b = hi + ext if i == n - 1 else lo + (i + 1) * width + ext
        last = i == n - 1
        mask = (v >= a) & ((v <= b) if last else (v < b))
        out.append(LevelSet(i, a, b, np.flatnonzero(mask), last))
    return out


def kmeans_clusterer(cfg: MapperConfig):
    def run(x):
        k = min(cfg.n_clusters, len(np.unique(x, axis=0)))
        return kmeans(x, k, init="k-means++", seed=cfg.seed).labels

    return run


def build_mapper_graph(points, filter_values, cfg: MapperConfig, clusterer=None) -> MapperGraph:
    """``clusterer(points_subset, member_indices) -> labels``; defaults to capped k-means."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) != len(filter_values):
        raise InputError("points and filter values are not aligned")
    if clusterer is None:
        base = kmeans_clusterer(cfg)
        clusterer = lambda sub, idx: base(sub)  # noqa: E731
    cover = build_cover(filter_values, cfg)
    nodes = []
    for ls in cover:
        if ls.members.size == 0:
            continue
        labels = np.asarray(clusterer(x[ls.members], ls.members))
        for c in np.unique(labels):
            nodes.append(MapperNode(ls.index, int(c), frozenset(ls.members[labels == c].tolist())))
    holders = defaultdict(list)
    for i, nd in enumerate(nodes):
        for m in nd.members:
            holders[m].append(i)
    edges = set()
    for hs in holders.values():
        edges.update(combinations(sorted(hs), 2))
    return MapperGraph(nodes, sorted(edges), cover)


def target_level_set(cover, composite) -> int:
    """Level set with the highest mean composite score (lowest index on ties)."""
    composite = np.asarray(composite, dtype=float)
    best, best_mean = None, -np.inf
    for ls in cover:
        if ls.members.size == 0:
            continue
        m = composite[ls.members].mean()
        if m > best_mean:
            best, best_mean = ls.index, m
    if best is None:
        raise InputError("cover has no populated level set")
    return best


def soft_nodes(graph: MapperGraph, target: int) -> set:
    """Target-level nodes that share a point with a node from another level set."""
    out = set()
    for a, b in graph.edges:
        la, lb = graph.nodes[a].level_set, graph.nodes[b].level_set
        if la == lb:
            continue
        if la == target:
            out.add(a)
        if lb == target:
            out.add(b)
    return out


def refine(points, lenses, composite, cfg: MapperConfig, clusterer=None) -> Subpopulation:
    """Soft-cluster refinement over every lens, returning per-lens survivors and their intersection."""
    survivors, targets, graphs = [], [], []
    for lens in lenses:
        g = build_mapper_graph(points, lens, cfg, clusterer)
        t = target_level_set(g.level_sets, composite)
        soft = soft_nodes(g, t)
        keep = set()
        for i, nd in enumerate(g.nodes):
            if nd.level_set == t and i not in soft:
                keep |= nd.members
        if not keep:
            logger.warning("no cluster of level set %d survived refinement", t)
        survivors.append(frozenset(keep))
        targets.append(t)
        graphs.append(g)
    q = frozenset.intersection(*survivors) if survivors else frozenset()
    return Subpopulation(tuple(survivors), q, tuple(targets), tuple(graphs))


def identify_subpopulation(values, pre_mask, cfg: MapperConfig | None = None, cluster_space: str = "filters"):
    """Run the refinement on a return matrix using the two filter functions as lenses.

    ``cluster_space`` selects what is clustered inside each interval: the
    standardized filter features (``"filters"``) or the raw return rows
    (``"returns"``).
    """
    cfg = cfg or MapperConfig()
    z, composite = composite_features(values, pre_mask)
    if cluster_space == "filters":
        points = z
    elif cluster_space == "returns":
        points = np.asarray(values, dtype=float)
    else:
        raise ConfigError(f"unknown cluster space {cluster_space!r}")
    return refine(points, [z[:, 0], z[:, 1]], composite, cfg)
