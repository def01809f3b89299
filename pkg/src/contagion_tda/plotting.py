"""Static figures: persistence diagrams, barcodes, Mapper graphs and benchmark bars."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import networkx as nx  # noqa: E402
import numpy as np  # noqa: E402

MARKERS = {0: ("o", "black", "H0"), 1: ("^", "red", "H1")}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_diagram(diagrams, path, title=None, projected=False):
    """Scatter of (birth, death) pairs, or (death, persistence) with ``projected``."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    lo, hi = np.inf, -np.inf
    for pd in diagrams:
        pairs = pd.pairs
        if len(pairs) == 0:
            continue
        marker, color, label = MARKERS.get(pd.dim, ("s", "gray", f"H{pd.dim}"))
        xy = np.column_stack([pairs[:, 1], pairs[:, 0] - pairs[:, 1]]) if projected else pairs
        ax.scatter(xy[:, 0], xy[:, 1], marker=marker, c=color, s=18, label=label)
        lo, hi = min(lo, xy.min()), max(hi, xy.max())
    if np.isfinite(lo):
        if projected:
            ax.axhline(0.0, color="gray", lw=0.8)
        else:
            ax.plot([lo, hi], [lo, hi], color="gray", lw=0.8)
    ax.set_xlabel("death" if projected else "birth")
    ax.set_ylabel("persistence" if projected else "death")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", frameon=False)
    return _save(fig, path)


def plot_barcode(diagrams, path, title=None):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    row = 0
    for pd in diagrams:
        _, color, label = MARKERS.get(pd.dim, ("s", "gray", f"H{pd.dim}"))
        order = np.argsort(-(pd.pairs[:, 0] - pd.pairs[:, 1])) if len(pd.pairs) else []
        for k, i in enumerate(order):
            b, d = pd.pairs[i]
            ax.hlines(row, d, b, color=color, lw=2, label=label if k == 0 else None)
            row += 1
    ax.set_xlabel("filtration level")
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    if row:
        ax.legend(loc="best", frameon=False)
    return _save(fig, path)


def plot_mapper(graph, path, color_by=None, title=None, seed=0):
    """Nodes sized by membership and coloured by the mean of ``color_by`` over members."""
    g = nx.Graph()
    g.add_nodes_from(range(len(graph.nodes)))
    g.add_edges_from(graph.edges)
    pos = nx.spring_layout(g, seed=seed)
    sizes = [10 + 2 * len(nd.members) for nd in graph.nodes]
    if color_by is not None:
        color_by = np.asarray(color_by, dtype=float)
        colors = [color_by[list(nd.members)].mean() for nd in graph.nodes]
    else:
        colors = [nd.level_set for nd in graph.nodes]
    fig, ax = plt.subplots(figsize=(6, 6))
    nx.draw_networkx_edges(g, pos, ax=ax, alpha=0.4)
    nx.draw_networkx_nodes(g, pos, ax=ax, node_size=sizes, node_color=colors, cmap="viridis")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_benchmark(rows, path, title=None):
    """Grouped precision / recall / F1 bars per method."""
    names = [r.method for r in rows]
    metrics = ("precision", "recall", "f1")
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(max(5, 0.9 * len(rows)), 3.5))
    for k, m in enumerate(metrics):
        vals = [getattr(r, m) if getattr(r, m) is not None else 0.0 for r in rows]
        ax.bar(x + (k - 1) * 0.27, vals, width=0.27, label=m)
    ax.set_xticks(x, names, rotation=30, ha="right")
    ax.set_ylim(0, 1)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, path)
