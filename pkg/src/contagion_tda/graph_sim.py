"""Synthetic insider networks and Independent Cascade return simulation.

The generator stands in for an empirical insider graph: a symmetrized
preferential-attachment core plus a block of isolated agents that can never
be reached by a cascade.  Agents are split into nine groups by how likely they
are to pass information on (spread class) and how likely they are to trade on
it (behaviour class); a Monte-Carlo loop of cascades then yields a labelled
``N x 2R`` return matrix.
"""
from __future__ import annotations

import csv
import logging
from collections import deque
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import ConfigError, InputError
from .market_data import AgentReturnSeries

logger = logging.getLogger(__name__)

SPREAD_CLASSES = ("Q1", "Q2", "Q3")
BEHAVIOR_CLASSES = ("Passive", "Neutral", "Opportunistic")

SPREAD_RANGES = {"Q1": (0.0, 0.2), "Q2": (0.2, 0.4), "Q3": (0.4, 0.6)}
ACT_RANGES = {"Passive": (0.0, 0.4), "Neutral": (0.3, 0.6), "Opportunistic": (0.5, 0.8)}

# rows: spread class Q1..Q3, columns: Passive, Neutral, Opportunistic
GROUP_FRACTIONS = np.array(
    [
        [0.25, 0.10, 0.05],
        [0.15, 0.20, 0.10],
        [0.05, 0.07, 0.03],
    ]
)


@dataclass(frozen=True)
class SocialGraph:
    node_count: int
    edges: np.ndarray  # (E, 2) int array of directed (source, target)
    isolated_ids: frozenset = frozenset()

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.node_count:
                raise InputError("edge endpoint outside graph")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise InputError("self-loops are not allowed")
            touched = set(np.unique(edges).tolist())
            if touched & set(self.isolated_ids):
                raise InputError("isolated agents cannot have incident edges")
        # CSR view of out-neighbours
        order = np.lexsort((edges[:, 1], edges[:, 0])) if len(edges) else np.zeros(0, int)
        src = edges[order, 0]
        indptr = np.zeros(self.node_count + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        object.__setattr__(self, "_indptr", np.cumsum(indptr))
        object.__setattr__(self, "_targets", edges[order, 1])

    def out_neighbors(self, node: int) -> np.ndarray:
        return self._targets[self._indptr[node]:self._indptr[node + 1]]

    @property
    def connected_ids(self) -> np.ndarray:
        """Agents that are not in the isolated block."""
        mask = np.ones(self.node_count, dtype=bool)
        mask[list(self.isolated_ids)] = False
        return np.flatnonzero(mask)

    def weak_components(self) -> list[set[int]]:
        undirected = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            undirected[u].append(v)
            undirected[v].append(u)
        seen = np.zeros(self.node_count, dtype=bool)
        comps = []
        for start in range(self.node_count):
            if seen[start]:
                continue
            comp = {start}
            seen[start] = True
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for v in undirected[u]:
                    if not seen[v]:
                        seen[v] = True
                        comp.add(v)
                        queue.append(v)
            comps.append(comp)
        return comps

    def is_symmetric(self) -> bool:
        fwd = set(map(tuple, self.edges.tolist()))
        return all((v, u) in fwd for u, v in fwd)


@dataclass(frozen=True)
class AgentProfile:
    spread_class: str
    behavior_class: str
    spread_prob: float
    act_prob: float


@dataclass(frozen=True)
class CascadeConfig:
    """Parameters of the Monte-Carlo information-spread experiment.

    ``seed_agents`` optionally fixes the company boards that start each
    cascade; when empty, ``n_companies`` boards of ``seed_set_size`` connected
    agents are drawn from ``seed``.
    """

    group_fractions: np.ndarray = field(default_factory=lambda: GROUP_FRACTIONS.copy())
    informed_return: tuple = (0.003, 0.0015)
    baseline_return: tuple = (0.0005, 0.0015)
    runs_per_model: int = 1000
    seed: int = 0
    seed_agents: tuple = ()
    p_uninformed: float = 0.5
    seed_set_size: int = 5
    n_companies: int = 1

    def __post_init__(self):
        fr = np.asarray(self.group_fractions, dtype=float)
        object.__setattr__(self, "group_fractions", fr)
        if fr.shape != (3, 3):
            raise ConfigError("group_fractions must be a 3x3 matrix")
        if np.any(fr < 0) or not np.isclose(fr.sum(), 1.0, atol=1e-9):
            raise ConfigError("group_fractions must be nonnegative and sum to 1")
        for name in ("informed_return", "baseline_return"):
            mean, sd = getattr(self, name)
            if not sd > 0:
                raise ConfigError(f"{name} standard deviation must be > 0")
        if self.runs_per_model < 1:
            raise ConfigError("runs_per_model must be >= 1")
        if not 0.0 <= self.p_uninformed <= 1.0:
            raise ConfigError("p_uninformed must be a probability")
        if self.seed_set_size < 1 or self.n_companies < 1:
            raise ConfigError("seed_set_size and n_companies must be >= 1")
        object.__setattr__(
            self, "seed_agents", tuple(frozenset(int(a) for a in s) for s in self.seed_agents)
        )


@dataclass(frozen=True)
class ReturnMatrix:
    values: np.ndarray  # (N, 2R): IC block then baseline block
    truth: np.ndarray  # (N,) behaviour class labels
    informed_mask: np.ndarray  # (N, R)

    @property
    def runs(self) -> int:
        return self.informed_mask.shape[1]

    @property
    def pre_mask(self) -> np.ndarray:
        """Column mask of the pre-announcement (cascade) block."""
        mask = np.zeros(self.values.shape[1], dtype=bool)
        mask[: self.runs] = True
        return mask

    @property
    def opportunistic(self) -> np.ndarray:
        return np.flatnonzero(self.truth == "Opportunistic")


def generate_graph(n_core: int, n_isolated: int, attach_param: int, seed=None) -> SocialGraph:
    """Preferential-attachment core of ``n_core`` agents, symmetrized, plus isolated agents.

    Isolated agents take the ids ``n_core .. n_core + n_isolated - 1``.
    """
    if n_core < 2 or n_isolated < 0:
        raise ConfigError(f"invalid graph sizes n_core={n_core}, n_isolated={n_isolated}")
    m = int(attach_param)
    if m < 1:
        raise ConfigError("attach_param must be >= 1")
    m = min(m, n_core - 1)
    core = nx.barabasi_albert_graph(n_core, m, seed=seed)
    und = np.array(sorted(core.edges()), dtype=np.int64).reshape(-1, 2)
    edges = np.vstack([und, und[:, ::-1]])
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    isolated = frozenset(range(n_core, n_core + n_isolated))
    return SocialGraph(n_core + n_isolated, edges, isolated)


def _sample_profiles(cells: np.ndarray, rng: np.random.Generator, idx: np.ndarray):
    out = {}
    for agent, cell in zip(idx, cells):
        sc = SPREAD_CLASSES[cell // 3]
        bc = BEHAVIOR_CLASSES[cell % 3]
        q = rng.uniform(*SPREAD_RANGES[sc])
        p = rng.uniform(*ACT_RANGES[bc])
        out[int(agent)] = AgentProfile(sc, bc, float(q), float(p))
    return out


def assign_profiles(graph: SocialGraph, cfg: CascadeConfig, seed=None) -> list[AgentProfile]:
    """Draw a (spread class, behaviour class) cell for every connected agent.

    Isolated agents can never be informed; they are kept as Passive/Q1 so that
    the opportunistic population is drawn from the connected agents only.
    """
    rng = np.random.default_rng(seed)
    connected = graph.connected_ids
    cells = rng.choice(9, size=len(connected), p=cfg.group_fractions.ravel())
    profiles = _sample_profiles(cells, rng, connected)
    isolated = np.array(sorted(graph.isolated_ids), dtype=np.int64)
    profiles.update(_sample_profiles(np.zeros(len(isolated), dtype=int), rng, isolated))
    return [profiles[i] for i in range(graph.node_count)]


def run_cascade(graph: SocialGraph, profiles, seeds, rng: np.random.Generator) -> set[int]:
    """One Independent Cascade from ``seeds``.

    Every newly informed agent ``i`` tries each outgoing edge once and informs
    the target when a uniform draw falls below its spreading probability.
    """
    q = _spread_vector(profiles)
    informed = np.zeros(graph.node_count, dtype=bool)
    seeds = np.fromiter((int(s) for s in seeds), dtype=np.int64)
    if len(seeds) and (seeds.min() < 0 or seeds.max() >= graph.node_count):
        raise InputError("seed agent outside graph")
    informed[seeds] = True
    frontier = np.unique(seeds)
    indptr, targets = graph._indptr, graph._targets
    while len(frontier):
        starts, stops = indptr[frontier], indptr[frontier + 1]
        counts = stops - starts
        if counts.sum() == 0:
            break
        src = np.repeat(frontier, counts)
        edge_idx = np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)])
        tgt = targets[edge_idx]
        hit = rng.random(len(tgt)) < q[src]
        new = np.unique(tgt[hit & ~informed[tgt]])
        informed[new] = True
        frontier = new
    return set(np.flatnonzero(informed).tolist())


def _spread_vector(profiles) -> np.ndarray:
    if isinstance(profiles, np.ndarray):
        return profiles
    return np.array([p.spread_prob for p in profiles], dtype=float)


def company_boards(graph: SocialGraph, cfg: CascadeConfig) -> tuple:
    if cfg.seed_agents:
        bad = [s for board in cfg.seed_agents for s in board if s in graph.isolated_ids]
        if bad:
            raise InputError(f"seed agents must be connected, got isolated {bad}")
        return cfg.seed_agents
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 17]))
    connected = graph.connected_ids
    size = min(cfg.seed_set_size, len(connected))
    return tuple(
        frozenset(rng.choice(connected, size=size, replace=False).tolist())
        for _ in range(cfg.n_companies)
    )


def _trade(rng, n, prob, mean, sd):
    trades = rng.random(n) < prob
    draws = rng.normal(mean, sd, n)
    return np.where(trades, draws, 0.0)


def simulate_returns(graph: SocialGraph, profiles, cfg: CascadeConfig) -> ReturnMatrix:
    """Monte-Carlo cascade runs followed by an equal number of baseline runs.

    In cascade run ``r`` an informed agent acts on the tip with its act
    probability (informed return distribution); otherwise it falls back to the
    baseline model, trading with ``p_uninformed``.  Non-trading cells are 0.
    """
    n = graph.node_count
    runs = cfg.runs_per_model
    q = _spread_vector(profiles)
    p_act = np.array([p.act_prob for p in profiles], dtype=float)
    truth = np.array([p.behavior_class for p in profiles])
    boards = company_boards(graph, cfg)

    ss = np.random.SeedSequence(cfg.seed)
    cascade_ss, trade_ss, base_ss = ss.spawn(3)
    values = np.zeros((n, 2 * runs))
    informed_mask = np.zeros((n, runs), dtype=bool)
    mu_i, sd_i = cfg.informed_return
    mu_b, sd_b = cfg.baseline_return

    for r, (c_ss, t_ss, b_ss) in enumerate(
        zip(cascade_ss.spawn(runs), trade_ss.spawn(runs), base_ss.spawn(runs))
    ):
        crng = np.random.default_rng(c_ss)
        board = boards[crng.integers(len(boards))] if len(boards) > 1 else boards[0]
        informed = np.zeros(n, dtype=bool)
        informed[list(run_cascade(graph, q, board, crng))] = True
        informed_mask[:, r] = informed

        trng = np.random.default_rng(t_ss)
        act = trng.random(n) < p_act
        col = _trade(trng, n, cfg.p_uninformed, mu_b, sd_b)
        acting = informed & act
        col[acting] = trng.normal(mu_i, sd_i, n)[acting]
        values[:, r] = col

        brng = np.random.default_rng(b_ss)
        values[:, runs + r] = _trade(brng, n, cfg.p_uninformed, mu_b, sd_b)

    return ReturnMatrix(values, truth, informed_mask)


def simulate_benchmark(
    n_core: int = 1703,
    n_isolated: int = 127,
    attach_param: int = 9,
    mu_base: float = 0.0005,
    runs: int = 1000,
    seed: int = 0,
    **cfg_kwargs,
):
    """Graph, profiles and return matrix for one benchmark panel."""
    ss = np.random.SeedSequence(seed)
    g_seed, p_seed, c_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
    graph = generate_graph(n_core, n_isolated, attach_param, seed=g_seed)
    cfg = CascadeConfig(
        baseline_return=(mu_base, 0.0015), runs_per_model=runs, seed=c_seed, **cfg_kwargs
    )
    profiles = assign_profiles(graph, cfg, seed=p_seed)
    return graph, profiles, simulate_returns(graph, profiles, cfg)


def write_edges_csv(graph: SocialGraph, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "target"])
        w.writerows(graph.edges.tolist())


def read_edges_csv(path, node_count: int | None = None) -> SocialGraph:
    """Agents without edges (up to ``node_count``) are treated as isolated."""
    with open(path, newline="") as fh:
        rows = [(int(r["source"]), int(r["target"])) for r in csv.DictReader(fh)]
    edges = np.array(rows, dtype=np.int64).reshape(-1, 2)
    n = node_count if node_count is not None else (int(edges.max()) + 1 if len(edges) else 0)
    touched = set(edges.ravel().tolist())
    return SocialGraph(n, edges, frozenset(i for i in range(n) if i not in touched))


def write_return_matrix_csv(matrix: ReturnMatrix, path) -> None:
    runs = matrix.runs
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["agent_id", "label"] + [f"r_pre_{k + 1}" for k in range(runs)] + [f"r_base_{k + 1}" for k in range(runs)]
        )
        for i, (label, row) in enumerate(zip(matrix.truth, matrix.values)):
            w.writerow([i, label] + [repr(float(x)) for x in row])


def read_return_matrix_csv(path) -> ReturnMatrix:
    """Inverse of :func:`write_return_matrix_csv`; the informed mask is not stored and comes back empty."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    runs = sum(1 for h in header if h.startswith("r_pre_"))
    values = np.array([[float(x) for x in r[2:]] for r in rows]).reshape(len(rows), 2 * runs)
    truth = np.array([r[1] for r in rows])
    return ReturnMatrix(values, truth, np.zeros((len(rows), runs), dtype=bool))


def simulate_trading_series(
    agent_id,
    company_id,
    behavior: str = "Opportunistic",
    informed: bool = True,
    n_days: int = 400,
    pre_fraction: float = 0.5,
    informed_return: tuple = (0.003, 0.0015),
    baseline_return: tuple = (0.0005, 0.0015),
    volume: tuple = (9.0, 1.0),
    seed=None,
) -> AgentReturnSeries:
    """Daily returns and profits of one agent trading one company.

    A random ``pre_fraction`` of the days fall inside announcement windows.
    When ``informed``, each of those days is traded on the tip with the
    agent's act probability (drawn from its behaviour class range); every other
    day draws from the baseline return.  Volumes are lognormal and profit is
    return times volume.
    """
    if behavior not in ACT_RANGES:
        raise ConfigError(f"unknown behaviour class {behavior!r}")
    if n_days < 2 or not 0 < pre_fraction < 1:
        raise ConfigError("need n_days >= 2 and 0 < pre_fraction < 1")
    rng = np.random.default_rng(seed)
    n_pre = min(max(int(round(pre_fraction * n_days)), 1), n_days - 1)
    pre = np.zeros(n_days, dtype=bool)
    pre[rng.choice(n_days, n_pre, replace=False)] = True
    returns = rng.normal(baseline_return[0], baseline_return[1], n_days)
    if informed:
        act = rng.uniform(*ACT_RANGES[behavior])
        tipped = pre & (rng.random(n_days) < act)
        returns[tipped] = rng.normal(informed_return[0], informed_return[1], int(tipped.sum()))
    vol = rng.lognormal(volume[0], volume[1], n_days)
    return AgentReturnSeries(agent_id, company_id, returns, pre, returns * vol)


def simulate_power_panel(n_pairs: int = 30, pool_size: int = 4, shift: bool = True, seed=0, **series_kw):
    """Opportunistic series and, per company, a pool of Passive counterparts.

    With ``shift=False`` nobody trades on a tip (placebo).  Counterparts are
    never informed.
    """
    if n_pairs < 2 or pool_size < 1:
        raise ConfigError("need n_pairs >= 2 and pool_size >= 1")
    ss = np.random.SeedSequence(seed)
    opp, pools = [], []
    for j, pair_ss in enumerate(ss.spawn(n_pairs)):
        seeds = pair_ss.spawn(pool_size + 1)
        company = f"C{j}"
        opp.append(simulate_trading_series(f"opp{j}", company, "Opportunistic", shift, seed=seeds[0], **series_kw))
        pools.append([
            simulate_trading_series(f"ref{j}_{k}", company, "Passive", False, seed=s, **series_kw)
            for k, s in enumerate(seeds[1:])
        ])
    return opp, pools
