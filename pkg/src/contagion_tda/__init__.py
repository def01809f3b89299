"""Topological identification of opportunistic agents in simulated and observed information contagions."""
from .baselines import BaselineConfig, predict
from .config import config_hash, load_config
from .errors import ConfigError, ContagionError, FitError, InputError
from .filters import FilterValues, compute_filters, standardize_and_compose
from .gpd import GibbsModel, compare, fit, paired_difference_test, resampled_paired_test, select_order
from .graph_sim import CascadeConfig, generate_graph, simulate_benchmark, simulate_power_panel
from .mapper import MapperConfig, build_mapper_graph, identify_subpopulation, refine
from .market_data import AgentReturnSeries, AnnouncementCalendar, Transaction, build_series
from .pipeline import pair_statistic, power_check, run_benchmark
from .report import distance_summary, evaluate, fisher_overlap
from .tda import bottleneck, kde_field, project_diagram, superlevel_persistence, wasserstein

__version__ = "0.1.0"

__all__ = [
    "AgentReturnSeries",
    "AnnouncementCalendar",
    "BaselineConfig",
    "CascadeConfig",
    "ConfigError",
    "ContagionError",
    "FilterValues",
    "FitError",
    "GibbsModel",
    "InputError",
    "MapperConfig",
    "Transaction",
    "bottleneck",
    "build_mapper_graph",
    "build_series",
    "compare",
    "compute_filters",
    "config_hash",
    "distance_summary",
    "evaluate",
    "fisher_overlap",
    "fit",
    "generate_graph",
    "identify_subpopulation",
    "kde_field",
    "load_config",
    "pair_statistic",
    "paired_difference_test",
    "power_check",
    "predict",
    "project_diagram",
    "refine",
    "resampled_paired_test",
    "run_benchmark",
    "select_order",
    "simulate_benchmark",
    "simulate_power_panel",
    "standardize_and_compose",
    "superlevel_persistence",
    "wasserstein",
]
