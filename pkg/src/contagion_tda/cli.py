"""Command-line entry point: ``contagion-tda <verb> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .baselines import write_predictions_csv
from .config import config_hash, load_config
from .errors import ContagionError, InputError
from .gpd import write_fits_csv, write_tests_csv
from .graph_sim import (
    read_return_matrix_csv,
    simulate_benchmark,
    simulate_power_panel,
    write_edges_csv,
    write_return_matrix_csv,
)
from .mapper import MapperConfig
from .market_data import build_series, read_announcements_csv, read_series_csv, read_transactions_csv, write_series_csv
from .pipeline import ALL_METHODS, pair_diagrams, pair_models, power_check, run_benchmark
from .report import distance_summary, read_metrics_csv, write_metrics_csv
from .tda import bottleneck, wasserstein, write_diagrams_csv

logger = logging.getLogger("contagion_tda")

VERBS = ("simulate", "cluster", "benchmark", "tda", "gpd-fit", "gpd-test", "report")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contagion-tda", description=__doc__)
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", type=Path, help="key = value file; flags override it")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--mu-base", type=float, dest="mu_base", help="baseline mean return, e.g. 0.0005 or 0.0015")
    ap.add_argument("--methods", help="comma-separated subset of " + ",".join(ALL_METHODS))
    ap.add_argument("--delta", type=int, help="announcement window length in trading days")
    ap.add_argument("--returns", type=Path, help="return matrix CSV (default: <out>/returns.csv, else simulate)")
    ap.add_argument("--series", type=Path, help="per-day series CSV for the diagram and Gibbs verbs")
    ap.add_argument("--transactions", type=Path, help="transactions CSV; needs --announcements")
    ap.add_argument("--announcements", type=Path)
    ap.add_argument("--no-plots", action="store_true")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


class Run:
    def __init__(self, verb, cfg, out: Path, plots: bool):
        self.verb, self.cfg, self.out, self.plots = verb, cfg, out, plots
        self.outputs = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name) -> Path:
        self.outputs.append(name)
        return self.out / name

    def finish(self, **extra):
        manifest = {
            "verb": self.verb,
            "config": self.cfg,
            "config_hash": config_hash(self.cfg),
            "outputs": sorted(self.outputs),
            **extra,
        }
        with open(self.out / f"manifest_{self.verb}.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return manifest


def _simulate(cfg):
    return simulate_benchmark(
        cfg["n_core"], cfg["n_isolated"], cfg["attach_param"], cfg["mu_base"], cfg["runs"], cfg["seed"],
        p_uninformed=cfg["p_uninformed"], seed_set_size=cfg["seed_set_size"], n_companies=cfg["n_companies"],
    )


def _matrix(run: Run, returns: Path | None):
    path = returns or run.out / "returns.csv"
    if path.exists():
        logger.info("reading %s", path)
        return read_return_matrix_csv(path)
    logger.info("no return matrix at %s; simulating one", path)
    return _simulate(run.cfg)[2]


def _methods(cfg):
    return tuple(m.strip() for m in cfg["methods"].split(",") if m.strip())


def _benchmark(run: Run, matrix):
    cfg = run.cfg
    params = dict(eps=cfg["dbscan_eps"], min_pts=cfg["dbscan_min_pts"], percentile=cfg["anomaly_percentile"],
                  knn_k=cfg["knn_k"])
    mcfg = MapperConfig(cfg["num_intervals"], cfg["overlap"], cfg["n_clusters"], seed=cfg["seed"])
    return run_benchmark(matrix, _methods(cfg), mcfg, cfg["cluster_space"], params, seed=cfg["seed"])


def cmd_simulate(run: Run, args):
    graph, _, matrix = _simulate(run.cfg)
    write_edges_csv(graph, run.path("edges.csv"))
    write_return_matrix_csv(matrix, run.path("returns.csv"))
    return {"agents": int(graph.node_count), "opportunistic": int(len(matrix.opportunistic))}


def cmd_cluster(run: Run, args):
    matrix = _matrix(run, args.returns)
    res = _benchmark(run, matrix)
    rows = []
    for method, (pos, scores) in res.predictions.items():
        flagged = np.zeros(len(scores), dtype=bool)
        flagged[pos] = True
        rows.extend((i, method, flagged[i], scores[i]) for i in range(len(scores)))
    write_predictions_csv(rows, run.path("predictions.csv"))
    if res.subpopulation is not None:
        opp = (matrix.truth == "Opportunistic").astype(float)
        for k, g in enumerate(res.subpopulation.graphs):
            (run.out / f"mapper_lens{k + 1}.dot").write_text(g.to_dot(f"mapper_lens{k + 1}"))
            run.outputs.append(f"mapper_lens{k + 1}.dot")
            g.write_csv(run.path(f"mapper_lens{k + 1}_nodes.csv"), run.path(f"mapper_lens{k + 1}_edges.csv"))
            if run.plots:
                plotting.plot_mapper(g, run.path(f"mapper_lens{k + 1}.svg"), color_by=opp,
                                     title=f"lens F{k + 1}", seed=run.cfg["seed"])
    return {"q_size": len(res.subpopulation.q) if res.subpopulation is not None else None}


def cmd_benchmark(run: Run, args):
    matrix = _matrix(run, args.returns)
    res = _benchmark(run, matrix)
    write_metrics_csv(res.rows, run.path("metrics.csv"), extra=[{"mu_base": run.cfg["mu_base"]}] * len(res.rows))
    if run.plots:
        plotting.plot_benchmark(res.rows, run.path("benchmark.svg"), title=f"mu_base = {run.cfg['mu_base']}")
    return {r.method: {"predicted_positive": r.predicted_positive, "precision": r.precision, "f1": r.f1}
            for r in res.rows}


def _pairs(run: Run, args):
    """``(opportunistic series, reference pools)``; real data has no reference pools."""
    cfg = run.cfg
    if args.transactions is not None:
        if args.announcements is None:
            raise InputError("--transactions needs --announcements")
        cal = read_announcements_csv(args.announcements, cfg["delta"])
        series = build_series(read_transactions_csv(args.transactions), cal)
        return [s for s in series if s.is_active], None
    if args.series is not None:
        return [s for s in read_series_csv(args.series) if s.is_active], None
    opp, pools = simulate_power_panel(cfg["n_pairs"], cfg["pool_size"], cfg["shift"], cfg["seed"],
                                      n_days=cfg["n_days"])
    write_series_csv(opp + [s for p in pools for s in p], run.path("series.csv"))
    return opp, pools


def _diagrams(run: Run, series):
    out = []
    for s in series:
        try:
            out.append(pair_diagrams(s, run.cfg["resolution"], run.cfg["bandwidth_factor"], run.cfg["pad"]))
        except InputError as exc:
            logger.info("pair %s/%s skipped: %s", s.agent_id, s.company_id, exc)
            out.append(None)
    return out


def cmd_tda(run: Run, args):
    opp, pools = _pairs(run, args)
    refs = [p[0] for p in pools] if pools else []
    groups = [("opportunistic", opp)] + ([("reference", refs)] if refs else [])
    diagrams, keys, dist_rows, by_group = [], [], [], {}
    p = run.cfg["wasserstein_p"]
    first = None
    for name, series in groups:
        dgs = _diagrams(run, series)
        by_group[name] = [None if d is None else (d.pre[0], d.non[0]) for d in dgs]
        if first is None:
            first = next(((s, d) for s, d in zip(series, dgs) if d is not None), None)
        for s, d in zip(series, dgs):
            if d is None:
                continue
            for period, pd_pair in (("pre", d.pre), ("non", d.non)):
                diagrams.extend(pd_pair)
                keys.extend([(s.agent_id, s.company_id, period)] * len(pd_pair))
            dist_rows.append([name, s.agent_id, s.company_id, repr(wasserstein(d.pre[0], d.non[0], p=p)),
                              repr(bottleneck(d.pre[0], d.non[0]))])
    write_diagrams_csv(diagrams, run.path("diagrams.csv"), keys)
    with open(run.path("distances.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "agent_id", "company_id", "wasserstein_h0", "bottleneck_h0"])
        w.writerows(dist_rows)
    summary = {}
    if refs:
        ds = distance_summary(by_group["opportunistic"], by_group["reference"], p=p)
        summary = {"pairs": int(len(ds.opportunistic)), "dropped": ds.dropped, "one_sample_p": ds.one_sample_p,
                   "paired_p": ds.paired_p, "bottleneck_paired_p": ds.bottleneck_paired_p}
        with open(run.path("distance_summary.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(summary))
            w.writerow([repr(v) if isinstance(v, float) else v for v in summary.values()])
    if run.plots and first is not None:
        s, d = first
        for period, pd_pair in (("pre", d.pre), ("non", d.non)):
            plotting.plot_diagram(pd_pair, run.path(f"diagram_{s.agent_id}_{period}.svg"), title=f"{s.agent_id} {period}")
            plotting.plot_barcode(pd_pair, run.path(f"barcode_{s.agent_id}_{period}.svg"), title=f"{s.agent_id} {period}")
    return summary


def cmd_gpd_fit(run: Run, args):
    opp, pools = _pairs(run, args)
    series = opp + ([s for p in pools for s in p] if pools else [])
    rows = []
    for s, d in zip(series, _diagrams(run, series)):
        if d is None:
            continue
        try:
            pre_m, non_m = pair_models(d.pre[0], d.non[0], run.cfg["n_params"], run.cfg["n_quad"], run.cfg["seed"])
        except ContagionError as exc:
            logger.info("pair %s/%s not fitted: %s", s.agent_id, s.company_id, exc)
            continue
        rows += [(s.agent_id, s.company_id, "pre", pre_m), (s.agent_id, s.company_id, "non", non_m)]
    write_fits_csv(rows, run.path("fits.csv"))
    return {"fitted_pairs": len(rows) // 2}


def cmd_gpd_test(run: Run, args):
    cfg = run.cfg
    opp, pools = _pairs(run, args)
    if pools is None:
        raise InputError("the paired test needs reference pools; run it on the synthetic panel")
    res = power_check(opp, pools, cfg["n_params"], cfg["n_resamples"], cfg["seed"], resolution=cfg["resolution"],
                      bandwidth_factor=cfg["bandwidth_factor"], n_quad=cfg["n_quad"])
    write_tests_csv([(a, c, r) for a, c, t in res.tests for r in t], run.path("tests.csv"))
    with open(run.path("paired_tests.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["resample", "param", "p_value"])
        for k, row in enumerate(res.p_values):
            w.writerows([k, j, repr(float(v))] for j, v in enumerate(row))
    mean_p = res.p_values.mean(0).tolist()
    return {"pairs": res.n_pairs, "mean_p": mean_p,
            "rejection_rate_0.05": (res.p_values < 0.05).mean(0).tolist()}


def cmd_report(run: Run, args):
    """Collect every benchmark and paired-test table found in ``--out``."""
    rows, extra = [], []
    for path in sorted(run.out.rglob("metrics.csv")):
        with open(path, newline="") as fh:
            mus = [r.get("mu_base", "") for r in csv.DictReader(fh)]
        for mu, r in zip(mus, read_metrics_csv(path)):
            rows.append(r)
            extra.append({"source": str(path.parent.relative_to(run.out)) or ".", "mu_base": mu})
    if not rows:
        raise InputError(f"no metrics.csv under {run.out}; run the benchmark verb first")
    write_metrics_csv(rows, run.path("report_metrics.csv"), extra)
    power = {}
    for path in sorted(run.out.rglob("manifest_gpd-test.json")):
        power[str(path.parent.relative_to(run.out)) or "."] = json.loads(path.read_text()).get("result")
    if run.plots:
        plotting.plot_benchmark(rows, run.path("report_metrics.svg"), title="all benchmark runs")
    return {"metric_rows": len(rows), "paired_tests": power}


COMMANDS = {
    "simulate": cmd_simulate,
    "cluster": cmd_cluster,
    "benchmark": cmd_benchmark,
    "tda": cmd_tda,
    "gpd-fit": cmd_gpd_fit,
    "gpd-test": cmd_gpd_test,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, {"seed": args.seed, "mu_base": args.mu_base, "methods": args.methods,
                                        "delta": args.delta})
        run = Run(args.verb, cfg, args.out, not args.no_plots)
        result = COMMANDS[args.verb](run, args)
        run.finish(result=result)
    except (ContagionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"verb": args.verb, "out": str(args.out), "result": result}, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
