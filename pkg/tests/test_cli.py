import csv
import json

import pytest

from contagion_tda.cli import main

SMALL = """
n_core = 120
n_isolated = 10
attach_param = 3
runs = 40
n_clusters = 12
dbscan_min_pts = 5
n_pairs = 3
pool_size = 2
n_days = 120
n_resamples = 4
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def run(cfg, out, *verbs, extra=()):
    for v in verbs:
        assert main([v, "--config", str(cfg), "--out", str(out), "--seed", "1", *extra]) == 0


def test_benchmark_outputs(cfg, tmp_path):
    out = tmp_path / "run"
    run(cfg, out, "simulate", "cluster", "benchmark", "report")
    with open(out / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows][0] == "Mapper" and len(rows) == 8
    assert all(int(r["tp"]) + int(r["fn"]) == int(rows[0]["tp"]) + int(rows[0]["fn"]) for r in rows)
    assert (out / "mapper_lens1.dot").read_text().startswith("graph mapper_lens1 {")
    assert (out / "benchmark.svg").read_text().lstrip().startswith("<?xml")
    manifest = json.loads((out / "manifest_benchmark.json").read_text())
    assert manifest["config"]["seed"] == 1 and len(manifest["config_hash"]) == 16
    assert "metrics.csv" in manifest["outputs"]
    assert (out / "report_metrics.csv").exists()


def test_method_subset_and_mu_flag(cfg, tmp_path):
    out = tmp_path / "run"
    run(cfg, out, "benchmark", extra=("--methods", "Mapper,KNN", "--mu-base", "0.0015", "--no-plots"))
    lines = (out / "metrics.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("0.0015,Mapper")
    assert not (out / "benchmark.svg").exists()


def test_diagram_verbs_are_deterministic(cfg, tmp_path):
    for name in ("a", "b"):
        run(cfg, tmp_path / name, "tda", extra=("--no-plots",))
    for f in ("diagrams.csv", "distances.csv", "distance_summary.csv", "series.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_diagram_figures(cfg, tmp_path):
    run(cfg, tmp_path, "tda")
    assert sorted(p.name for p in tmp_path.glob("*.svg")) == [
        "barcode_opp0_non.svg", "barcode_opp0_pre.svg", "diagram_opp0_non.svg", "diagram_opp0_pre.svg",
    ]


def test_gibbs_verbs(cfg, tmp_path):
    run(cfg, tmp_path, "gpd-fit", "gpd-test", extra=("--no-plots",))
    with open(tmp_path / "fits.csv", newline="") as fh:
        fits = list(csv.DictReader(fh))
    assert {r["period"] for r in fits} == {"pre", "non"}
    with open(tmp_path / "paired_tests.csv", newline="") as fh:
        p = [float(r["p_value"]) for r in csv.DictReader(fh)]
    assert len(p) == 4 and all(0 <= x <= 1 for x in p)


def test_series_input(cfg, tmp_path):
    run(cfg, tmp_path / "sim", "tda", extra=("--no-plots",))
    run(cfg, tmp_path / "ext", "tda", extra=("--no-plots", "--series", str(tmp_path / "sim" / "series.csv")))
    with open(tmp_path / "ext" / "distances.csv", newline="") as fh:
        assert len(list(csv.DictReader(fh))) == 3 * 3
    assert main(["gpd-test", "--out", str(tmp_path / "x"), "--series", str(tmp_path / "sim" / "series.csv")]) == 2


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 3\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "unknown config key" in capsys.readouterr().err
    assert main(["report", "--out", str(tmp_path / "empty")]) == 2
