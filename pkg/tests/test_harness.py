import csv
import statistics

import numpy as np
import pytest

from robustirs.channel import sample_channel
from robustirs.config import ExperimentConfig
from robustirs.harness import (
    AGGREGATE_METRICS,
    METRIC_COLUMNS,
    read_csv,
    run_benchmark,
    run_sweep,
    run_training,
    trend_summary,
)
from robustirs.training import MODEL_FREE, OPTIMIZATION_DRIVEN


def tiny_config(steps=30, seeds=(0, 1)):
    return ExperimentConfig().with_updates(
        agent={"hidden": [8, 8], "batch_size": 8, "buffer_capacity": 100, "opt_every": 4},
        episode={"T": 2, "steps_per_episode": 25},
        training={"steps": steps},
        seeds=list(seeds),
    )


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    cfg = tiny_config()
    return cfg, run_training(cfg, out)


def test_training_file_layout(trained):
    cfg, out = trained
    runs = sorted(p.name for p in out.glob("run_*.csv"))
    aggs = sorted(p.name for p in out.glob("aggregate_*.csv"))
    assert len(runs) == 4 and len(aggs) == 2
    assert (out / "trend_summary.json").exists() and (out / "config.json").exists()
    assert len(list(out.glob("checkpoint_*.zip"))) == 4


def test_run_csv_schema(trained):
    cfg, out = trained
    path = out / f"run_{OPTIMIZATION_DRIVEN}_seed0.csv"
    with open(path) as fh:
        header = next(csv.reader(fh))
    assert header == METRIC_COLUMNS
    rows = read_csv(path)
    assert len(rows) == cfg.training.steps
    for r in rows:
        vals = [float(r[c]) for c in METRIC_COLUMNS if c != "mode"]
        assert all(np.isfinite(vals))
        assert 0.0 <= float(r["outage_rate"]) <= 1.0
        assert float(r["wall_time_ms"]) == 0.0


def test_rerun_is_byte_identical(trained, tmp_path):
    cfg, out = trained
    again = run_training(cfg, tmp_path)
    for p in out.glob("run_*.csv"):
        assert (again / p.name).read_bytes() == p.read_bytes()
    for p in out.glob("aggregate_*.csv"):
        assert (again / p.name).read_bytes() == p.read_bytes()


def test_aggregate_matches_independent_percentiles(trained):
    cfg, out = trained
    for mode in (MODEL_FREE, OPTIMIZATION_DRIVEN):
        runs = [read_csv(out / f"run_{mode}_seed{s}.csv") for s in cfg.seeds]
        agg = read_csv(out / f"aggregate_{mode}.csv")
        for i, row in enumerate(agg):
            for m in AGGREGATE_METRICS:
                vals = [float(r[i][m]) for r in runs]
                deciles = statistics.quantiles(vals, n=10, method="inclusive")
                assert float(row[f"median_{m}"]) == pytest.approx(statistics.median(vals), rel=1e-12, abs=1e-300)
                assert float(row[f"p10_{m}"]) == pytest.approx(deciles[0], rel=1e-12, abs=1e-300)
                assert float(row[f"p90_{m}"]) == pytest.approx(deciles[-1], rel=1e-12, abs=1e-300)


def test_wall_time_recorded_on_request(tmp_path):
    cfg = tiny_config(steps=5, seeds=(0,)).with_updates(training={"record_wall_time": True,
                                                                  "modes": [MODEL_FREE]})
    out = run_training(cfg, tmp_path)
    rows = read_csv(out / f"run_{MODEL_FREE}_seed0.csv")
    assert all(float(r["wall_time_ms"]) > 0 for r in rows)


def test_seed_offset_shifts_file_names(tmp_path):
    cfg = tiny_config(steps=3, seeds=(0,)).with_updates(training={"modes": [MODEL_FREE]})
    out = run_training(cfg, tmp_path, seed_offset=10)
    assert (out / f"run_{MODEL_FREE}_seed10.csv").exists()


def test_trend_summary_catch_up():
    steps = 1000
    free = np.linspace(10, 5, steps)
    opt = np.concatenate([np.linspace(10, 4, 300), np.full(700, 4.0)])
    s = trend_summary({MODEL_FREE: free, OPTIMIZATION_DRIVEN: opt})
    k = steps // 10
    assert s[MODEL_FREE]["early"] == pytest.approx(np.median(free[:k]))
    assert s[MODEL_FREE]["late"] == pytest.approx(np.median(free[-k:]))
    late = s[MODEL_FREE]["late"]
    # running median over 25 steps crosses the model-free late level
    hit = next(i + 1 for i in range(steps) if np.median(opt[max(0, i - 24):i + 1]) <= late)
    assert s["catch_up_step"] == hit
    assert s["catch_up_fraction"] == pytest.approx(hit / steps)


def test_trend_summary_never_catches_up():
    s = trend_summary({MODEL_FREE: np.ones(100), OPTIMIZATION_DRIVEN: 2 * np.ones(100)})
    assert s["catch_up_step"] is None and s["catch_up_fraction"] is None


def test_sweep_output(tmp_path):
    cfg = ExperimentConfig().with_updates(sweep={"parameter": "gamma1", "values": [2, 8], "draws": 4})
    rows = read_csv(run_sweep(cfg, tmp_path))
    assert [float(r["value"]) for r in rows] == [2.0, 8.0]
    assert all(int(r["feasible"]) == 4 for r in rows)
    assert float(rows[0]["mean_power"]) < float(rows[1]["mean_power"])


def test_sweep_beta_zero_row_matches_closed_form(tmp_path):
    draws, rho = 6, 0.5
    cfg = ExperimentConfig().with_updates(geometry={"mu": 0.0},
                                          sweep={"parameter": "beta", "values": [0.0], "draws": draws, "rho": rho})
    row = read_csv(run_sweep(cfg, tmp_path))[0]
    geo = cfg.geometry
    powers = []
    for i in range(draws):
        ch = sample_channel(geo, np.random.default_rng([cfg.seeds[0], i]))
        gn2 = np.linalg.norm(ch.g) ** 2
        kappa = np.sum(np.abs(ch.g.conj() @ ch.Hf)) / gn2
        powers.append(geo.gamma1 / ((1 + rho * kappa) ** 2 * gn2))
    assert float(row["mean_power"]) == pytest.approx(np.mean(powers), rel=1e-3)


def test_benchmark_output(tmp_path, trained):
    cfg, out = trained
    ckpt = out / f"checkpoint_{MODEL_FREE}_seed0.zip"
    bench = cfg.with_updates(benchmark={"sizes": [8, 32], "trials": 2, "warmup": 1, "checkpoint": str(ckpt)})
    path = run_benchmark(bench, tmp_path)
    lines = path.read_text().splitlines()
    assert any(ln.startswith("# platform=") for ln in lines)
    assert any("discarded" in ln for ln in lines if ln.startswith("#"))
    rows = read_csv(path)
    assert [int(r["MN"]) for r in rows] == [8, 32]
    assert {"M", "N", "MN", "sdr_ms", "drl_ms", "trials"} <= set(rows[0])
    # the checkpoint has N = 8, so it serves MN = 32 and a fresh actor serves MN = 8
    assert [r["actor"] for r in rows] == ["random-init", "checkpoint"]
    assert all(r["status"] == "ok" and float(r["sdr_ms"]) > 0 for r in rows)
