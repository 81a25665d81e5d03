"""Experiment drivers behind the command line.

Output layout under the output directory::

    train/run_<mode>_seed<seed>.csv      one MetricsRow per training step
    train/aggregate_<mode>.csv           per-step median and 10th/90th percentiles across seeds
    train/timing_<mode>_seed<seed>.csv   wall-clock time per step (not reproducible)
    train/checkpoint_<mode>_seed<seed>.zip
    train/trend_summary.json             early/late medians and the catch-up step
    sweep/sweep_<parameter>.csv
    benchmark/benchmark.csv              '#' lines carry hardware metadata
    verify/report.json
"""
from __future__ import annotations

import csv
import json
import logging
import os
import platform
import time
import timeit
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .agent import DDPGAgent, NumericalFailure
from .channel import NetworkGeometry, UncertaintyModel, sample_channel
from .config import ExperimentConfig
from .env import Environment
from .robust import robust_beamforming
from .training import MODEL_FREE, OPTIMIZATION_DRIVEN, make_training_state, train_step

logger = logging.getLogger(__name__)

__all__ = [
    "MetricsRow",
    "METRIC_COLUMNS",
    "AGGREGATE_METRICS",
    "run_training",
    "aggregate_runs",
    "trend_summary",
    "run_sweep",
    "run_benchmark",
    "read_csv",
]


@dataclass
class MetricsRow:
    episode: int
    step: int
    mode: str
    transmit_power: float
    reward: float
    rho: float
    outage_rate: float
    y_model: float
    y_critic: float
    merge_win_rate: float
    wall_time_ms: float
    action_power: float

    def cells(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(_fmt(v) if isinstance(v, float) else str(v))
        return out


METRIC_COLUMNS = [f.name for f in fields(MetricsRow)]
AGGREGATE_METRICS = ("transmit_power", "reward", "rho", "outage_rate")


def _fmt(x: float) -> str:
    return repr(float(x))


def read_csv(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _run_one(cfg: ExperimentConfig, mode: str, seed: int, out_dir: Path):
    ts = make_training_state(cfg.geometry, cfg.episode, cfg.agent, seed)
    run_path = out_dir / f"run_{mode}_seed{seed}.csv"
    timing_path = out_dir / f"timing_{mode}_seed{seed}.csv"
    record = cfg.training.record_wall_time
    with open(run_path, "w", newline="") as fh, open(timing_path, "w", newline="") as th:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        timer = csv.writer(th, lineterminator="\n")
        timer.writerow(["step", "wall_time_ms"])
        for _ in range(cfg.training.steps):
            t0 = time.perf_counter()
            try:
                m = train_step(ts, mode)
            except NumericalFailure:
                dump = out_dir / f"failure_{mode}_seed{seed}.zip"
                ts.agent.save(dump)
                logger.error("numerical failure in %s seed %d at step %d; state saved to %s",
                             mode, seed, ts.step, dump)
                raise
            elapsed = (time.perf_counter() - t0) * 1000.0
            row = MetricsRow(
                m["episode"], m["step"], mode, m["transmit_power"], m["reward"], m["rho"],
                m["outage_rate"], m["y_model"], m["y_critic"], m["merge_win_rate"],
                elapsed if record else 0.0, m["action_power"],
            )
            writer.writerow(row.cells())
            timer.writerow([m["step"], _fmt(elapsed)])
    ts.agent.save(out_dir / f"checkpoint_{mode}_seed{seed}.zip")
    return run_path


def aggregate_runs(run_paths, out_path) -> Path:
    """Per-step median and 10th/90th percentiles of each metric across runs."""
    tables = [read_csv(p) for p in run_paths]
    n = min(len(t) for t in tables)
    cols = ["step", "runs"]
    for m in AGGREGATE_METRICS:
        cols += [f"median_{m}", f"p10_{m}", f"p90_{m}"]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        data = {m: np.array([[float(t[i][m]) for i in range(n)] for t in tables]) for m in AGGREGATE_METRICS}
        stats = {m: np.percentile(data[m], [50, 10, 90], axis=0) for m in AGGREGATE_METRICS}
        for i in range(n):
            row = [tables[0][i]["step"], str(len(tables))]
            for m in AGGREGATE_METRICS:
                row += [_fmt(stats[m][0][i]), _fmt(stats[m][1][i]), _fmt(stats[m][2][i])]
            writer.writerow(row)
    return Path(out_path)


def trend_summary(median_power: dict, fraction: float = 0.1, window_fraction: float = 0.025) -> dict:
    """Early and late medians per mode and when optimization-driven catches up.

    ``median_power`` maps a mode to its per-step median transmit power.  The
    early (late) value is the median over the first (last) ``fraction`` of
    steps.  The catch-up step is the first step at which the running median
    of the optimization-driven series, over a trailing window of
    ``window_fraction`` of the run, is at or below the model-free late value.
    """
    out = {}
    for mode, series in median_power.items():
        series = np.asarray(series, dtype=float)
        k = max(int(len(series) * fraction), 1)
        out[mode] = {"early": float(np.median(series[:k])), "late": float(np.median(series[-k:])),
                     "steps": int(len(series))}
    if MODEL_FREE in out and OPTIMIZATION_DRIVEN in out:
        target = out[MODEL_FREE]["late"]
        series = np.asarray(median_power[OPTIMIZATION_DRIVEN], dtype=float)
        w = max(int(len(series) * window_fraction), 1)
        hit = None
        for i in range(len(series)):
            if np.median(series[max(0, i - w + 1):i + 1]) <= target:
                hit = i + 1
                break
        out["catch_up_step"] = hit
        out["catch_up_fraction"] = None if hit is None else hit / out[MODEL_FREE]["steps"]
    return out


def run_training(cfg: ExperimentConfig, out_dir=None, seed_offset: int = 0) -> Path:
    out_dir = Path(out_dir or cfg.output_dir) / "train"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(cfg.to_json() + "\n")
    medians = {}
    for mode in cfg.training.modes:
        paths = []
        for seed in cfg.seeds:
            s = seed + seed_offset
            logger.info("training %s seed %d for %d steps", mode, s, cfg.training.steps)
            paths.append(_run_one(cfg, mode, s, out_dir))
        agg = aggregate_runs(paths, out_dir / f"aggregate_{mode}.csv")
        medians[mode] = [float(r["median_transmit_power"]) for r in read_csv(agg)]
    summary = trend_summary(medians)
    (out_dir / "trend_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out_dir


def _sweep_geometry(cfg: ExperimentConfig, parameter: str, value):
    geo = cfg.geometry
    kw = {f.name: getattr(geo, f.name) for f in fields(NetworkGeometry)}
    beta = cfg.sweep.beta
    if parameter == "gamma1":
        kw["gamma1"] = float(value)
    elif parameter == "N":
        kw["N"] = int(value)
    elif parameter == "beta":
        beta = float(value)
    return NetworkGeometry(**kw), beta


def run_sweep(cfg: ExperimentConfig, out_dir=None, seed_offset: int = 0) -> Path:
    """Mean and spread of the optimizer's transmit power for each sweep value.

    Draw ``i`` of every value uses the same random stream, so values are
    compared on common channels wherever the dimensions agree.
    """
    sw = cfg.sweep
    out_dir = Path(out_dir or cfg.output_dir) / "sweep"
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"sweep_{sw.parameter}.csv"
    seed = cfg.seeds[0] + seed_offset
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parameter", "value", "mean_power", "std_power", "draws", "feasible", "rho", "beta"])
        for value in sw.values:
            geo, beta = _sweep_geometry(cfg, sw.parameter, value)
            powers = []
            for i in range(sw.draws):
                rng = np.random.default_rng([seed, i])
                ch = sample_channel(geo, rng)
                unc = UncertaintyModel.from_beta(ch.H, ch.Hf, beta)
                res = robust_beamforming(sw.rho, unc, ch.g, geo, rng=rng, backend=sw.backend)
                if res.ok:
                    powers.append(res.transmit_power)
            p = np.array(powers)
            mean = float(p.mean()) if p.size else float("nan")
            std = float(p.std()) if p.size else float("nan")
            writer.writerow([sw.parameter, _fmt(float(value)), _fmt(mean), _fmt(std), sw.draws, len(powers),
                             _fmt(sw.rho), _fmt(beta)])
    return path


def _hardware_lines():
    import cvxopt

    return [
        f"# platform={platform.platform()}",
        f"# processor={platform.processor() or platform.machine()}",
        f"# cpus={os.cpu_count()}",
        f"# python={platform.python_version()} numpy={np.__version__} cvxopt={cvxopt.__version__}",
    ]


def run_benchmark(cfg: ExperimentConfig, out_dir=None, seed_offset: int = 0) -> Path:
    """Median wall time of the full SDR pipeline and of one agent decision per size.

    The pipeline uses the full-size LMIs, as a plain SDR implementation
    would.  The first ``warmup`` trials per size are run but not timed into
    the median.  A checkpoint is used for the agent when its dimensions
    match the size; otherwise a freshly initialized actor is timed and the
    row is flagged ``random-init`` (inference cost does not depend on the
    weights).
    """
    bm = cfg.benchmark
    out_dir = Path(out_dir or cfg.output_dir) / "benchmark"
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "benchmark.csv"
    seed = cfg.seeds[0] + seed_offset
    trained = DDPGAgent.load(bm.checkpoint) if bm.checkpoint else None
    with open(path, "w", newline="") as fh:
        for line in _hardware_lines():
            fh.write(line + "\n")
        fh.write(f"# timing=time.perf_counter median over {bm.trials} trials after {bm.warmup} discarded\n")
        fh.write("# drl_ms trials each average an inner loop sized by timeit autorange\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["M", "N", "MN", "sdr_ms", "drl_ms", "trials", "actor", "status"])
        for size in bm.sizes:
            M, N = bm.M, size // bm.M
            kw = {f.name: getattr(cfg.geometry, f.name) for f in fields(NetworkGeometry)}
            kw.update(M=M, N=N)
            geo = NetworkGeometry(**kw)
            rng = np.random.default_rng([seed, size])
            sdr, failed = [], 0
            for trial in range(bm.warmup + bm.trials):
                ch = sample_channel(geo, rng)
                unc = UncertaintyModel.from_beta(ch.H, ch.Hf, bm.beta)
                t0 = time.perf_counter()
                res = robust_beamforming(bm.rho, unc, ch.g, geo, rng=rng, compressed=False)
                dt = (time.perf_counter() - t0) * 1000.0
                if trial >= bm.warmup:
                    sdr.append(dt)
                    failed += not res.ok
            env = Environment(geo, cfg.episode, np.random.default_rng([seed, size, 1]))
            env.reset()
            if trained is not None and trained.state_dim == env.state_dim and trained.codec.N == N:
                agent, label = trained, "checkpoint"
            else:
                agent, label = DDPGAgent(env.state_dim, M, N, cfg.agent, np.random.default_rng([seed, size, 2])), "random-init"
            # one decision takes tens of microseconds, so each trial averages a loop
            timer = timeit.Timer(lambda: agent.act(env.encode(), explore=False), timer=time.perf_counter)
            number, _ = timer.autorange()
            timer.repeat(repeat=bm.warmup, number=number)
            drl = [t * 1000.0 / number for t in timer.repeat(repeat=bm.trials, number=number)]
            status = "ok" if failed == 0 else f"failed-{failed}"
            writer.writerow([M, N, M * N, _fmt(float(np.median(sdr))), _fmt(float(np.median(drl))),
                             bm.trials, label, status])
            fh.flush()
    return path
