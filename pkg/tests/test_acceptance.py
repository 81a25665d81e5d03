"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Run just this file with ``pytest tests/test_acceptance.py -v`` or directly
with ``python3 tests/test_acceptance.py``.  Criterion 4 trains 5 seeds x 2
modes x 20k steps and takes roughly half an hour on one core.
"""
import json
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from robustirs.channel import NetworkGeometry, UncertaintyModel, ball_sample, sample_channel
from robustirs.config import ExperimentConfig
from robustirs.harness import read_csv, run_benchmark, run_sweep, run_training
from robustirs.robust import align_phases, build_lmis, robust_beamforming
from robustirs.solver import OPTIMAL, solve_power_min_sdp
from robustirs.training import MODEL_FREE, MODES, OPTIMIZATION_DRIVEN
from robustirs.verify import run_verification, validate_report


# collected for the terminal summary in conftest.py
RESULTS = []


def announce(number, ok, detail):
    line = f"[acceptance {number}] {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


def closed_form_sdp():
    """100 zero-radius, zero-demand instances against the matched-filter optimum."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        M, N = int(rng.integers(1, 5)), int(rng.integers(1, 9))
        geo = NetworkGeometry(M=M, N=N, mu=0.0, gamma1=float(rng.uniform(1.0, 20.0)))
        ch = sample_channel(geo, rng)
        rho = float(rng.uniform(0.05, 0.95))
        gn2 = float(np.linalg.norm(ch.g) ** 2)
        # co-phased reflection adds every |g^H Hf_n| coherently
        kappa = float(np.sum(np.abs(ch.g.conj() @ ch.Hf))) / gn2
        expected = geo.gamma1 / ((1 + rho * kappa) ** 2 * gn2)
        aligned = align_phases(ch.g, ch.Hf)
        s = np.sqrt(gn2)
        lmis = build_lmis(aligned.theta, rho, ch.g, aligned.kappa, UncertaintyModel(ch.H, ch.Hf), geo,
                          channel_scale=s, power_scale=geo.gamma1)
        sol = solve_power_min_sdp(lmis, M)
        if sol.status != OPTIMAL:
            worst = np.inf
            break
        got = sol.objective * geo.gamma1 / gn2
        worst = max(worst, abs(got - expected) / expected)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed <= 60.0
    return ok, f"max relative error {worst:.2e} (tol 1e-3) over 100 instances in {elapsed:.1f} s (limit 60 s)"


def robust_feasibility():
    """Pipeline beamformers against 10^3 ball samples of each uncertainty set."""
    geo = NetworkGeometry()
    beta, samples, tol = 0.01, 1000, 1e-6
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    worst_snr = worst_energy = 1.0
    feasible = attempts = 0
    while feasible < 50 and attempts < 200:
        attempts += 1
        ch = sample_channel(geo, rng)
        unc = UncertaintyModel.from_beta(ch.H, ch.Hf, beta)
        rho = float(rng.uniform(0.1, 0.9))
        res = robust_beamforming(rho, unc, ch.g, geo, rng=rng)
        if not res.ok:
            continue
        feasible += 1
        w, theta = res.w, res.theta
        DF = ball_sample(rng, unc.Hf_bar.shape, unc.delta_f, samples)
        DH = ball_sample(rng, unc.H_bar.shape, unc.delta_h, samples)
        g_hat = ch.g[None, :] + rho * np.einsum("smn,n->sm", unc.Hf_bar[None] + DF, theta)
        snr = np.abs(g_hat.conj() @ w) ** 2
        reach = np.einsum("smn,m->sn", (unc.H_bar[None] + DH).conj(), w)
        harvest = geo.eta * (1 - rho**2) * np.sum(np.abs(reach) ** 2, axis=1)
        worst_snr = min(worst_snr, float(np.mean(snr >= geo.gamma1 * (1 - tol))))
        worst_energy = min(worst_energy, float(np.mean(harvest >= geo.energy_demand * (1 - tol))))
    elapsed = time.perf_counter() - t0
    ok = feasible == 50 and worst_snr >= 0.999 and worst_energy >= 0.999 and elapsed <= 300.0
    return ok, (f"{feasible} feasible instances ({attempts} drawn); worst SNR pass {worst_snr:.4f}, "
                f"worst energy pass {worst_energy:.4f} (need 0.999); {elapsed:.1f} s (limit 300 s)")


SWEEPS = {"gamma1": (2.0, 4.0, 8.0), "N": (8, 16, 32), "beta": (0.0, 0.01, 0.05)}


def sweep_trends(out_dir):
    means, feasible = {}, True
    for param, values in SWEEPS.items():
        cfg = ExperimentConfig().with_updates(sweep={"parameter": param, "values": list(values), "draws": 50})
        rows = read_csv(run_sweep(cfg, out_dir))
        feasible &= all(int(r["feasible"]) == 50 for r in rows)
        means[param] = [float(r["mean_power"]) for r in rows]
    g, n, b = means["gamma1"], means["N"], means["beta"]
    checks = {
        "all draws feasible": feasible,
        "gamma1 strictly increasing": g[0] < g[1] < g[2],
        "N nonincreasing": n[0] >= n[1] >= n[2],
        "beta nondecreasing": b[0] <= b[1] <= b[2],
    }
    detail = "; ".join(f"{p}: " + ", ".join(f"{m:.1f}" for m in means[p]) + " W" for p in SWEEPS)
    failed = [k for k, v in checks.items() if not v]
    return not failed, detail + (f"; failed: {failed}" if failed else " (50 draws each)")


def training_trends(out_dir):
    cfg = ExperimentConfig()
    t0 = time.perf_counter()
    out = run_training(cfg, out_dir)
    elapsed = time.perf_counter() - t0
    s = json.loads((out / "trend_summary.json").read_text())
    free, opt = s[MODEL_FREE], s[OPTIMIZATION_DRIVEN]
    a = free["late"] < free["early"] and opt["late"] < opt["early"]
    b = opt["late"] <= free["late"]
    frac = s["catch_up_fraction"]
    c = frac is not None and frac <= 0.5
    ok = a and b and c and elapsed <= 3600.0
    detail = (f"(a) model-free {free['early']:.0f} -> {free['late']:.0f} W, optimization-driven "
              f"{opt['early']:.0f} -> {opt['late']:.0f} W [{'ok' if a else 'no'}]; "
              f"(b) final {opt['late']:.0f} <= {free['late']:.0f} [{'ok' if b else 'no'}]; "
              f"(c) catch-up at {frac if frac is None else f'{frac:.3f}'} of the run (<= 0.5) [{'ok' if c else 'no'}]; "
              f"{len(cfg.seeds)} seeds x {cfg.training.steps} steps in {elapsed / 60:.1f} min")
    return ok, detail


def benchmark_trends(out_dir):
    rows = read_csv(run_benchmark(ExperimentConfig(), out_dir))
    sdr = [float(r["sdr_ms"]) for r in rows]
    drl = [float(r["drl_ms"]) for r in rows]
    inc = all(a < b for a, b in zip(sdr, sdr[1:]))
    ratio = max(drl) / min(drl)
    ok = inc and ratio <= 2.0 and all(r["status"] == "ok" for r in rows)
    detail = (f"MN {[int(r['MN']) for r in rows]}: sdr_ms " + ", ".join(f"{x:.2f}" for x in sdr)
              + f" [{'increasing' if inc else 'NOT increasing'}]; drl_ms max/min {ratio:.2f} (<= 2)")
    return ok, detail


def verification_suite(out_dir):
    report = run_verification(ExperimentConfig(), out_dir)
    validate_report(report)
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    detail = ", ".join(f"{c['name']}={c['measured']:.3g}" if c["measured"] is not None else c["name"]
                       for c in report["checks"])
    return report["passed"], detail + (f"; failed: {failed}" if failed else "")


def determinism(out_dir):
    cfg = ExperimentConfig().with_updates(training={"steps": 1000}, seeds=[0, 1])
    a = run_training(cfg, Path(out_dir) / "a")
    b = run_training(cfg, Path(out_dir) / "b")
    names = sorted(p.name for p in a.glob("run_*.csv"))
    same = [n for n in names if (a / n).read_bytes() == (b / n).read_bytes()]
    modes = {m for m in MODES if any(m in n for n in names)}
    ok = len(names) == 4 and len(same) == len(names) and modes == set(MODES)
    return ok, f"{len(same)}/{len(names)} run CSVs byte-identical across reruns (modes: {sorted(modes)}, 1000 steps)"


def test_criterion_1_closed_form_sdp():
    ok, detail = closed_form_sdp()
    assert announce(1, ok, detail), detail


def test_criterion_2_robust_feasibility():
    ok, detail = robust_feasibility()
    assert announce(2, ok, detail), detail


def test_criterion_3_sweep_trends(tmp_path):
    ok, detail = sweep_trends(tmp_path)
    assert announce(3, ok, detail), detail


@pytest.mark.slow
def test_criterion_4_training_trends(tmp_path):
    ok, detail = training_trends(tmp_path)
    assert announce(4, ok, detail), detail


def test_criterion_5_benchmark_trends(tmp_path):
    ok, detail = benchmark_trends(tmp_path)
    assert announce(5, ok, detail), detail


def test_criterion_6_verification_suite(tmp_path):
    ok, detail = verification_suite(tmp_path)
    assert announce(6, ok, detail), detail


def test_criterion_7_determinism(tmp_path):
    ok, detail = determinism(tmp_path)
    assert announce(7, ok, detail), detail


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        results = [
            announce(1, *closed_form_sdp()),
            announce(2, *robust_feasibility()),
            announce(3, *sweep_trends(Path(tmp) / "3")),
            announce(4, *training_trends(Path(tmp) / "4")),
            announce(5, *benchmark_trends(Path(tmp) / "5")),
            announce(6, *verification_suite(Path(tmp) / "6")),
            announce(7, *determinism(Path(tmp) / "7")),
        ]
    sys.exit(0 if all(results) else 1)
