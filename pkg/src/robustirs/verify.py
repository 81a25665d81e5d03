"""Invariant checks run by ``robustirs verify``.

Each check returns a :class:`Check` with the measured quantity and the
tolerance it was held to.  The report is a JSON object::

    {"schema_version": 1, "passed": bool,
     "checks": [{"name", "passed", "measured", "tolerance", "detail"}, ...]}
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .agent import ActionCodec, AgentConfig, DDPGAgent
from .channel import (
    BeamformingAction,
    NetworkGeometry,
    UncertaintyModel,
    ball_sample,
    sample_channel,
)
from .config import ExperimentConfig
from .env import window_reward
from .lmi import hermitian_basis
from .robust import align_phases, build_lmis, extract_rank_one
from .solver import OPTIMAL, solve_power_min_sdp
from .training import OPTIMIZATION_DRIVEN, make_training_state, train_step

REPORT_SCHEMA_VERSION = 1
REPORT_FIELDS = ("name", "passed", "measured", "tolerance", "detail")

__all__ = [
    "Check",
    "REPORT_FIELDS",
    "run_verification",
    "solve_reduced_sdp",
    "finite_difference",
    "critic_fd_error",
    "actor_fd_error",
    "monte_carlo_robustness",
    "validate_report",
]


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


def finite_difference(f, x, h=1e-6):
    """Central differences of a scalar function of a flat vector."""
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _small_agent(seed, state_dim=6, M=2, N=3, hidden=(8, 8)):
    cfg = AgentConfig(hidden=hidden, batch_size=4, buffer_capacity=16, p_max=4.0)
    agent = DDPGAgent(state_dim, M, N, cfg, np.random.default_rng(seed))
    # larger output weights than the training default so that gradients are not tiny
    rng = np.random.default_rng(seed + 1)
    for net in (agent.actor, agent.critic):
        net.params[-2][...] = rng.uniform(-0.5, 0.5, net.params[-2].shape)
    return agent


def critic_fd_error(seed: int = 0) -> float:
    """Relative error of the critic loss gradient against central differences."""
    agent = _small_agent(seed)
    rng = np.random.default_rng(seed + 2)
    B = 5
    x = np.concatenate([rng.standard_normal((B, agent.state_dim)),
                        agent.codec.features(rng.standard_normal((B, agent.codec.raw_dim)))], axis=1)
    y = rng.standard_normal(B)
    net = agent.critic

    def loss(flat):
        saved = net.get_flat()
        net.set_flat(flat)
        out = float(np.mean((net(x)[:, 0] - y) ** 2))
        net.set_flat(saved)
        return out

    q, acts = net.forward(x)
    grad, _ = net.backward(acts, (2.0 / B) * (q[:, 0] - y)[:, None])
    return _rel(grad, finite_difference(loss, net.get_flat()))


def actor_fd_error(seed: int = 0) -> float:
    """Relative error of the policy gradient through critic, action map and actor."""
    agent = _small_agent(seed)
    rng = np.random.default_rng(seed + 3)
    states = rng.standard_normal((5, agent.state_dim))
    net = agent.actor

    def objective(flat):
        saved = net.get_flat()
        net.set_flat(flat)
        feat = agent.codec.features(net(states))
        out = float(agent.critic(np.concatenate([states, feat], axis=1)).mean())
        net.set_flat(saved)
        return out

    _, grad = agent.actor_gradient(states)
    return _rel(grad, finite_difference(objective, net.get_flat()))


def kronecker_error(seed: int = 0, M: int = 4, N: int = 8) -> float:
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    w = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    vec = H.reshape(-1, order="F")
    lhs = np.vdot(vec, np.kron(np.eye(N), np.outer(w, w.conj())) @ vec).real
    rhs = np.linalg.norm(H.conj().T @ w) ** 2
    return abs(lhs - rhs) / rhs


def solve_reduced_sdp(g_eff, H_bar, gamma1: float, demand: float):
    """``min Tr(W)`` with ``g_eff^H W g_eff >= gamma1``, ``Tr(H^H W H) >= demand``, ``W >= 0``.

    This is the zero-radius problem written without multipliers.
    """
    from cvxopt import matrix, solvers

    M = g_eff.shape[0]
    basis = hermitian_basis(M)
    a = np.array([np.vdot(g_eff, E @ g_eff).real for E in basis])
    b = np.array([np.trace(H_bar.conj().T @ E @ H_bar).real for E in basis])
    Gl = -np.vstack([a, b])
    hl = -np.array([gamma1, demand])
    Gs = np.stack([np.block([[E.real, -E.imag], [E.imag, E.real]]) for E in basis])
    n = 2 * M
    c = np.zeros(M * M)
    c[:M] = 1.0
    sol = solvers.sdp(matrix(c), Gl=matrix(Gl), hl=matrix(hl),
                      Gs=[matrix(-Gs.reshape(M * M, n * n).T.copy())], hs=[matrix(np.zeros((n, n)))],
                      options={"show_progress": False, "abstol": 1e-10, "reltol": 1e-10, "feastol": 1e-10})
    x = np.array(sol["x"]).ravel()
    return float(x[:M].sum()), sol["status"]


def schur_equivalence_error(seed: int = 0, rho: float = 0.5) -> float:
    """Relative gap between the multiplier form at zero radius and the reduced form."""
    geo = NetworkGeometry()
    ch = sample_channel(geo, np.random.default_rng(seed))
    aligned = align_phases(ch.g, ch.Hf)
    unc = UncertaintyModel(ch.H, ch.Hf, 0.0, 0.0)
    s = float(np.linalg.norm(ch.g))
    lmis = build_lmis(aligned.theta, rho, ch.g, aligned.kappa, unc, geo, False, s, geo.gamma1)
    sol = solve_power_min_sdp(lmis, geo.M)
    alpha = 1.0 + rho * aligned.kappa
    demand = geo.energy_demand / (geo.eta * (1 - rho**2))
    reduced, _ = solve_reduced_sdp(alpha * ch.g / s, ch.H / s, 1.0, demand / geo.gamma1)
    if sol.status != OPTIMAL:
        return float("inf")
    return abs(sol.objective - reduced) / reduced


def monte_carlo_robustness(geo: NetworkGeometry, rho: float, beta: float, instances: int,
                           samples: int, seed: int = 0, tol: float = 1e-6):
    """Fraction of ball samples on which the SDP's principal beamformer meets each constraint.

    The beamformer is ``sqrt(lambda_1) u_1`` of the optimal covariance with
    no feasibility repair, so the check exercises the LMIs themselves.
    Returns the worst SNR and energy pass fractions over the instances.
    """
    worst_snr, worst_energy = 1.0, 1.0
    for i in range(instances):
        rng = np.random.default_rng([seed, i])
        ch = sample_channel(geo, rng)
        unc = UncertaintyModel.from_beta(ch.H, ch.Hf, beta)
        aligned = align_phases(ch.g, ch.Hf)
        s = float(np.linalg.norm(ch.g))
        lmis = build_lmis(aligned.theta, rho, ch.g, aligned.kappa, unc, geo, True, s, geo.gamma1)
        sol = solve_power_min_sdp(lmis, geo.M)
        if sol.status != OPTIMAL:
            return 0.0, 0.0
        w = extract_rank_one(sol.W * geo.gamma1 / s**2)
        DF = ball_sample(rng, unc.Hf_bar.shape, unc.delta_f, samples)
        DH = ball_sample(rng, unc.H_bar.shape, unc.delta_h, samples)
        g_hat = ch.g[None, :] + rho * np.einsum("smn,n->sm", unc.Hf_bar[None] + DF, aligned.theta)
        snr = np.abs(g_hat.conj() @ w) ** 2
        reach = np.einsum("smn,m->sn", (unc.H_bar[None] + DH).conj(), w)
        harvest = geo.eta * (1 - rho**2) * np.sum(np.abs(reach) ** 2, axis=1)
        worst_snr = min(worst_snr, float(np.mean(snr >= geo.gamma1 * (1 - tol))))
        worst_energy = min(worst_energy, float(np.mean(harvest >= geo.energy_demand * (1 - tol))))
    return worst_snr, worst_energy


def action_validity(samples: int, seed: int = 0):
    """Worst unit-modulus error, rho range and power cap over decoded noisy actions."""
    rng = np.random.default_rng(seed)
    codec = ActionCodec(4, 8, 10.0)
    raw = rng.standard_normal((samples, codec.raw_dim)) * rng.choice([0.1, 1.0, 10.0, 100.0], (samples, 1))
    mod_err, rho_ok, power_ok = 0.0, True, True
    for r in raw:
        a = codec.decode(r)
        mod_err = max(mod_err, float(np.max(np.abs(np.abs(a.theta) - 1.0))))
        rho_ok &= 0.0 < a.rho < 1.0
        power_ok &= a.power <= codec.p_max * (1 + 1e-12)
    return mod_err, bool(rho_ok), bool(power_ok)


def all_outage_reward(seed: int = 0) -> float:
    geo = NetworkGeometry()
    rng = np.random.default_rng(seed)
    window = [sample_channel(geo, rng) for _ in range(4)]
    # a microwatt beam cannot reach gamma1 on any period
    action = BeamformingAction(np.full(geo.M, 1e-3, dtype=complex), np.ones(geo.N), 0.5)
    reward, outs = window_reward(window, action, geo)
    return reward if all(outs) else float("nan")


def merge_dominance(cfg: ExperimentConfig, steps: int, seed: int = 0) -> float:
    """Smallest ``merged - y`` over every trained batch of a short run."""
    agent_cfg = AgentConfig(**{**asdict(cfg.agent), "opt_every": 1, "batch_size": 16})
    ts = make_training_state(cfg.geometry, cfg.episode, agent_cfg, seed)
    for _ in range(steps):
        train_step(ts, OPTIMIZATION_DRIVEN)
    return ts.min_merge_margin


def run_verification(cfg: ExperimentConfig, out_dir=None) -> dict:
    v = cfg.verify
    checks = []

    err = critic_fd_error()
    checks.append(Check("critic_gradient_fd", err <= 1e-4, err, 1e-4, "relative error vs central differences"))
    err = actor_fd_error()
    checks.append(Check("actor_gradient_fd", err <= 1e-4, err, 1e-4, "relative error vs central differences"))
    err = kronecker_error()
    checks.append(Check("kronecker_identity", err <= 1e-9, err, 1e-9, "vec(H)^H (I kron ww^H) vec(H) vs ||H^H w||^2"))
    err = schur_equivalence_error()
    checks.append(Check("schur_delta0_equivalence", err <= 1e-6, err, 1e-6,
                        "multiplier form at zero radius vs reduced problem"))
    mod_err, rho_ok, power_ok = action_validity(v.action_samples)
    checks.append(Check("action_validity", mod_err <= 1e-9 and rho_ok and power_ok, mod_err, 1e-9,
                        f"{v.action_samples} decoded actions; rho in (0,1): {rho_ok}; power cap: {power_ok}"))
    r = all_outage_reward()
    checks.append(Check("zero_reward_all_outage", r == 0.0, r, 0.0, "window with every period in outage"))
    margin = merge_dominance(cfg, v.train_steps)
    checks.append(Check("merged_target_dominance", margin >= 0.0, margin, 0.0,
                        f"min(merged - y) over every batch of {v.train_steps} optimization-driven steps"))
    snr_frac, energy_frac = monte_carlo_robustness(cfg.geometry, v.rho, v.beta, v.instances, v.mc_samples)
    frac = min(snr_frac, energy_frac)
    checks.append(Check("robust_feasibility_mc", frac >= 0.999, frac, 0.999,
                        f"SNR pass {snr_frac:.4f}, energy pass {energy_frac:.4f} over {v.mc_samples} samples"))

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "passed": all(c.passed for c in checks),
        "checks": [_clean(asdict(c)) for c in checks],
    }
    if out_dir is not None:
        path = Path(out_dir) / "verify"
        path.mkdir(parents=True, exist_ok=True)
        (path / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def _clean(d):
    d["passed"] = bool(d["passed"])
    m = float(d["measured"])
    d["measured"] = m if np.isfinite(m) else None
    return d


def validate_report(report: dict) -> None:
    """Raise ``ValueError`` unless ``report`` follows the documented schema."""
    if report.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ValueError("bad schema_version")
    if not isinstance(report.get("passed"), bool) or not isinstance(report.get("checks"), list):
        raise ValueError("report needs a boolean 'passed' and a list 'checks'")
    for c in report["checks"]:
        if set(c) != set(REPORT_FIELDS):
            raise ValueError(f"check fields {sorted(c)} differ from {sorted(REPORT_FIELDS)}")
        if not isinstance(c["name"], str) or not isinstance(c["passed"], bool):
            raise ValueError("check name must be a string and passed a boolean")
        if c["measured"] is not None and not isinstance(c["measured"], (int, float)):
            raise ValueError("measured must be a number or null")
