"""One-step training logic for both agent modes."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .agent import DDPGAgent, NumericalFailure, ReplayBuffer, Transition, merge_targets
from .channel import BeamformingAction, path_gain
from .env import Environment
from .robust import robust_beamforming

MODEL_FREE = "model-free"
OPTIMIZATION_DRIVEN = "optimization-driven"
MODES = (MODEL_FREE, OPTIMIZATION_DRIVEN)

__all__ = ["MODEL_FREE", "OPTIMIZATION_DRIVEN", "MODES", "Streams", "TrainingState", "train_step",
           "default_reward_scale", "make_training_state"]


@dataclass
class Streams:
    """Independent random streams so that changing one consumer never shifts another."""

    init: np.random.Generator
    env: np.random.Generator
    explore: np.random.Generator
    replay: np.random.Generator
    opt: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        children = np.random.SeedSequence(seed).spawn(5)
        return cls(*(np.random.default_rng(c) for c in children))


@dataclass
class TrainingState:
    env: Environment
    agent: DDPGAgent
    buffer: ReplayBuffer
    streams: Streams
    reward_scale: float
    step: int = 0
    episode: int = 0
    wins: deque = field(default_factory=lambda: deque(maxlen=100))
    # smallest merged-minus-model-free target seen in any trained batch
    min_merge_margin: float = float("inf")


def default_reward_scale(geometry) -> float:
    """Puts the energy efficiency of a matched direct-link beam near one."""
    return 1.0 / (geometry.M * path_gain(geometry.d0, geometry.L0, geometry.path_exponent))


def make_training_state(geometry, episode_cfg, agent_cfg, seed: int) -> TrainingState:
    streams = Streams.from_seed(seed)
    env = Environment(geometry, episode_cfg, streams.env)
    env.reset()
    agent = DDPGAgent(env.state_dim, geometry.M, geometry.N, agent_cfg, streams.init)
    buffer = ReplayBuffer(agent_cfg.buffer_capacity, env.state_dim, agent.codec.feature_dim)
    scale = agent_cfg.reward_scale if agent_cfg.reward_scale is not None else default_reward_scale(geometry)
    return TrainingState(env, agent, buffer, streams, float(scale))


def _cap_power(w, p_max):
    p = float(np.real(np.vdot(w, w)))
    return w * np.sqrt(p_max / p) if p > p_max else w


def train_step(ts: TrainingState, mode: str) -> dict:
    """Act, optionally consult the optimizer, run the environment and learn.

    Learning starts once the buffer holds a full batch; before that the
    step only acts and stores, in both modes.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    env, agent, buffer = ts.env, ts.agent, ts.buffer
    cfg = agent.config
    codec = agent.codec
    s = env.encode()
    actor_action, raw = agent.act(s, explore=True, rng=ts.streams.explore)
    executed = actor_action
    feat = codec.features(raw)
    ready = len(buffer) >= cfg.batch_size

    y_model = np.nan
    y_critic = np.nan
    stored_y_prime = 0.0
    opt_called = mode == OPTIMIZATION_DRIVEN and ready and ts.step % cfg.opt_every == 0
    if opt_called:
        st = env.state
        res = robust_beamforming(actor_action.rho, st.uncertainty, st.g_bar, env.geometry, rng=ts.streams.opt)
        y_model = res.y_prime * ts.reward_scale
        y_critic = agent.q_value(s, feat)
        optimized = None
        if res.ok:
            optimized = BeamformingAction(_cap_power(res.w, cfg.p_max), res.theta, actor_action.rho)
        _, executed = merge_targets(y_critic, y_model, actor_action, optimized)
        won = executed is not actor_action
        ts.wins.append(won)
        if won:
            feat = codec.encode_action(executed)
            stored_y_prime = y_model

    _, reward, info = env.step(executed)
    s_next = env.encode()
    r = reward * ts.reward_scale
    buffer.add(Transition(s, feat, r, s_next, stored_y_prime))

    critic_loss = 0.0
    if ready:
        batch = buffer.sample(cfg.batch_size, ts.streams.replay)
        y, merged = agent.targets(batch)
        targets = merged if mode == OPTIMIZATION_DRIVEN else y
        margin = float(np.min(merged - y))
        ts.min_merge_margin = min(ts.min_merge_margin, margin)
        if margin < 0:
            raise NumericalFailure("merged target fell below the model-free target")
        critic_loss = agent.update_critic(batch, targets)
        agent.update_actor(batch)
        agent.soft_update()

    agent.steps += 1
    out = {
        "episode": ts.episode,
        "step": ts.step,
        "mode": mode,
        "transmit_power": info["minimum_power"],
        "action_power": info["transmit_power"],
        "reward": reward,
        "rho": executed.rho,
        "outage_rate": float(np.mean(env.state.outages)),
        "y_model": y_model / ts.reward_scale if opt_called else 0.0,
        "y_critic": y_critic / ts.reward_scale if opt_called else 0.0,
        "merge_win_rate": float(np.mean(ts.wins)) if ts.wins else 0.0,
        "critic_loss": critic_loss,
    }
    ts.step += 1
    if info["done"]:
        env.reset()
        ts.episode += 1
    return out
