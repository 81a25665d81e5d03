"""DDPG agent with an optional model-based target.

Actions travel in three encodings:

* raw: unconstrained actor outputs ``[w (2M) | angles (N) | rho (1)]``
* features: what the critic sees, ``[Re w, Im w]/sqrt(P_max)``, ``cos``
  and ``sin`` of every phase, and ``rho`` (length ``2M + 2N + 1``)
* :class:`~robustirs.channel.BeamformingAction`: what the environment runs

The raw-to-feature map is smooth and bounded: the beamformer keeps its
direction and has norm ``sqrt(P_max) * tanh(||raw_w||)``, each phase is
``pi + pi * tanh(raw)`` and ``rho`` is a sigmoid squeezed into
``[RHO_EPS, 1 - RHO_EPS]``.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass

import numpy as np

from .channel import BeamformingAction
from .nn import MLP, Adam, soft_update

__all__ = [
    "AgentConfig",
    "ActionCodec",
    "Transition",
    "ReplayBuffer",
    "DDPGAgent",
    "NumericalFailure",
    "critic_target",
    "merge_targets",
    "CHECKPOINT_VERSION",
]

RHO_EPS = 1e-3
CHECKPOINT_VERSION = 1


class NumericalFailure(RuntimeError):
    pass


@dataclass
class AgentConfig:
    gamma: float = 0.1
    tau_soft: float = 0.01
    alpha_v: float = 1e-4
    alpha_omega: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 20000
    noise_scale: float = 0.3
    noise_final: float = 0.05
    noise_decay_steps: int = 10000
    p_max: float = 1e5
    hidden: tuple = (128, 128)
    activation: str = "tanh"
    # multiplies rewards and model-based targets; None picks 1 / (M * direct-link gain)
    reward_scale: float | None = None
    opt_every: int = 1
    bootstrap_y_prime: bool = False
    dtype: str = "float64"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.tau_soft <= 1.0:
            raise ValueError(f"tau_soft must lie in (0, 1], got {self.tau_soft}")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")
        if self.opt_every < 1:
            raise ValueError("opt_every must be at least 1")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype!r}")
        if self.alpha_v < 0 or self.alpha_omega < 0 or self.noise_scale < 0 or self.noise_final < 0:
            raise ValueError("learning rates and noise scales must be nonnegative")

    def noise_at(self, step: int) -> float:
        if self.noise_decay_steps <= 0:
            return self.noise_final
        frac = min(step / self.noise_decay_steps, 1.0)
        return self.noise_scale + frac * (self.noise_final - self.noise_scale)


class ActionCodec:
    def __init__(self, M: int, N: int, p_max: float):
        self.M, self.N, self.p_max = M, N, float(p_max)
        self.raw_dim = 2 * M + N + 1
        self.feature_dim = 2 * M + 2 * N + 1

    def _split(self, raw):
        M, N = self.M, self.N
        return raw[..., :2 * M], raw[..., 2 * M:2 * M + N], raw[..., 2 * M + N]

    @staticmethod
    def _radial(n):
        """``s(n) = tanh(n)/n`` and ``s'(n)/n`` with their small-``n`` limits."""
        small = n < 1e-4
        ns = np.where(small, 1.0, n)
        t = np.tanh(ns)
        s = np.where(small, 1.0 - n * n / 3.0, t / ns)
        ds_over_n = np.where(small, -2.0 / 3.0, ((1.0 - t * t) * ns - t) / ns**3)
        return s, ds_over_n

    def features(self, raw):
        raw = np.asarray(raw, dtype=float)
        r, a, x = self._split(raw)
        n = np.linalg.norm(r, axis=-1, keepdims=True)
        s, _ = self._radial(n)
        phi = np.pi + np.pi * np.tanh(a)
        rho = RHO_EPS + (1.0 - 2 * RHO_EPS) / (1.0 + np.exp(-x))
        return np.concatenate([s * r, np.cos(phi), np.sin(phi), rho[..., None]], axis=-1)

    def features_vjp(self, raw, dfeat):
        """Pull a gradient on the features back to the raw encoding."""
        raw = np.asarray(raw, dtype=float)
        M, N = self.M, self.N
        r, a, x = self._split(raw)
        dw = dfeat[..., :2 * M]
        dcos = dfeat[..., 2 * M:2 * M + N]
        dsin = dfeat[..., 2 * M + N:2 * M + 2 * N]
        drho = dfeat[..., -1]
        n = np.linalg.norm(r, axis=-1, keepdims=True)
        s, ds_over_n = self._radial(n)
        dr = s * dw + ds_over_n * np.sum(r * dw, axis=-1, keepdims=True) * r
        th = np.tanh(a)
        phi = np.pi + np.pi * th
        da = (-np.sin(phi) * dcos + np.cos(phi) * dsin) * np.pi * (1.0 - th * th)
        sig = 1.0 / (1.0 + np.exp(-x))
        dx = drho * (1.0 - 2 * RHO_EPS) * sig * (1.0 - sig)
        return np.concatenate([dr, da, dx[..., None]], axis=-1)

    def decode(self, raw) -> BeamformingAction:
        raw = np.asarray(raw, dtype=float)
        r, a, x = self._split(raw)
        n = np.linalg.norm(r)
        s, _ = self._radial(np.array([n]))
        u = s[0] * r
        w = np.sqrt(self.p_max) * (u[:self.M] + 1j * u[self.M:])
        phi = np.pi + np.pi * np.tanh(a)
        rho = RHO_EPS + (1.0 - 2 * RHO_EPS) / (1.0 + np.exp(-x))
        return BeamformingAction(w, np.exp(1j * phi), float(rho))

    def encode_action(self, action: BeamformingAction) -> np.ndarray:
        """Critic features of any action, including optimizer outputs."""
        w = np.asarray(action.w) / np.sqrt(self.p_max)
        ang = np.angle(action.theta)
        return np.concatenate([w.real, w.imag, np.cos(ang), np.sin(ang), [action.rho]])


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    # model-based target for the stored action, 0 when the optimizer did not win
    y_prime: float = 0.0


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.state_dim, self.action_dim = state_dim, action_dim
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.y_prime = np.zeros(capacity)
        self.head = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, tr: Transition) -> None:
        if tr.state.shape != (self.state_dim,) or tr.next_state.shape != (self.state_dim,):
            raise ValueError("state length does not match the buffer")
        if tr.action.shape != (self.action_dim,):
            raise ValueError("action length does not match the buffer")
        i = self.head
        self.states[i] = tr.state
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.next_states[i] = tr.next_state
        self.y_prime[i] = tr.y_prime
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if batch_size > self.size:
            raise ValueError(f"cannot draw {batch_size} from {self.size} transitions")
        return rng.choice(self.size, size=batch_size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        idx = self.sample_indices(batch_size, rng)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "y_prime": self.y_prime[idx],
        }

    def oldest_index(self) -> int:
        return self.head if self.size == self.capacity else 0


def critic_target(batch, target_actor: MLP, target_critic: MLP, codec: ActionCodec, gamma: float) -> np.ndarray:
    """``y_i = r_i + gamma * Q'(s_{i+1}, pi'(s_{i+1}))`` with target networks only."""
    rewards = np.asarray(batch["rewards"], dtype=float)
    if gamma == 0.0:
        return rewards.copy()
    next_feat = codec.features(target_actor(batch["next_states"]))
    q_next = target_critic(np.concatenate([batch["next_states"], next_feat], axis=1))[:, 0]
    return rewards + gamma * q_next


def merge_targets(y, y_prime, actor_action, optimized_action):
    """Keep the larger target; the optimizer's ``(w, theta)`` wins only strictly.

    ``rho`` always comes from the actor, since the optimizer ran for it.
    """
    if y_prime > y and optimized_action is not None:
        merged = BeamformingAction(optimized_action.w, optimized_action.theta, actor_action.rho)
        return y_prime, merged
    return y, actor_action


class DDPGAgent:
    def __init__(self, state_dim: int, M: int, N: int, config: AgentConfig, rng: np.random.Generator):
        self.config = config
        self.codec = ActionCodec(M, N, config.p_max)
        self.state_dim = state_dim
        self.rng = rng
        sizes_a = [state_dim, *config.hidden, self.codec.raw_dim]
        sizes_c = [state_dim + self.codec.feature_dim, *config.hidden, 1]
        dtype = np.dtype(config.dtype)
        self.actor = MLP(sizes_a, rng, config.activation, dtype=dtype)
        self.critic = MLP(sizes_c, rng, config.activation, dtype=dtype)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = Adam(self.actor.flat.size, config.alpha_v, dtype=dtype)
        self.critic_opt = Adam(self.critic.flat.size, config.alpha_omega, dtype=dtype)
        self.steps = 0

    # acting
    def act(self, state, explore: bool, rng: np.random.Generator | None = None):
        """Return ``(action, raw)``; exploration adds Gaussian noise to ``raw``."""
        raw = self.actor(np.asarray(state, dtype=float)[None, :])[0]
        if explore:
            rng = self.rng if rng is None else rng
            raw = raw + self.config.noise_at(self.steps) * rng.standard_normal(raw.shape)
        return self.codec.decode(raw), raw

    def q_value(self, state, features, target: bool = True) -> float:
        net = self.target_critic if target else self.critic
        x = np.concatenate([np.asarray(state, dtype=float), features])[None, :]
        return float(net(x)[0, 0])

    # learning
    def targets(self, batch) -> tuple[np.ndarray, np.ndarray]:
        """Model-free targets ``y`` and merged targets ``max(y, y')`` for a batch."""
        cfg = self.config
        y = critic_target(batch, self.target_actor, self.target_critic, self.codec, cfg.gamma)
        yp = np.asarray(batch["y_prime"], dtype=float)
        # y' = 0 marks transitions without a model-based value
        has = yp > 0
        if cfg.bootstrap_y_prime and cfg.gamma > 0:
            yp = yp + (y - np.asarray(batch["rewards"], dtype=float))
        return y, np.where(has, np.maximum(y, yp), y)

    def update_critic(self, batch, targets) -> float:
        x = np.concatenate([batch["states"], batch["actions"]], axis=1)
        q, acts = self.critic.forward(x)
        err = q[:, 0] - np.asarray(targets, dtype=float)
        loss = float(np.mean(err**2))
        if not np.isfinite(loss):
            raise NumericalFailure(f"critic loss is {loss}")
        grad, _ = self.critic.backward(acts, (2.0 / err.shape[0]) * err[:, None], input_grad=False)
        self.critic_opt.step(self.critic.flat, grad)
        return loss

    def actor_gradient(self, states):
        """Mean ``Q(s, pi(s))`` and its gradient w.r.t. the flat actor parameters."""
        raw, acts_a = self.actor.forward(states)
        feat = self.codec.features(raw)
        q, acts_c = self.critic.forward(np.concatenate([states, feat], axis=1))
        B = states.shape[0]
        _, dx = self.critic.backward(acts_c, np.full((B, 1), 1.0 / B), param_grads=False)
        draw = self.codec.features_vjp(raw, dx[:, self.state_dim:])
        grad, _ = self.actor.backward(acts_a, draw, input_grad=False)
        return float(q.mean()), grad

    def update_actor(self, batch) -> float:
        mean_q, grad = self.actor_gradient(batch["states"])
        if not np.all(np.isfinite(grad)):
            raise NumericalFailure("actor gradient is not finite")
        # Adam descends, so hand it the negated ascent direction
        self.actor_opt.step(self.actor.flat, -grad)
        return mean_q

    def soft_update(self) -> None:
        tau = self.config.tau_soft
        soft_update(self.actor.flat, self.target_actor.flat, tau)
        soft_update(self.critic.flat, self.target_critic.flat, tau)

    # persistence
    def _arrays(self) -> dict:
        return {
            "actor": self.actor.flat,
            "critic": self.critic.flat,
            "target_actor": self.target_actor.flat,
            "target_critic": self.target_critic.flat,
            "actor_opt_m": self.actor_opt.m,
            "actor_opt_v": self.actor_opt.v,
            "critic_opt_m": self.critic_opt.m,
            "critic_opt_v": self.critic_opt.v,
        }

    def save(self, path) -> None:
        """Write a zip with every tensor, the config and the random-stream state.

        Entries carry a fixed timestamp so identical agents give identical bytes.
        """
        meta = {
            "version": CHECKPOINT_VERSION,
            "state_dim": self.state_dim,
            "M": self.codec.M,
            "N": self.codec.N,
            "steps": self.steps,
            "config": asdict(self.config),
            "actor_opt_t": self.actor_opt.t,
            "critic_opt_t": self.critic_opt.t,
            "rng": self.rng.bit_generator.state,
        }
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            info = zipfile.ZipInfo("meta.json", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, json.dumps(meta, sort_keys=True, default=_json_default), zipfile.ZIP_DEFLATED)
            for key, arr in self._arrays().items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
                info = zipfile.ZipInfo(f"{key}.npy", date_time=(1980, 1, 1, 0, 0, 0))
                zf.writestr(info, buf.getvalue(), zipfile.ZIP_DEFLATED)

    @classmethod
    def load(cls, path) -> "DDPGAgent":
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
            arrays = {name[:-4]: np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
                      for name in zf.namelist() if name.endswith(".npy")}
        config = AgentConfig(**meta["config"])
        rng = np.random.default_rng()
        rng.bit_generator.state = meta["rng"]
        agent = cls(meta["state_dim"], meta["M"], meta["N"], config, np.random.default_rng(0))
        agent.rng = rng
        agent.steps = meta["steps"]
        for name in ("actor", "critic", "target_actor", "target_critic"):
            getattr(agent, name).set_flat(arrays[name])
        agent.actor_opt.load_state(meta["actor_opt_t"], arrays["actor_opt_m"], arrays["actor_opt_v"])
        agent.critic_opt.load_state(meta["critic_opt_t"], arrays["critic_opt_m"], arrays["critic_opt_v"])
        return agent


def _json_default(obj):
    if isinstance(obj, tuple):
        return list(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
