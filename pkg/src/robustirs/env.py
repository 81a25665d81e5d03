"""Sliding-window MDP around the physical model.

The state holds the last ``T`` channel realizations and their outage bits.
An action is run on a freshly drawn channel, the window slides by one, and
the reward is the mean energy efficiency of the current action over the
whole window, with outage terms zeroed.

Channel dynamics (``channel_mode``):

* ``iid-per-step``: an independent draw every period
* ``block-hold-k``: each draw is held for ``k`` periods (e.g. ``block-hold-10``)
* ``gauss-markov``: first-order autoregressive fading with coefficient
  ``correlation`` on every link, keeping the path-loss power fixed

With ``k_factor = K > 0`` every link becomes Rician: a fixed component,
drawn once per environment and kept across resets, carries ``K/(K+1)`` of
the power and the process above carries the rest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    BeamformingAction,
    ChannelRealization,
    NetworkGeometry,
    UncertaintyModel,
    check_outage,
    crandn,
    estimate_uncertainty_model,
    minimum_power,
    received_snr,
)

__all__ = [
    "EpisodeConfig",
    "EnvState",
    "ChannelProcess",
    "Environment",
    "window_reward",
    "encode_state",
    "decode_state",
    "state_dim",
]


@dataclass
class EpisodeConfig:
    T: int = 4
    steps_per_episode: int = 1000
    channel_mode: str = "iid-per-step"
    correlation: float = 0.0
    k_factor: float = 0.0

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        if self.steps_per_episode < 1:
            raise ValueError("steps_per_episode must be positive")
        if not 0.0 <= self.correlation < 1.0:
            raise ValueError("correlation must lie in [0, 1)")
        if self.k_factor < 0:
            raise ValueError("k_factor must be nonnegative")
        self.hold_length()

    def hold_length(self) -> int:
        mode = self.channel_mode
        if mode in ("iid-per-step", "gauss-markov"):
            return 1
        if mode.startswith("block-hold-"):
            try:
                k = int(mode[len("block-hold-"):])
            except ValueError:
                k = 0
            if k >= 1:
                return k
        raise ValueError(f"unknown channel_mode {mode!r}; use iid-per-step, block-hold-<k> or gauss-markov")


@dataclass
class EnvState:
    window: list
    outages: list
    uncertainty: UncertaintyModel
    g_bar: np.ndarray

    @classmethod
    def from_window(cls, window, outages):
        return cls(list(window), list(outages), estimate_uncertainty_model(window),
                   np.mean([ch.g for ch in window], axis=0))


class ChannelProcess:
    """Seeded generator of successive true channels."""

    def __init__(self, geometry: NetworkGeometry, config: EpisodeConfig, rng: np.random.Generator,
                 fixed=None):
        self.geometry = geometry
        self.config = config
        self.rng = rng
        self.fixed = fixed
        self.hold = config.hold_length()
        self._fading = None
        self._age = 0

    def _fresh(self):
        M, N = self.geometry.M, self.geometry.N
        return crandn(self.rng, M), crandn(self.rng, (M, N)), crandn(self.rng, N)

    def next(self) -> ChannelRealization:
        cfg = self.config
        if self._fading is None:
            self._fading = self._fresh()
        elif cfg.channel_mode == "gauss-markov":
            a = cfg.correlation
            b = np.sqrt(1.0 - a * a)
            self._fading = tuple(a * x + b * y for x, y in zip(self._fading, self._fresh()))
        elif self._age % self.hold == 0:
            self._fading = self._fresh()
        self._age += 1
        gain_g, gain_h, gain_f = self.geometry.gains
        g, H, f = self._fading
        K = cfg.k_factor
        if K > 0:
            a, b = np.sqrt(K / (K + 1.0)), np.sqrt(1.0 / (K + 1.0))
            g, H, f = (a * x + b * y for x, y in zip(self.fixed, (g, H, f)))
        return ChannelRealization(np.sqrt(gain_g) * g, np.sqrt(gain_h) * H, np.sqrt(gain_f) * f)


def window_reward(window, action: BeamformingAction, geometry: NetworkGeometry):
    """Mean of ``(1 - o_i) SNR_i / ||w||^2`` over the window, and the outage bits ``o_i``."""
    power = action.power
    if power == 0.0:
        return 0.0, [True] * len(window)
    terms, outs = [], []
    for ch in window:
        o = check_outage(ch, action, geometry)
        outs.append(o)
        terms.append(0.0 if o else received_snr(ch, action) / power)
    return float(np.mean(terms)), outs


def state_dim(geometry: NetworkGeometry, T: int) -> int:
    M, N = geometry.M, geometry.N
    return T * (2 * M + 4 * M * N) + T


def _scales(geometry):
    gain_g, gain_h, gain_f = geometry.gains
    return np.sqrt(gain_g), np.sqrt(gain_h), np.sqrt(gain_h * gain_f)


def encode_state(state: EnvState, geometry: NetworkGeometry) -> np.ndarray:
    """Flatten the window into a real vector.

    Per period, oldest first: ``Re g, Im g, Re H, Im H, Re Hf, Im Hf``
    (matrices row-major), each divided by its path-loss amplitude; then the
    ``T`` outage bits.
    """
    sg, sh, sf = _scales(geometry)
    parts = []
    for ch in state.window:
        g, H, Hf = ch.g / sg, ch.H.ravel() / sh, ch.Hf.ravel() / sf
        parts.extend([g.real, g.imag, H.real, H.imag, Hf.real, Hf.imag])
    parts.append(np.asarray(state.outages, dtype=float))
    return np.concatenate(parts)


def decode_state(vec, geometry: NetworkGeometry, T: int):
    """Inverse of :func:`encode_state`: ``(g, H, Hf)`` per period and the outage bits."""
    vec = np.asarray(vec, dtype=float)
    M, N = geometry.M, geometry.N
    if vec.shape != (state_dim(geometry, T),):
        raise ValueError(f"expected length {state_dim(geometry, T)}, got {vec.shape}")
    sg, sh, sf = _scales(geometry)
    per = 2 * M + 4 * M * N
    out = []
    for k in range(T):
        v = vec[k * per:(k + 1) * per]
        g = (v[:M] + 1j * v[M:2 * M]) * sg
        o = 2 * M
        H = (v[o:o + M * N] + 1j * v[o + M * N:o + 2 * M * N]).reshape(M, N) * sh
        o += 2 * M * N
        Hf = (v[o:o + M * N] + 1j * v[o + M * N:o + 2 * M * N]).reshape(M, N) * sf
        out.append((g, H, Hf))
    return out, vec[T * per:] > 0.5


class Environment:
    def __init__(self, geometry: NetworkGeometry, config: EpisodeConfig, rng: np.random.Generator):
        self.geometry = geometry
        self.config = config
        self.rng = rng
        self.process = None
        self.state = None
        self.t = 0
        self.fixed = None
        if config.k_factor > 0:
            M, N = geometry.M, geometry.N
            self.fixed = (crandn(rng, M), crandn(rng, (M, N)), crandn(rng, N))

    @property
    def state_dim(self) -> int:
        return state_dim(self.geometry, self.config.T)

    def reset(self) -> EnvState:
        """Start a new channel process and fill the window with ``T`` draws."""
        self.process = ChannelProcess(self.geometry, self.config, self.rng, self.fixed)
        window = [self.process.next() for _ in range(self.config.T)]
        self.state = EnvState.from_window(window, [False] * self.config.T)
        self.t = 0
        return self.state

    def encode(self, state: EnvState | None = None) -> np.ndarray:
        return encode_state(self.state if state is None else state, self.geometry)

    def step(self, action: BeamformingAction):
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        ch = self.process.next()
        if action.power == 0.0:
            outage, snr = True, 0.0
        else:
            outage = check_outage(ch, action, self.geometry)
            snr = received_snr(ch, action)
        window = self.state.window[1:] + [ch]
        outages = self.state.outages[1:] + [outage]
        reward, _ = window_reward(window, action, self.geometry)
        self.state = EnvState.from_window(window, outages)
        self.t += 1
        info = {
            "transmit_power": action.power,
            "minimum_power": minimum_power(ch, action, self.geometry),
            "outage": outage,
            "snr": snr,
            "done": self.t >= self.config.steps_per_episode,
        }
        return self.state, reward, info
