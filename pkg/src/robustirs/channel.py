"""Physical model of the IRS-assisted MISO link.

Channels follow the convention used throughout the package:

* ``g``  -- AP to receiver, shape ``(M,)``
* ``H``  -- AP to IRS, shape ``(M, N)`` with columns ``h_n``
* ``f``  -- IRS to receiver, shape ``(N,)``
* ``Hf`` -- cascaded channel ``H @ diag(f)``, column ``n`` equal to ``f_n h_n``

Noise power at the receiver is normalized to one, so SNR thresholds are
linear and powers are in watts relative to that noise floor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "NetworkGeometry",
    "ChannelRealization",
    "UncertaintyModel",
    "BeamformingAction",
    "path_gain",
    "effective_channel",
    "received_snr",
    "harvested_power",
    "check_outage",
    "minimum_power",
    "sample_channel",
    "sample_uncertainty",
    "ball_sample",
    "estimate_uncertainty_model",
    "crandn",
]

UNIT_MODULUS_TOL = 1e-9


@dataclass(frozen=True)
class NetworkGeometry:
    M: int = 4
    N: int = 8
    d0: float = 1.0
    d1: float = 1.0
    d2: float = 2.0
    L0: float = 30.0
    path_exponent: float = 2.0
    eta: float = 0.8
    mu: float = 0.5
    gamma1: float = 10.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        for name in ("d0", "d1", "d2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if not self.gamma1 > 0:
            raise ValueError(f"gamma1 must be positive, got {self.gamma1}")

    @property
    def gains(self) -> tuple[float, float, float]:
        """Average per-entry power gains of the (g, H, f) links."""
        return (
            path_gain(self.d0, self.L0, self.path_exponent),
            path_gain(self.d1, self.L0, self.path_exponent),
            path_gain(self.d2, self.L0, self.path_exponent),
        )

    @property
    def energy_demand(self) -> float:
        """Total IRS consumption ``N * mu``."""
        return self.N * self.mu


@dataclass
class ChannelRealization:
    g: np.ndarray
    H: np.ndarray
    f: np.ndarray
    Hf: np.ndarray = field(default=None)

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=complex).reshape(-1)
        self.H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        self.f = np.asarray(self.f, dtype=complex).reshape(-1)
        M, N = self.H.shape
        if self.g.shape != (M,) or self.f.shape != (N,):
            raise ValueError(
                f"inconsistent channel shapes g{self.g.shape} H{self.H.shape} f{self.f.shape}"
            )
        if self.Hf is None:
            self.Hf = self.H * self.f[None, :]
        else:
            self.Hf = np.asarray(self.Hf, dtype=complex)
            if self.Hf.shape != (M, N):
                raise ValueError(f"Hf must have shape {(M, N)}, got {self.Hf.shape}")

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[1]


@dataclass
class UncertaintyModel:
    """Mean channel estimates with Frobenius-ball error radii."""

    H_bar: np.ndarray
    Hf_bar: np.ndarray
    delta_h: float = 0.0
    delta_f: float = 0.0

    def __post_init__(self):
        self.H_bar = np.atleast_2d(np.asarray(self.H_bar, dtype=complex))
        self.Hf_bar = np.atleast_2d(np.asarray(self.Hf_bar, dtype=complex))
        if self.H_bar.shape != self.Hf_bar.shape:
            raise ValueError("H_bar and Hf_bar must share the shape (M, N)")
        if self.delta_h < 0 or self.delta_f < 0:
            raise ValueError("uncertainty radii must be nonnegative")
        self.delta_h = float(self.delta_h)
        self.delta_f = float(self.delta_f)

    @classmethod
    def from_beta(cls, H_bar, Hf_bar, beta: float) -> "UncertaintyModel":
        """Radii from the relative uncertainty level ``delta^2 = beta * ||mean||_F^2``."""
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        H_bar = np.asarray(H_bar, dtype=complex)
        Hf_bar = np.asarray(Hf_bar, dtype=complex)
        return cls(
            H_bar,
            Hf_bar,
            delta_h=float(np.sqrt(beta) * np.linalg.norm(H_bar)),
            delta_f=float(np.sqrt(beta) * np.linalg.norm(Hf_bar)),
        )


@dataclass
class BeamformingAction:
    w: np.ndarray
    theta: np.ndarray
    rho: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex).reshape(-1)
        self.theta = np.asarray(self.theta, dtype=complex).reshape(-1)
        self.rho = float(self.rho)

    def validate(self, strict: bool = True) -> None:
        """Check unit-modulus phases and the open range of ``rho``.

        ``strict=False`` admits the closed interval [0, 1] for test probes.
        """
        if np.any(np.abs(np.abs(self.theta) - 1.0) > UNIT_MODULUS_TOL):
            raise ValueError("theta entries must have unit modulus")
        if strict and not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if not strict and not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")

    @property
    def power(self) -> float:
        return float(np.real(np.vdot(self.w, self.w)))

    @classmethod
    def from_angles(cls, w, angles, rho) -> "BeamformingAction":
        return cls(w, np.exp(1j * np.asarray(angles, dtype=float)), rho)


def path_gain(d: float, L0: float = 30.0, exponent: float = 2.0) -> float:
    """Log-distance power gain ``10^(-(L0 + 10 n log10 d)/10)``."""
    if not d > 0:
        raise ValueError("distance must be positive")
    return 10.0 ** (-(L0 + 10.0 * exponent * np.log10(d)) / 10.0)


def crandn(rng: np.random.Generator, shape, power: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with ``E|x|^2 = power``."""
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _channel_parts(ch):
    """Accept a ChannelRealization or a ``(g, Hf)`` pair of mean matrices."""
    if isinstance(ch, ChannelRealization):
        return ch.g, ch.Hf
    g, Hf = ch
    return np.asarray(g, dtype=complex).reshape(-1), np.atleast_2d(np.asarray(Hf, dtype=complex))


def effective_channel(ch, theta, rho: float) -> np.ndarray:
    """Return ``g + rho * Hf @ theta``."""
    g, Hf = _channel_parts(ch)
    theta = np.asarray(theta, dtype=complex).reshape(-1)
    if Hf.shape != (g.shape[0], theta.shape[0]):
        raise ValueError(
            f"dimension mismatch: g{g.shape}, Hf{Hf.shape}, theta{theta.shape}"
        )
    return g + rho * (Hf @ theta)


def _check_w(w, M):
    w = np.asarray(w, dtype=complex).reshape(-1)
    if w.shape != (M,):
        raise ValueError(f"beamformer must have length {M}, got {w.shape[0]}")
    return w


def received_snr(ch, action: BeamformingAction) -> float:
    """``|g_hat^H w|^2`` with unit noise power."""
    g_hat = effective_channel(ch, action.theta, action.rho)
    w = _check_w(action.w, g_hat.shape[0])
    return float(np.abs(np.vdot(g_hat, w)) ** 2)


def harvested_power(ch: ChannelRealization, action: BeamformingAction, geometry: NetworkGeometry) -> float:
    """``eta (1 - rho^2) ||H^H w||^2`` for a common power-splitting ratio."""
    w = _check_w(action.w, ch.M)
    return float(geometry.eta * (1.0 - action.rho**2) * np.sum(np.abs(ch.H.conj().T @ w) ** 2))


def check_outage(true_ch: ChannelRealization, action: BeamformingAction, geometry: NetworkGeometry) -> bool:
    """True when the realized channel misses the SNR or the energy budget."""
    snr = received_snr(true_ch, action)
    harvest = harvested_power(true_ch, action, geometry)
    return bool(snr < geometry.gamma1 or harvest < geometry.energy_demand)


def minimum_power(ch: ChannelRealization, action: BeamformingAction, geometry: NetworkGeometry) -> float:
    """Smallest ``||w||^2`` meeting both constraints along the direction of ``w``.

    Both the SNR and the harvested power scale with ``||w||^2``, so the
    direction, the phases and ``rho`` fix the power the AP actually needs.
    Returns ``inf`` for a zero beamformer or a direction with no gain.
    """
    w = _check_w(action.w, ch.M)
    norm2 = np.real(np.vdot(w, w))
    if norm2 == 0.0:
        return float("inf")
    unit = BeamformingAction(w / np.sqrt(norm2), action.theta, action.rho)
    snr_gain = received_snr(ch, unit)
    need = geometry.gamma1 / snr_gain if snr_gain > 0 else float("inf")
    if geometry.energy_demand > 0:
        harvest_gain = harvested_power(ch, unit, geometry)
        need = max(need, geometry.energy_demand / harvest_gain if harvest_gain > 0 else float("inf"))
    return float(need)


def sample_channel(geometry: NetworkGeometry, rng: np.random.Generator) -> ChannelRealization:
    """Rayleigh fading scaled by the log-distance path loss of each link."""
    gain_g, gain_h, gain_f = geometry.gains
    g = crandn(rng, geometry.M, gain_g)
    H = crandn(rng, (geometry.M, geometry.N), gain_h)
    f = crandn(rng, geometry.N, gain_f)
    return ChannelRealization(g, H, f)


def sample_uncertainty(model: UncertaintyModel, rng: np.random.Generator, which: str = "AP-IRS") -> np.ndarray:
    """Draw a channel uniformly from the Frobenius ball around the mean.

    ``which`` selects the AP-IRS matrix (``"AP-IRS"``) or the cascaded one
    (``"cascaded"``).
    """
    if which == "AP-IRS":
        mean, delta = model.H_bar, model.delta_h
    elif which == "cascaded":
        mean, delta = model.Hf_bar, model.delta_f
    else:
        raise ValueError(f"unknown uncertainty set {which!r}")
    return mean + ball_sample(rng, mean.shape, delta)


def ball_sample(rng: np.random.Generator, shape, radius: float, size: int | None = None) -> np.ndarray:
    """Uniform samples from the complex Frobenius ball of the given radius.

    With ``size`` set, returns an array of shape ``(size, *shape)``.
    """
    shape = tuple(np.atleast_1d(shape))
    batch = () if size is None else (size,)
    z = rng.standard_normal(batch + shape) + 1j * rng.standard_normal(batch + shape)
    axes = tuple(range(len(batch), len(batch) + len(shape)))
    norms = np.sqrt(np.sum(np.abs(z) ** 2, axis=axes, keepdims=True))
    dim = 2 * int(np.prod(shape))
    u = rng.uniform(size=batch + (1,) * len(shape))
    return radius * u ** (1.0 / dim) * z / norms


def estimate_uncertainty_model(history: Sequence[ChannelRealization]) -> UncertaintyModel:
    """Mean channels over a window and the smallest radii covering every sample."""
    if len(history) == 0:
        raise ValueError("history must contain at least one channel realization")
    Hs = np.stack([ch.H for ch in history])
    Hfs = np.stack([ch.Hf for ch in history])
    # offset from the first sample keeps a constant window exactly zero-radius
    H_bar = Hs[0] + (Hs - Hs[0]).mean(axis=0)
    Hf_bar = Hfs[0] + (Hfs - Hfs[0]).mean(axis=0)
    dev_h = np.sqrt(np.sum(np.abs(Hs - H_bar) ** 2, axis=(1, 2)))
    dev_f = np.sqrt(np.sum(np.abs(Hfs - Hf_bar) ** 2, axis=(1, 2)))
    return UncertaintyModel(H_bar, Hf_bar, float(dev_h.max()), float(dev_f.max()))
