"""Model-based robust beamforming for a fixed power-splitting ratio.

Pipeline: co-phase the IRS columns with the direct channel, build the two
worst-case LMIs, solve the minimum-power SDP, recover a rank-one
beamformer and score it on the mean channel.  The score is the
model-based target value the learning agent compares with its critic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import NetworkGeometry, UncertaintyModel
from .lmi import build_energy_lmi, build_snr_lmi
from .solver import OPTIMAL, SdpSolution, solve_power_min_sdp

logger = logging.getLogger(__name__)

RANK_ONE_TOL = 1e-6
RANDOMIZATION_DRAWS = 500
EXTRACTION_FAILURE = "extraction-failure"
DEGENERATE_CHANNEL = "degenerate-channel"
INVALID_ARGUMENT = "invalid-argument"

__all__ = [
    "AlignedPhase",
    "RobustContext",
    "RobustBeamformingResult",
    "DegenerateChannelError",
    "ExtractionError",
    "align_phases",
    "worst_case_snr",
    "worst_case_harvest",
    "extract_rank_one",
    "evaluate_target_lower_bound",
    "build_lmis",
    "robust_beamforming",
]


class DegenerateChannelError(ValueError):
    pass


class ExtractionError(RuntimeError):
    pass


@dataclass
class AlignedPhase:
    theta: np.ndarray
    kappa: float


def align_phases(g, Hf_bar) -> AlignedPhase:
    """Rotate every reflected path so its projection on ``g`` is real and nonnegative.

    ``kappa`` is the resulting projection gain ``Re(g^H Hf theta) / ||g||^2``.
    """
    g = np.asarray(g, dtype=complex).reshape(-1)
    Hf_bar = np.atleast_2d(np.asarray(Hf_bar, dtype=complex))
    if Hf_bar.shape[0] != g.shape[0]:
        raise ValueError(f"g has length {g.shape[0]} but Hf_bar has {Hf_bar.shape[0]} rows")
    gnorm2 = float(np.real(np.vdot(g, g)))
    if gnorm2 == 0.0:
        raise DegenerateChannelError("direct channel g is zero; phases cannot be aligned")
    proj = g.conj() @ Hf_bar
    theta = np.exp(-1j * np.angle(proj))
    kappa = float(np.real(proj @ theta)) / gnorm2
    return AlignedPhase(theta, max(kappa, 0.0))


def worst_case_snr(w, g_mean, radius: float) -> np.ndarray:
    """Minimum of ``|(g_mean + e)^H w|^2`` over ``||e|| <= radius``.

    For the cascaded ball, ``{Delta_f theta}`` is exactly the ball of radius
    ``delta_f * ||theta||``.  ``w`` may be a batch of shape ``(G, M)``.
    """
    w = np.asarray(w, dtype=complex)
    proj = np.abs(w @ np.asarray(g_mean).conj())
    norm = np.linalg.norm(w, axis=-1)
    return np.maximum(proj - radius * norm, 0.0) ** 2


def worst_case_harvest(w, H_bar, delta_h: float, eta: float, rho: float) -> np.ndarray:
    """Minimum harvested power over the AP-IRS ball ``||Delta_h||_F <= delta_h``."""
    w = np.asarray(w, dtype=complex)
    reach = np.linalg.norm(w @ np.asarray(H_bar).conj(), axis=-1)
    norm = np.linalg.norm(w, axis=-1)
    return eta * (1.0 - rho**2) * np.maximum(reach - delta_h * norm, 0.0) ** 2


@dataclass
class RobustContext:
    """Everything needed to test a beamformer against both worst cases."""

    g_mean: np.ndarray
    snr_radius: float
    H_bar: np.ndarray
    delta_h: float
    eta: float
    rho: float
    gamma1: float
    demand: float

    @classmethod
    def build(cls, g, theta, rho, uncertainty: UncertaintyModel, geometry: NetworkGeometry):
        theta = np.asarray(theta, dtype=complex)
        return cls(
            g_mean=np.asarray(g, dtype=complex) + rho * uncertainty.Hf_bar @ theta,
            snr_radius=rho * uncertainty.delta_f * float(np.linalg.norm(theta)),
            H_bar=uncertainty.H_bar,
            delta_h=uncertainty.delta_h,
            eta=geometry.eta,
            rho=rho,
            gamma1=geometry.gamma1,
            demand=geometry.energy_demand,
        )

    def required_scale(self, w) -> np.ndarray:
        """Factor on ``||w||^2`` that makes both worst cases hold with equality (inf if none)."""
        snr = worst_case_snr(w, self.g_mean, self.snr_radius)
        with np.errstate(divide="ignore"):
            need = np.where(snr > 0, self.gamma1 / np.where(snr > 0, snr, 1.0), np.inf)
            if self.demand > 0:
                harvest = worst_case_harvest(w, self.H_bar, self.delta_h, self.eta, self.rho)
                need_e = np.where(harvest > 0, self.demand / np.where(harvest > 0, harvest, 1.0), np.inf)
                need = np.maximum(need, need_e)
        return need

    def feasible(self, w, rtol: float = 1e-9) -> bool:
        snr = worst_case_snr(w, self.g_mean, self.snr_radius)
        harvest = worst_case_harvest(w, self.H_bar, self.delta_h, self.eta, self.rho)
        return bool(snr >= self.gamma1 * (1 - rtol) and harvest >= self.demand * (1 - rtol))


# guards the minimal scaling against round-off in the worst-case formulas
_SCALE_MARGIN = 1.0 + 1e-9


def extract_rank_one(W, context: RobustContext | None = None, rng: np.random.Generator | None = None,
                     draws: int = RANDOMIZATION_DRAWS, rank_tol: float = RANK_ONE_TOL) -> np.ndarray:
    """Recover a beamformer ``w`` from the SDP covariance ``W``.

    A numerically rank-one ``W`` (``lambda_2 / lambda_1 <= rank_tol``) gives
    ``sqrt(lambda_1) u_1``.  Otherwise ``draws`` candidates ``w ~ CN(0, W)``
    are drawn, each scaled to the smallest power meeting both worst-case
    constraints of ``context``, and the cheapest one is returned.  With a
    context, the rank-one answer is also scaled up if the exact worst case
    (on the true mean channel) is not met.

    Raises :class:`ExtractionError` if no candidate can be made feasible.
    """
    W = np.asarray(W, dtype=complex)
    W = (W + W.conj().T) / 2
    lam, U = np.linalg.eigh(W)
    lam, U = lam[::-1], U[:, ::-1]
    if not lam[0] > 0:
        raise ExtractionError("covariance has no positive eigenvalue")
    principal = np.sqrt(lam[0]) * U[:, 0]
    ratio = max(lam[1], 0.0) / lam[0] if lam.shape[0] > 1 else 0.0

    if ratio <= rank_tol:
        if context is None:
            return principal
        need = float(context.required_scale(principal))
        if np.isfinite(need):
            return principal * np.sqrt(max(need * _SCALE_MARGIN, 1.0)) if need > 1.0 else principal
    elif context is None:
        return principal

    if rng is None:
        raise ValueError("Gaussian randomization needs an explicit random generator")
    root = U * np.sqrt(np.maximum(lam, 0.0))
    z = (rng.standard_normal((draws, W.shape[0])) + 1j * rng.standard_normal((draws, W.shape[0]))) / np.sqrt(2)
    cands = np.vstack([principal[None, :], z @ root.T])
    need = context.required_scale(cands) * _SCALE_MARGIN
    power = need * np.sum(np.abs(cands) ** 2, axis=1)
    if not np.any(np.isfinite(power)):
        raise ExtractionError(f"none of {draws} randomized candidates satisfies the worst-case constraints")
    best = int(np.argmin(power))
    return cands[best] * np.sqrt(need[best])


def evaluate_target_lower_bound(w, theta, rho: float, g, Hf_bar) -> float:
    """Energy efficiency ``|(g + rho Hf theta)^H w|^2 / ||w||^2`` on the mean channel."""
    w = np.asarray(w, dtype=complex).reshape(-1)
    norm2 = float(np.real(np.vdot(w, w)))
    if norm2 == 0.0:
        raise ValueError("beamformer must be nonzero")
    g_hat = np.asarray(g, dtype=complex) + rho * np.asarray(Hf_bar) @ np.asarray(theta, dtype=complex)
    return float(np.abs(np.vdot(g_hat, w)) ** 2 / norm2)


@dataclass
class RobustBeamformingResult:
    w: np.ndarray
    theta: np.ndarray
    rho: float
    transmit_power: float
    y_prime: float
    status: str
    kappa: float = 0.0
    sdp: SdpSolution | None = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def build_lmis(theta, rho, g, kappa, uncertainty: UncertaintyModel, geometry: NetworkGeometry,
               compressed: bool = True, channel_scale: float = 1.0, power_scale: float = 1.0):
    """SNR and energy LMIs, optionally in normalized units.

    With ``channel_scale = s`` and ``power_scale = p`` the LMIs are built for
    channels divided by ``s`` and powers divided by ``p``; a solution ``W``
    of the normalized problem maps back as ``W * p / s**2`` and the
    multipliers scale by the same factor.
    """
    s, p = channel_scale, power_scale
    snr = build_snr_lmi(theta, rho, np.asarray(g) / s, kappa, geometry.gamma1 / p,
                        uncertainty.delta_f / s, compressed=compressed)
    energy = build_energy_lmi(uncertainty.H_bar / s, rho, uncertainty.delta_h / s, geometry.eta,
                              geometry.mu / p, geometry.N, compressed=compressed)
    return [snr, energy]


def robust_beamforming(rho: float, uncertainty: UncertaintyModel, g, geometry: NetworkGeometry,
                       rng: np.random.Generator | None = None, backend: str = "cvxopt",
                       compressed: bool = True, draws: int = RANDOMIZATION_DRAWS) -> RobustBeamformingResult:
    """Run the full model-based pipeline for a given power-splitting ratio.

    Never raises for infeasible or failed solves: ``status`` carries the
    outcome and ``y_prime`` is zero whenever no beamformer was produced.
    """
    g = np.asarray(g, dtype=complex).reshape(-1)
    M, N = geometry.M, geometry.N

    def failed(status, theta=None, kappa=0.0, sdp=None):
        theta = np.ones(N, dtype=complex) if theta is None else theta
        return RobustBeamformingResult(np.zeros(M, dtype=complex), theta, rho, 0.0, 0.0, status, kappa, sdp)

    if not 0.0 < rho < 1.0 or g.shape != (M,) or uncertainty.H_bar.shape != (M, N):
        return failed(INVALID_ARGUMENT)
    try:
        aligned = align_phases(g, uncertainty.Hf_bar)
    except DegenerateChannelError:
        return failed(DEGENERATE_CHANNEL)
    theta, kappa = aligned.theta, aligned.kappa

    s = float(np.linalg.norm(g))
    p = geometry.gamma1
    lmis = build_lmis(theta, rho, g, kappa, uncertainty, geometry, compressed, s, p)
    sol = solve_power_min_sdp(lmis, M, backend=backend)
    if sol.status != OPTIMAL:
        return failed(sol.status, theta, kappa, sol)
    factor = p / s**2
    sol = SdpSolution(sol.W * factor, sol.t * factor, sol.tau * factor, sol.objective * factor,
                      sol.status, sol.iterations, sol.solver_status)

    context = RobustContext.build(g, theta, rho, uncertainty, geometry)
    try:
        w = extract_rank_one(sol.W, context, rng if rng is not None else np.random.default_rng(0), draws)
    except ExtractionError as exc:
        logger.debug("rank-one extraction failed: %s", exc)
        return failed(EXTRACTION_FAILURE, theta, kappa, sol)
    y_prime = evaluate_target_lower_bound(w, theta, rho, g, uncertainty.Hf_bar)
    power = float(np.real(np.vdot(w, w)))
    return RobustBeamformingResult(w, theta, rho, power, y_prime, OPTIMAL, kappa, sol)
