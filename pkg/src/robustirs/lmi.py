"""Linear matrix inequalities for the worst-case SNR and energy constraints.

Each constraint is an :class:`AffineLMI`: a Hermitian block matrix that is
affine in the transmit covariance ``W`` and one nonnegative multiplier
(``t`` for the SNR constraint, ``tau`` for the energy constraint).  The
matrix is built by an explicit block function; solver backends read the
affine coefficients through :meth:`AffineLMI.coefficients`.

Vectorization is column stacking, ``vec(H) = [h_1; ...; h_N]``, so
``vec(H)^H (I_N kron W) vec(H) = ||H^H w||^2`` for ``W = w w^H``.

Two sizes are available for each constraint.  The full form has size
``MN + 1``.  The compressed form removes blocks that a unitary congruence
splits off and that reduce to ``t I >= 0`` (SNR) or ``W + tau I >= 0``
(energy); both are implied by ``W >= 0`` and the multipliers' sign
constraints, so the feasible sets in ``(W, t, tau)`` coincide.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "AffineLMI",
    "hermitian_basis",
    "herm_from_coords",
    "coords_from_herm",
    "build_snr_lmi",
    "build_energy_lmi",
    "dump_lmis",
]


def hermitian_basis(M: int) -> np.ndarray:
    """Real-coordinate basis of ``M x M`` Hermitian matrices, shape ``(M*M, M, M)``.

    The first ``M`` elements are the diagonal units; then, for each
    ``i < j``, a symmetric real unit and an antisymmetric imaginary unit.
    """
    basis = np.zeros((M * M, M, M), dtype=complex)
    for i in range(M):
        basis[i, i, i] = 1.0
    k = M
    for i in range(M):
        for j in range(i + 1, M):
            basis[k, i, j] = basis[k, j, i] = 1.0
            basis[k + 1, i, j] = 1j
            basis[k + 1, j, i] = -1j
            k += 2
    return basis


def herm_from_coords(x: np.ndarray, M: int) -> np.ndarray:
    return np.tensordot(np.asarray(x, dtype=float), hermitian_basis(M), axes=1)


def coords_from_herm(W: np.ndarray) -> np.ndarray:
    M = W.shape[0]
    out = [W[i, i].real for i in range(M)]
    for i in range(M):
        for j in range(i + 1, M):
            out.extend((W[i, j].real, W[i, j].imag))
    return np.array(out)


@dataclass
class AffineLMI:
    """``block(W, aux) >= 0`` with ``block`` affine in ``(W, aux)``."""

    name: str
    M: int
    aux: str
    block: Callable[[np.ndarray, float], np.ndarray]
    meta: dict = field(default_factory=dict)
    _coeffs: tuple | None = field(default=None, repr=False)

    def evaluate(self, W: np.ndarray, aux: float) -> np.ndarray:
        W = np.asarray(W, dtype=complex)
        if W.shape != (self.M, self.M):
            raise ValueError(f"W must be {self.M}x{self.M}, got {W.shape}")
        return self.block(W, float(aux))

    @property
    def size(self) -> int:
        return self.constant.shape[0]

    @property
    def constant(self) -> np.ndarray:
        return self.coefficients()[0]

    def coefficients(self):
        """Return ``(F0, FW, Faux)`` with ``block(W, a) = F0 + sum_k x_k FW[k] + a Faux``.

        ``x`` are the real coordinates of ``W`` in :func:`hermitian_basis`.
        """
        if self._coeffs is None:
            zero = np.zeros((self.M, self.M), dtype=complex)
            F0 = self.block(zero, 0.0)
            FW = np.stack([self.block(E, 0.0) - F0 for E in hermitian_basis(self.M)])
            Faux = self.block(zero, 1.0) - F0
            self._coeffs = (F0, FW, Faux)
        return self._coeffs

    def min_eigenvalue(self, W, aux) -> float:
        return float(np.linalg.eigvalsh(self.evaluate(W, aux))[0])


def _assemble(top_left, top_right, bottom_right):
    n = top_left.shape[0]
    out = np.empty((n + 1, n + 1), dtype=complex)
    out[:n, :n] = top_left
    out[:n, n] = top_right
    out[n, :n] = top_right.conj()
    out[n, n] = bottom_right
    return out


def build_snr_lmi(theta, rho: float, g, kappa: float, gamma1: float, delta_f: float,
                  compressed: bool = False) -> AffineLMI:
    """Worst-case SNR constraint over the cascaded-channel ball.

    Full form, with ``alpha = 1 + rho * kappa``::

        [[rho^2 (theta theta^H kron W) + t I_MN,  alpha rho (theta kron W) g],
         [alpha rho g^H (theta kron W)^H,          alpha^2 g^H W g - gamma1 - t delta_f^2]]

    The compressed form projects onto the range of ``theta kron I_M``::

        [[rho^2 N W + t I_M,        alpha rho sqrt(N) W g],
         [alpha rho sqrt(N) g^H W,  alpha^2 g^H W g - gamma1 - t delta_f^2]]
    """
    theta = np.asarray(theta, dtype=complex).reshape(-1)
    g = np.asarray(g, dtype=complex).reshape(-1)
    if np.any(np.abs(np.abs(theta) - 1.0) > 1e-9):
        raise ValueError("theta must have unit-modulus entries")
    if not gamma1 > 0:
        raise ValueError("gamma1 must be positive")
    if delta_f < 0:
        raise ValueError("delta_f must be nonnegative")
    M, N = g.shape[0], theta.shape[0]
    alpha = 1.0 + rho * kappa
    delta2 = float(delta_f) ** 2

    if compressed:
        sqrtN = np.sqrt(N)
        eye = np.eye(M)

        def block(W, t):
            Wg = W @ g
            return _assemble(
                rho**2 * N * W + t * eye,
                alpha * rho * sqrtN * Wg,
                alpha**2 * np.vdot(g, Wg) - gamma1 - t * delta2,
            )
    else:
        TT = np.outer(theta, theta.conj())
        eye = np.eye(M * N)

        def block(W, t):
            Wg = W @ g
            return _assemble(
                rho**2 * np.kron(TT, W) + t * eye,
                alpha * rho * np.kron(theta, Wg),
                alpha**2 * np.vdot(g, Wg) - gamma1 - t * delta2,
            )

    meta = dict(rho=rho, kappa=kappa, alpha=alpha, gamma1=gamma1, delta_f=float(delta_f),
                compressed=compressed, N=N)
    return AffineLMI("snr", M, "t", block, meta)


def build_energy_lmi(H_bar, rho: float, delta_h: float, eta: float, mu: float, N: int,
                     compressed: bool = False) -> AffineLMI:
    """Worst-case harvested-energy constraint over the AP-IRS ball.

    With ``W_c = I_N kron W`` and ``gamma0 = vec(H_bar)^H W_c vec(H_bar)``::

        [[W_c + tau I_MN,          W_c vec(H_bar)],
         [vec(H_bar)^H W_c,  gamma0 - N mu / (eta (1 - rho^2)) - tau delta_h^2]]

    The compressed form replaces ``H_bar`` by ``U S`` from its thin SVD, which
    has ``min(M, N)`` columns and the same Gram matrix ``H_bar H_bar^H``.
    """
    H_bar = np.atleast_2d(np.asarray(H_bar, dtype=complex))
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1) for the energy constraint, got {rho}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    if delta_h < 0:
        raise ValueError("delta_h must be nonnegative")
    M = H_bar.shape[0]
    if H_bar.shape[1] != N:
        raise ValueError(f"H_bar has {H_bar.shape[1]} columns but N = {N}")
    demand = N * mu / (eta * (1.0 - rho**2))
    delta2 = float(delta_h) ** 2

    Hm = H_bar
    if compressed and N > M:
        U, S, _ = np.linalg.svd(H_bar, full_matrices=False)
        Hm = U * S
    K = Hm.shape[1]
    cols = [Hm[:, n] for n in range(K)]
    eye = np.eye(M * K)

    def block(W, tau):
        Wh = np.concatenate([W @ h for h in cols])
        gamma0 = sum(np.vdot(h, W @ h) for h in cols)
        return _assemble(
            np.kron(np.eye(K), W) + tau * eye,
            Wh,
            gamma0 - demand - tau * delta2,
        )

    meta = dict(rho=rho, eta=eta, mu=mu, N=N, demand=demand, delta_h=float(delta_h),
                compressed=compressed)
    return AffineLMI("energy", M, "tau", block, meta)


def dump_lmis(lmis, path, W=None, aux=None) -> None:
    """Write LMI blocks as JSON for cross-checking against other solvers.

    Each entry holds the block name, the multiplier name and the dense
    constant and coefficient matrices as ``[re, im]`` pairs.  If ``W`` and
    ``aux`` (a dict keyed by multiplier name) are given, the evaluated block
    is included too.
    """
    def pairs(A):
        return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A)]

    out = []
    for lmi in lmis:
        F0, FW, Faux = lmi.coefficients()
        entry = {
            "block": lmi.name,
            "multiplier": lmi.aux,
            "size": int(F0.shape[0]),
            "constant": pairs(F0),
            "w_coefficients": [pairs(F) for F in FW],
            "multiplier_coefficient": pairs(Faux),
        }
        if W is not None and aux is not None:
            entry["evaluated"] = pairs(lmi.evaluate(W, aux[lmi.aux]))
        out.append(entry)
    with open(path, "w") as fh:
        json.dump({"format": "robustirs-lmi", "version": 1, "lmis": out}, fh)
