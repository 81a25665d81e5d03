"""Minimum-power SDP over the robust LMIs.

The problem is::

    minimize   Tr(W)
    subject to W >= 0,  t >= 0,  tau >= 0,  every AffineLMI >= 0

Backends receive the affine data and embed each complex Hermitian block
``A + jB`` as the real symmetric ``[[A, -B], [B, A]]``.  The default backend
calls the cvxopt primal-dual interior-point method directly; a cvxpy
backend exists for cross-validation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .lmi import AffineLMI, herm_from_coords

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"

# acceptance thresholds for solutions the solver could not certify
LMI_FEAS_TOL = 1e-7
PSD_TOL = 1e-8

__all__ = [
    "SdpSolution",
    "solve_power_min_sdp",
    "realify",
    "OPTIMAL",
    "INFEASIBLE",
    "NUMERICAL_FAILURE",
    "BACKENDS",
]


@dataclass
class SdpSolution:
    W: np.ndarray
    t: float
    tau: float
    objective: float
    status: str
    iterations: int = 0
    solver_status: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def realify(X: np.ndarray) -> np.ndarray:
    """Real symmetric embedding of a complex Hermitian matrix."""
    A, B = X.real, X.imag
    return np.block([[A, -B], [B, A]])


def _problem_data(lmis, M):
    """Stack constant and coefficient blocks; variables are (W coords, t, tau)."""
    nW = M * M
    aux_names = []
    for lmi in lmis:
        if lmi.aux not in ("t", "tau"):
            raise ValueError(f"unknown multiplier {lmi.aux!r}")
        if lmi.aux not in aux_names:
            aux_names.append(lmi.aux)
    aux_index = {name: nW + i for i, name in enumerate(aux_names)}
    nv = nW + len(aux_names)
    blocks = []
    for lmi in lmis:
        if lmi.M != M:
            raise ValueError(f"LMI {lmi.name!r} built for M={lmi.M}, expected {M}")
        F0, FW, Faux = lmi.coefficients()
        n = F0.shape[0]
        coeff = np.zeros((nv, 2 * n, 2 * n))
        for k in range(nW):
            coeff[k] = realify(FW[k])
        coeff[aux_index[lmi.aux]] = realify(Faux)
        blocks.append((realify(F0), coeff))
    # W >= 0 itself
    basis = herm_from_coords(np.eye(nW), M) if nW else None
    coeff = np.zeros((nv, 2 * M, 2 * M))
    for k in range(nW):
        coeff[k] = realify(basis[k])
    blocks.append((np.zeros((2 * M, 2 * M)), coeff))
    c = np.zeros(nv)
    c[:M] = 1.0
    return c, blocks, nv - nW


def _solve_cvxopt(c, blocks, n_aux, options):
    from cvxopt import matrix, solvers

    Gs, hs = [], []
    for F0, coeff in blocks:
        n = F0.shape[0]
        # cvxopt: h - sum_k x_k G_k >= 0, columns are column-major vectorized matrices
        Gs.append(matrix(-coeff.reshape(coeff.shape[0], n * n).T.copy()))
        hs.append(matrix(F0))
    nv = c.shape[0]
    nW = nv - n_aux
    Gl = np.zeros((max(n_aux, 1), nv))
    for i in range(n_aux):
        Gl[i, nW + i] = -1.0
    opts = {"show_progress": False, "maxiters": 60, "abstol": 1e-8, "reltol": 1e-8, "feastol": 1e-8}
    opts.update(options or {})
    try:
        sol = solvers.sdp(matrix(c), Gl=matrix(Gl), hl=matrix(np.zeros(max(n_aux, 1))), Gs=Gs, hs=hs, options=opts)
    except (ArithmeticError, ValueError) as exc:
        logger.debug("cvxopt failed: %s", exc)
        return None, NUMERICAL_FAILURE, str(exc), 0
    status = sol["status"]
    x = None if sol["x"] is None else np.array(sol["x"]).ravel()
    iters = int(sol.get("iterations", 0) or 0)
    if status == "optimal":
        return x, OPTIMAL, status, iters
    if status == "primal infeasible":
        return None, INFEASIBLE, status, iters
    # 'unknown': accepted below only if the iterate verifies as feasible and tight
    gap = sol.get("relative gap")
    if x is not None and gap is not None and abs(gap) < 1e-6:
        return x, "unverified", status, iters
    return None, NUMERICAL_FAILURE, status, iters


def _solve_cvxpy(c, blocks, n_aux, options):
    import cvxpy as cp

    options = dict(options or {})
    solver = options.pop("solver", "CLARABEL")
    nv = c.shape[0]
    x = cp.Variable(nv)
    cons = [x[nv - n_aux:] >= 0] if n_aux else []
    for F0, coeff in blocks:
        expr = F0 + sum(x[k] * coeff[k] for k in range(nv) if np.any(coeff[k]))
        cons.append((expr + expr.T) / 2 >> 0)
    prob = cp.Problem(cp.Minimize(c @ x), cons)
    try:
        prob.solve(solver=solver, **options)
    except cp.error.SolverError as exc:
        return None, NUMERICAL_FAILURE, str(exc), 0
    if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return np.asarray(x.value).ravel(), OPTIMAL if prob.status == cp.OPTIMAL else "unverified", prob.status, 0
    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return None, INFEASIBLE, prob.status, 0
    return None, NUMERICAL_FAILURE, prob.status, 0


BACKENDS = {"cvxopt": _solve_cvxopt, "cvxpy": _solve_cvxpy}


def _verify(lmis, W, t, tau) -> bool:
    w_eigs = np.linalg.eigvalsh(W)
    if w_eigs[0] < -PSD_TOL * max(1.0, w_eigs[-1]):
        return False
    if t < -PSD_TOL or tau < -PSD_TOL:
        return False
    aux = {"t": t, "tau": tau}
    for lmi in lmis:
        F = lmi.evaluate(W, aux[lmi.aux])
        eigs = np.linalg.eigvalsh(F)
        if eigs[0] < -LMI_FEAS_TOL * max(1.0, np.abs(eigs).max()):
            return False
    return True


def solve_power_min_sdp(lmis: list[AffineLMI], M: int, backend: str = "cvxopt",
                        options: dict | None = None) -> SdpSolution:
    """Solve ``min Tr(W)`` subject to ``W >= 0``, ``t, tau >= 0`` and ``lmis``.

    Infeasibility and solver breakdown are reported through ``status``;
    nothing is raised for them.  When the solver stops without a
    certificate (typical when a radius is exactly zero and the multiplier
    grows without bound), the final iterate is accepted as optimal only if
    it satisfies every LMI to ``LMI_FEAS_TOL`` relative accuracy.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown SDP backend {backend!r}; choose from {sorted(BACKENDS)}")
    c, blocks, n_aux = _problem_data(lmis, M)
    x, status, raw_status, iters = BACKENDS[backend](c, blocks, n_aux, options)
    zero = np.zeros((M, M), dtype=complex)
    if x is None or status in (INFEASIBLE, NUMERICAL_FAILURE):
        return SdpSolution(zero, 0.0, 0.0, float("nan"), status, iters, raw_status)
    nW = M * M
    W = herm_from_coords(x[:nW], M)
    W = (W + W.conj().T) / 2
    aux_names = list(dict.fromkeys(lmi.aux for lmi in lmis))
    aux = {name: float(x[nW + i]) for i, name in enumerate(aux_names)}
    t, tau = aux.get("t", 0.0), aux.get("tau", 0.0)
    feasible = _verify(lmis, W, t, tau)
    if status == "unverified":
        status = OPTIMAL if feasible else NUMERICAL_FAILURE
    elif status == OPTIMAL and not feasible:
        logger.debug("solver reported optimal but LMI residual check failed")
        status = NUMERICAL_FAILURE
    return SdpSolution(W, max(t, 0.0), max(tau, 0.0), float(np.trace(W).real), status, iters, raw_status)
