"""Linearized dynamics near infinity and the alpha balance.

With ``Lambda_i ~ 1 / lambda_i`` the reduced energy near a tuple is
``C (1 + c Lambda^T M Lambda)``, so descent follows ``dLambda/ds = -M Lambda``.
Convergence to 0 means the bubbles keep concentrating: a critical point at
infinity.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .criterion import AbstractCriticalData, InteractionMatrix, build_matrix, c1_tolerance, least_eigenvalue
from .errors import FlowConsistencyError, FlowIntegrationError, InputError

CONVERGED = "converged_to_infinity"
EXITED = "exited"
BUDGET = "budget_exhausted"
AT_INFINITY = "critical_point_at_infinity"
NOT_ATTAINED = "not_attained"


def alpha_equilibrium(K_values) -> np.ndarray:
    """``alpha_i`` proportional to ``K_i^(-1/2)`` with unit Euclidean norm."""
    K = np.asarray(K_values, dtype=float)
    if K.ndim != 1 or K.size == 0 or not np.all(K > 0):
        raise InputError("alpha balance needs positive K values")
    a = K ** -0.5
    return a / np.linalg.norm(a)


def balance_residual(alpha, K_values) -> float:
    m = np.asarray(alpha) ** 2 * np.asarray(K_values)
    return float(np.max(np.abs(m[:, None] / m[None, :] - 1.0)))


@dataclass(frozen=True)
class FlowConfig:
    s_max: float = 1e5
    converge_tol: float = 1e-6
    exit_factor: float = 10.0
    samples: int = 201
    rtol: float = 1e-9
    atol: float = 1e-14
    min_step: float = 1e-12


@dataclass
class TrajectoryRecord:
    s: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    classification: str
    terminal_norm: float
    s_end: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        p = self.states.shape[1]
        w.writerow(["s"] + [f"Lambda_{i + 1}" for i in range(p)] + ["LtML"])
        for s, row, e in zip(self.s, self.states, self.energy):
            w.writerow([repr(float(s))] + [repr(float(v)) for v in row] + [repr(float(e))])
        return buf.getvalue()


def integrate(m, lam0, cfg: FlowConfig | None = None) -> TrajectoryRecord:
    """Adaptive RK integration of ``dLambda/ds = -M Lambda`` with terminal events.

    Stops when ``|Lambda| < converge_tol`` or ``|Lambda| > exit_factor |Lambda0|``;
    otherwise runs to ``s_max``.  States are resampled on ``samples`` equally
    spaced times over the covered interval.
    """
    cfg = cfg or FlowConfig()
    M = m.matrix if isinstance(m, InteractionMatrix) else np.asarray(m, dtype=float)
    y0 = np.asarray(lam0, dtype=float)
    if y0.shape != (M.shape[0],) or not np.all(y0 > 0):
        raise InputError("initial Lambda must be a strictly positive vector matching M")
    n0 = float(np.linalg.norm(y0))
    hi = cfg.exit_factor * n0

    def small(s, y):
        return np.linalg.norm(y) - cfg.converge_tol
    small.terminal = True

    def big(s, y):
        return np.linalg.norm(y) - hi
    big.terminal = True

    sol = solve_ivp(lambda s, y: -M @ y, (0.0, cfg.s_max), y0, method="RK45", events=(small, big),
                    dense_output=True, rtol=cfg.rtol, atol=cfg.atol)
    if sol.status == -1:
        raise FlowIntegrationError(f"flow integration failed: {sol.message}")
    s_end = float(sol.t[-1])
    if sol.status == 1 and sol.t_events[0].size:
        cls = CONVERGED
    elif sol.status == 1 and sol.t_events[1].size:
        cls = EXITED
    else:
        cls = BUDGET
    if s_end <= cfg.min_step and cls == BUDGET:
        raise FlowIntegrationError("step size underflow")
    s = np.linspace(0.0, s_end, cfg.samples)
    Y = sol.sol(s).T
    Y[0], Y[-1] = y0, sol.y[:, -1]
    energy = np.einsum("ni,ij,nj->n", Y, M, Y)
    return TrajectoryRecord(s, Y, energy, cls, float(np.linalg.norm(sol.y[:, -1])), s_end)


def classify_tuple(data: AbstractCriticalData, labels, *, lam0: float = 1e-2,
                   cfg: FlowConfig | None = None, rel_tol: float = 1e-8) -> tuple:
    """Flow verdict for a tuple, checked against the sign of its least eigenvalue.

    Returns ``(classification, trajectory)``.
    """
    m = build_matrix(data, labels)
    return classify_matrix(m, lam0=lam0, cfg=cfg, rel_tol=rel_tol)


def classify_matrix(m, *, lam0: float = 1e-2, cfg: FlowConfig | None = None, rel_tol: float = 1e-8) -> tuple:
    M = m.matrix if isinstance(m, InteractionMatrix) else np.asarray(m, dtype=float)
    traj = integrate(M, np.full(M.shape[0], lam0), cfg)
    verdict = AT_INFINITY if traj.classification == CONVERGED else NOT_ATTAINED
    rho = least_eigenvalue(M)
    if abs(rho) >= c1_tolerance(M, rel_tol) and (verdict == AT_INFINITY) != (rho > 0):
        raise FlowConsistencyError(
            f"flow says {verdict} ({traj.classification}) but least eigenvalue is {rho:.6g}")
    return verdict, traj
