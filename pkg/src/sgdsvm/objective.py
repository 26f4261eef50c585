"""Primal objective, dual lower bound and the stopping rule.

The primal is ``J(w) = 0.5 ||w||^2 + C sum_k max(0, 1 - w . y_k)`` with
``w = a / (lambda t)``. At an epoch boundary the margin-error counts give
dual variables ``alpha_k = C I_k / T_eff`` inside the box ``[0, C]``, hence the
lower bound ``L = C M / T_eff - 0.5 ||w||^2 <= J_opt``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from numba import njit

from .data import Dataset

if TYPE_CHECKING:
    from .engine import ModelState


class Decision(str, enum.Enum):
    CONTINUE = "continue"
    EXACT_CHECK = "exact-check-triggered"
    STOPPED = "stopped"
    BUDGET = "budget"


@dataclass
class EpochMetrics:
    T: int
    T_eff: int
    t: int
    M: int
    J_approx: float | None
    J_exact: float | None
    L_T: float | None
    w_norm: float
    decision: Decision
    seconds: float = 0.0

    @property
    def gap_rel(self) -> float | None:
        """``(J - L) / L`` when both are known and ``L > 0``."""
        if self.J_exact is None or self.L_T is None or self.L_T <= 0:
            return None
        return (self.J_exact - self.L_T) / self.L_T


class ContractError(RuntimeError):
    """A quantity was requested where its guarantee does not hold."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, primal: float, dual: float, kkt: float):
        super().__init__(f"{msg} (primal={primal:.12g}, dual={dual:.12g}, kkt={kkt:.3g})")
        self.primal = primal
        self.dual = dual
        self.kkt = kkt


def weight_vector(a: np.ndarray, t: int, lam: float) -> np.ndarray:
    if t == 0:
        return np.zeros_like(a)
    return a / (lam * t)


def primal_objective(a: np.ndarray, t: int, dataset: Dataset, C: float) -> float:
    lam = 1.0 / (C * dataset.m)
    w = weight_vector(a, t, lam)
    margins = dataset.matrix @ w
    return 0.5 * float(np.dot(w, w)) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def dual_lagrangian(M: int, T_eff: int, a: np.ndarray, t: int, C: float, lam: float, m: int) -> float:
    """Lower bound ``C M / T_eff - 0.5 ||a / (lam t)||^2`` on the optimum.

    Only valid at epoch boundaries, i.e. ``t == m * T_eff``.
    """
    if T_eff < 1 or t != m * T_eff:
        raise ContractError(f"dual bound needs an epoch boundary: t={t}, m={m}, T_eff={T_eff}")
    w = a / (lam * t)
    return C * M / T_eff - 0.5 * float(np.dot(w, w))


def approximate_objective(state: ModelState, dataset: Dataset, C: float) -> float:
    """Primal objective using each pattern's dot product from its last presentation.

    The cached dot of pattern k was taken against ``a`` at time ``t_k`` (for a
    multiple update: the start of the block), so its margin is
    ``dot_k / (lambda t_k)``. The norm term uses the current weight vector.
    """
    lam = 1.0 / (C * dataset.m)
    if np.any(state.last_t < 0):
        raise ContractError("approximate objective needs every pattern presented at least once")
    w = weight_vector(state.a, state.t, lam)
    t_k = state.last_t.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        margins = np.where(t_k > 0, state.last_dot / (lam * t_k), 0.0)
    return 0.5 * float(np.dot(w, w)) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def stopping_check(
    J_approx: float,
    L_T: float,
    epsilon: float,
    f: float,
    exact_objective: Callable[[], float],
) -> tuple[Decision, float | None]:
    """Two-stage relative-accuracy test.

    The cheap approximate gap must be within ``f * epsilon`` before the exact
    objective is computed; only the exact gap can stop the run. Returns the
    decision and the exact objective if it was evaluated.
    """
    if L_T <= 0:
        return Decision.CONTINUE, None
    if (J_approx - L_T) / L_T > f * epsilon:
        return Decision.CONTINUE, None
    J = exact_objective()
    if (J - L_T) / L_T <= epsilon:
        return Decision.STOPPED, J
    return Decision.EXACT_CHECK, J


def norm_bound(t: int, lam: float, R: float) -> float:
    return math.sqrt(1.0 + (R * R / lam - 1.0) / t) / math.sqrt(lam)


def norm_bound_check(a: np.ndarray, t: int, lam: float, R: float) -> tuple[bool, float]:
    """Check ``||a / (lam t)|| <= sqrt((1 + (R^2/lam - 1)/t) / lam)``; returns (holds, slack)."""
    if t < 1:
        raise ValueError("norm bound is stated for t >= 1")
    lhs = float(np.linalg.norm(a)) / (lam * t)
    slack = norm_bound(t, lam, R) - lhs
    return slack >= 0.0, slack


@dataclass
class ReferenceSolution:
    J_opt: float
    w: np.ndarray
    alpha: np.ndarray
    dual: float
    kkt: float
    sweeps: int


@njit(cache=True)
def _dual_cd(indptr, indices, values, sq_norms, C, alpha, w, tol, max_sweeps):
    m = indptr.shape[0] - 1
    for sweep in range(1, max_sweeps + 1):
        worst = 0.0
        for i in range(m):
            lo, hi = indptr[i], indptr[i + 1]
            g = -1.0
            for p in range(lo, hi):
                g += w[indices[p]] * values[p]
            a_i = alpha[i]
            if a_i <= 0.0:
                pg = min(g, 0.0)
            elif a_i >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            worst = max(worst, abs(pg))
            if pg == 0.0:
                continue
            if sq_norms[i] > 0.0:
                new = min(max(a_i - g / sq_norms[i], 0.0), C)
            else:
                new = C
            delta = new - a_i
            if delta != 0.0:
                alpha[i] = new
                for p in range(lo, hi):
                    w[indices[p]] += delta * values[p]
        if worst <= tol:
            return sweep, worst
    return max_sweeps, worst


def _kkt_residual(alpha: np.ndarray, margins: np.ndarray, C: float) -> float:
    g = margins - 1.0
    pg = np.where(alpha <= 0.0, np.minimum(g, 0.0), np.where(alpha >= C, np.maximum(g, 0.0), g))
    return float(np.abs(pg).max())


def reference_solve(dataset: Dataset, C: float, tol: float = 1e-9, max_sweeps: int = 200_000) -> ReferenceSolution:
    """Solve the boxed dual by cyclic exact coordinate ascent.

    Maximizes ``sum(alpha) - 0.5 ||sum_k alpha_k y_k||^2`` over ``0 <= alpha <= C``
    until the projected-gradient (KKT) residual is below ``tol``. The returned
    ``J_opt`` is the primal objective at ``w = sum_k alpha_k y_k``; ``dual``
    certifies it from below.
    """
    alpha = np.zeros(dataset.m)
    w = np.zeros(dataset.dim)
    sweeps, _ = _dual_cd(dataset.indptr, dataset.indices, dataset.values, dataset.sq_norms, C, alpha, w, tol, max_sweeps)
    Y = dataset.matrix
    w = Y.T @ alpha  # drop drift from incremental updates
    margins = Y @ w
    ww = float(np.dot(w, w))
    primal = 0.5 * ww + C * float(np.maximum(0.0, 1.0 - margins).sum())
    dual = float(alpha.sum()) - 0.5 * ww
    kkt = _kkt_residual(alpha, margins, C)
    if sweeps >= max_sweeps and kkt > tol:
        raise ConvergenceError(f"coordinate ascent did not reach KKT residual {tol:g} in {max_sweeps} sweeps", primal, dual, kkt)
    return ReferenceSolution(primal, w, alpha, dual, kkt, sweeps)
