"""Stochastic subgradient descent for the primal L1-SVM, in ``a``-space.

With learning rate ``1/(t+1)`` and the change of variable ``a_t = lambda t w_t``
the SGD step becomes a perceptron-with-margin update: ``a += y_k`` whenever
``a . y_k <= lambda t`` and nothing otherwise, while ``t`` always advances.
Shrinking of ``w`` is thus free, and each presentation costs one sparse dot
product.

Three drivers are provided:

``run_sgd_r``  uniformly random pattern draws for ``t_max`` steps.
``run_sgd_s``  complete epochs of single presentations with the duality-gap
               stopping rule.
``run_sgd_m``  as ``run_sgd_s`` but epochs ``T`` with ``0 < T mod 9 < 5`` present
               every pattern ``ell`` times in a row through the closed-form
               multiple update.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numba import njit

from .data import AugReflPattern, Dataset
from .objective import (
    Decision,
    EpochMetrics,
    approximate_objective,
    dual_lagrangian,
    primal_objective,
    stopping_check,
)
from .report import TrainReport
from .rng import SplitMix64, splitmix_bounded

VARIANTS = ("r", "s", "m")
MACROCYCLE = 9


class InvariantError(RuntimeError):
    pass


@dataclass
class Hyperparams:
    C: float
    m: int
    rho: float = 0.0
    epsilon: float = 0.01
    f: float = 1.2
    ell: int = 5
    t_max: int | None = None
    T_max: int = 10_000
    variant: str = "s"
    seed: int = 0
    permute_each_epoch: bool = False
    # exact objective forced every K epochs for logging (0: only when the stopping rule asks)
    exact_every: int = 50
    # record ||a|| whenever t crosses a multiple of this (0: off)
    trace_every: int = 0
    # SGD-r: evaluate the objective every this many steps (0: only at the end)
    log_every: int = 0

    def __post_init__(self):
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ValueError(f"C must be positive and finite, got {self.C}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.f >= 1:
            raise ValueError("f must be >= 1")
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "r" and (self.t_max is None or self.t_max < 0):
            raise ValueError("variant 'r' needs t_max >= 0")
        if self.variant != "r" and self.T_max < 1:
            raise ValueError("T_max must be >= 1")

    @classmethod
    def from_lambda(cls, lam: float, m: int, **kw) -> "Hyperparams":
        return cls(C=1.0 / (lam * m), m=m, **kw)

    @property
    def lam(self) -> float:
        return 1.0 / (self.C * self.m)


@dataclass
class ModelState:
    a: np.ndarray
    t: int = 0
    T: int = 0
    T_eff: int = 0
    M: int = 0
    I: np.ndarray = field(default=None)
    # dot product a.y_k at the last presentation of k, and the t it was taken at
    last_dot: np.ndarray = field(default=None)
    last_t: np.ndarray = field(default=None)

    @classmethod
    def zeros(cls, dataset: Dataset) -> "ModelState":
        m = dataset.m
        return cls(
            a=np.zeros(dataset.dim),
            I=np.zeros(m, dtype=np.int64),
            last_dot=np.zeros(m),
            last_t=np.full(m, -1, dtype=np.int64),
        )

    def weights(self, lam: float) -> np.ndarray:
        if self.t == 0:
            return np.zeros_like(self.a)
        return self.a / (lam * self.t)

    def copy(self) -> "ModelState":
        return replace(self, a=self.a.copy(), I=self.I.copy(), last_dot=self.last_dot.copy(), last_t=self.last_t.copy())


# --------------------------------------------------------------------------
# kernels


@njit(cache=True)
def sparse_dot(a, indices, values):
    s = 0.0
    for p in range(indices.shape[0]):
        s += a[indices[p]] * values[p]
    return s


@njit(cache=True)
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True)
def _two_prod(a, b):
    # Dekker product: a * b == p + e exactly
    p = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True)
def _exact_leq(P, j, q, n, lam):
    """Exact test of ``P + j q <= n lam`` for small integers j, n."""
    # plain floats settle it unless the margin is within a few roundings of zero
    jq = j * q
    nl = n * lam
    slack = nl - P - jq
    if abs(slack) > 8.0 * 2.0**-53 * (abs(P) + abs(jq) + abs(nl)) + 2.0**-1060:
        return slack > 0.0
    terms = np.empty(5)
    terms[0] = P
    terms[1], terms[2] = _two_prod(float(j), q)
    hi, lo = _two_prod(float(n), lam)
    terms[3], terms[4] = -hi, -lo
    # Shewchuk summation into non-overlapping partials; the last one carries the sign
    partials = np.empty(5)
    count = 0
    for i in range(5):
        x = terms[i]
        kept = 0
        for r in range(count):
            y = partials[r]
            if abs(x) < abs(y):
                x, y = y, x
            x, y = _two_sum(x, y)
            if y != 0.0:
                partials[kept] = y
                kept += 1
        partials[kept] = x
        count = kept + 1
    for r in range(count - 1, -1, -1):
        if partials[r] != 0.0:
            return partials[r] < 0.0
    return True


@njit(cache=True)
def _multiplicity(P, ell, lam, sq_norm):
    # ell_+ >= n  <=>  P <= (ell - 1) lam - (n - 1) max(||y||^2, lam)
    if not _exact_leq(P, 0, 0.0, ell - 1, lam):
        return 0
    q = max(sq_norm, lam)
    x = ((ell - 1) * lam - P) / q
    n = ell if x >= ell else min(ell, int(math.floor(x)) + 1)
    n = max(n, 1)
    # the division may round across an integer; settle the boundary exactly
    while n < ell and _exact_leq(P, n, q, ell - 1, lam):
        n += 1
    while n > 1 and not _exact_leq(P, n - 1, q, ell - 1, lam):
        n -= 1
    return n


@njit(cache=True)
def _epoch_kernel(a, indptr, indices, values, sq_norms, order, ell, lam, t, I, last_dot, last_t,
                  trace_every, trace_t, trace_sq, n_trace):
    added = 0
    for q in range(order.shape[0]):
        k = order[q]
        lo, hi = indptr[k], indptr[k + 1]
        dot = 0.0
        for p in range(lo, hi):
            dot += a[indices[p]] * values[p]
        thresh = lam * t
        last_dot[k] = dot
        last_t[k] = t
        if ell == 1:
            plus = 1 if dot <= thresh else 0
        else:
            plus = _multiplicity(dot - thresh, ell, lam, sq_norms[k])
        if plus > 0:
            for p in range(lo, hi):
                a[indices[p]] += plus * values[p]
            I[k] += plus
            added += plus
        t_new = t + ell
        if trace_every > 0 and t_new // trace_every != t // trace_every:
            trace_t[n_trace] = t_new
            trace_sq[n_trace] = np.dot(a, a)
            n_trace += 1
        t = t_new
    return t, added, n_trace


@njit(cache=True)
def _random_kernel(a, indptr, indices, values, n_steps, lam, t, rng_state, I, last_dot, last_t,
                   trace_every, trace_t, trace_sq, n_trace):
    m = indptr.shape[0] - 1
    added = 0
    for _ in range(n_steps):
        rng_state, k = splitmix_bounded(rng_state, m)
        lo, hi = indptr[k], indptr[k + 1]
        dot = 0.0
        for p in range(lo, hi):
            dot += a[indices[p]] * values[p]
        last_dot[k] = dot
        last_t[k] = t
        if dot <= lam * t:
            for p in range(lo, hi):
                a[indices[p]] += values[p]
            I[k] += 1
            added += 1
        t += 1
        if trace_every > 0 and t % trace_every == 0:
            trace_t[n_trace] = t
            trace_sq[n_trace] = np.dot(a, a)
            n_trace += 1
    return t, added, rng_state, n_trace


# --------------------------------------------------------------------------
# single-presentation operations


def margin_condition(state: ModelState, pattern: AugReflPattern, lam: float) -> tuple[bool, float]:
    """Return ``(a . y <= lam t, a . y)``; ties count as margin errors."""
    dot = sparse_dot(state.a, pattern.indices, pattern.values)
    return bool(dot <= lam * state.t), float(dot)


def single_update(state: ModelState, pattern: AugReflPattern, lam: float) -> ModelState:
    is_error, dot = margin_condition(state, pattern, lam)
    k = pattern.index
    state.last_dot[k] = dot
    state.last_t[k] = state.t
    if is_error:
        state.a[pattern.indices] += pattern.values
        state.I[k] += 1
        state.M += 1
    state.t += 1
    return state


def multiplicity(P: float, ell: int, lam: float, y_sq_norm: float) -> int:
    """Number of margin errors among ``ell`` consecutive presentations of one pattern.

    ``P = a_t . y - lam t`` is taken before the first presentation. Each margin
    error adds ``||y||^2 - lam`` to P and each pass adds ``-lam``, which gives
    0 if ``P > (ell - 1) lam`` and otherwise
    ``min(ell, floor(((ell - 1) lam - P) / max(||y||^2, lam)) + 1)``.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    return int(_multiplicity(float(P), int(ell), float(lam), float(y_sq_norm)))


def multiple_update(state: ModelState, pattern: AugReflPattern, lam: float, ell: int) -> ModelState:
    """Present ``pattern`` ``ell`` times at the cost of one dot product."""
    dot = sparse_dot(state.a, pattern.indices, pattern.values)
    k = pattern.index
    state.last_dot[k] = dot
    state.last_t[k] = state.t
    plus = multiplicity(dot - lam * state.t, ell, lam, pattern.sq_norm)
    if plus:
        state.a[pattern.indices] += plus * pattern.values
        state.I[k] += plus
        state.M += plus
    state.t += ell
    return state


# --------------------------------------------------------------------------
# epochs and drivers


class _Trace:
    def __init__(self, every: int):
        self.every = every
        self.t: list[np.ndarray] = []
        self.sq: list[np.ndarray] = []

    def buffers(self, max_records: int):
        n = max_records + 1 if self.every > 0 else 0
        return np.empty(n, dtype=np.int64), np.empty(n)

    def keep(self, bt, bsq, n):
        if n:
            self.t.append(bt[:n].copy())
            self.sq.append(bsq[:n].copy())

    def result(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.t:
            return np.empty(0, dtype=np.int64), np.empty(0)
        return np.concatenate(self.t), np.sqrt(np.concatenate(self.sq))


def run_epoch(state: ModelState, dataset: Dataset, order: np.ndarray, ell: int, lam: float,
              trace: _Trace | None = None) -> ModelState:
    """Present every pattern once in ``order``, each as an update of multiplicity ``ell``.

    ``T`` grows by one and ``T_eff`` by ``ell``: a multiplicity-``ell`` epoch
    counts as ``ell`` single-presentation epochs for the dual bookkeeping.
    """
    every = trace.every if trace is not None else 0
    bt, bsq = (trace or _Trace(0)).buffers((dataset.m * ell) // every if every else 0)
    t, added, n = _epoch_kernel(
        state.a, dataset.indptr, dataset.indices, dataset.values, dataset.sq_norms,
        np.asarray(order, dtype=np.int64), int(ell), lam, state.t,
        state.I, state.last_dot, state.last_t, every, bt, bsq, 0,
    )
    if trace is not None:
        trace.keep(bt, bsq, n)
    state.t = int(t)
    state.M += int(added)
    state.T += 1
    state.T_eff += int(ell)
    return state


def sgd_m_schedule(T: int, ell: int = 5) -> int:
    """Multiplicity of the epoch at 0-based schedule position ``T``."""
    return ell if 0 < T % MACROCYCLE < 5 else 1


def check_box(state: ModelState) -> None:
    worst = int(state.I.max())
    if worst > state.T_eff:
        k = int(state.I.argmax())
        raise InvariantError(f"box constraint broken: I[{k}]={worst} > T_eff={state.T_eff}")


EpochCallback = Callable[[ModelState, EpochMetrics], None]


def _run_epochs(dataset: Dataset, params: Hyperparams, variant: str, schedule: Callable[[int], int],
                callback: EpochCallback | None) -> tuple[ModelState, TrainReport]:
    if params.m != dataset.m:
        raise ValueError(f"params were built for m={params.m}, dataset has m={dataset.m}")
    lam, C = params.lam, params.C
    state = ModelState.zeros(dataset)
    rng = SplitMix64(params.seed)
    trace = _Trace(params.trace_every)
    report = TrainReport(variant=variant, params=params)

    def exact():
        return primal_objective(state.a, state.t, dataset, C)

    start = time.perf_counter()
    order = rng.permutation(dataset.m)
    for T in range(params.T_max):
        if params.permute_each_epoch and T > 0:
            rng.shuffle(order)
        run_epoch(state, dataset, order, schedule(T), lam, trace)
        check_box(state)

        L = dual_lagrangian(state.M, state.T_eff, state.a, state.t, C, lam, dataset.m)
        J_approx = approximate_objective(state, dataset, C)
        decision, J = stopping_check(J_approx, L, params.epsilon, params.f, exact)
        last = state.T == params.T_max
        if J is None and (last or (params.exact_every and state.T % params.exact_every == 0)):
            J = exact()
        if last and decision != Decision.STOPPED:
            decision = Decision.BUDGET
        metrics = EpochMetrics(
            T=state.T, T_eff=state.T_eff, t=state.t, M=state.M, J_approx=J_approx, J_exact=J,
            L_T=L, w_norm=float(np.linalg.norm(state.a)) / (lam * state.t), decision=decision,
            seconds=time.perf_counter() - start,
        )
        report.epochs.append(metrics)
        if callback is not None:
            callback(state, metrics)
        if decision == Decision.STOPPED:
            break

    report.seconds = time.perf_counter() - start
    report.status = "stopped" if report.epochs[-1].decision == Decision.STOPPED else "budget"
    report.norm_trace = trace.result()
    report.state = state
    return state, report


def run_sgd_s(dataset: Dataset, params: Hyperparams,
              callback: EpochCallback | None = None) -> tuple[ModelState, TrainReport]:
    """Single-presentation epochs until the certified gap drops below ``params.epsilon``.

    ``callback(state, metrics)`` runs after every epoch; ``state`` is live and
    must not be modified.
    """
    return _run_epochs(dataset, params, "s", lambda T: 1, callback)


def run_sgd_m(dataset: Dataset, params: Hyperparams,
              callback: EpochCallback | None = None) -> tuple[ModelState, TrainReport]:
    return _run_epochs(dataset, params, "m", lambda T: sgd_m_schedule(T, params.ell), callback)


def run_sgd_r(
    dataset: Dataset,
    params: Hyperparams,
    until: Callable[[EpochMetrics], bool] | None = None,
) -> tuple[ModelState, TrainReport]:
    """Random-selection SGD for ``params.t_max`` steps.

    With ``params.log_every > 0`` the exact objective is logged every that many
    steps (time spent there is excluded from ``report.seconds``) and ``until``
    may end the run early. No dual bound is available for this variant.
    """
    if params.m != dataset.m:
        raise ValueError(f"params were built for m={params.m}, dataset has m={dataset.m}")
    if params.t_max is None:
        raise ValueError("run_sgd_r needs t_max")
    lam, C, m = params.lam, params.C, dataset.m
    state = ModelState.zeros(dataset)
    rng_state = np.uint64(params.seed % 2**64)
    trace = _Trace(params.trace_every)
    report = TrainReport(variant="r", params=params)
    chunk = params.log_every if params.log_every > 0 else max(params.t_max, 1)
    every = params.trace_every

    train_seconds = 0.0
    while True:
        n = min(chunk, params.t_max - state.t)
        tick = time.perf_counter()
        bt, bsq = trace.buffers(n // every if every else 0)
        t, added, rng_state, nt = _random_kernel(
            state.a, dataset.indptr, dataset.indices, dataset.values, n, lam, state.t, np.uint64(rng_state),
            state.I, state.last_dot, state.last_t, every, bt, bsq, 0,
        )
        train_seconds += time.perf_counter() - tick
        trace.keep(bt, bsq, nt)
        state.t, state.M = int(t), state.M + int(added)
        state.T, state.T_eff = state.t // m, state.t // m

        done = state.t >= params.t_max
        J_approx = approximate_objective(state, dataset, C) if np.all(state.last_t >= 0) else None
        row = EpochMetrics(
            T=state.T, T_eff=state.T_eff, t=state.t, M=state.M, J_approx=J_approx,
            J_exact=primal_objective(state.a, state.t, dataset, C), L_T=None,
            w_norm=float(np.linalg.norm(state.weights(lam))),
            decision=Decision.BUDGET if done else Decision.CONTINUE, seconds=train_seconds,
        )
        report.epochs.append(row)
        if not done and until is not None and until(row):
            row.decision = Decision.STOPPED
            done = True
        if done:
            break

    report.seconds = train_seconds
    report.status = "stopped" if report.epochs[-1].decision == Decision.STOPPED else "steps"
    report.norm_trace = trace.result()
    report.state = state
    # random draws give no box guarantee; report how far the implied duals overshoot C
    report.diagnostics["box_excess"] = max(0.0, float(state.I.max()) * m / state.t - 1.0) if state.t else 0.0
    return state, report


def train(dataset: Dataset, params: Hyperparams) -> tuple[ModelState, TrainReport]:
    runner = {"r": run_sgd_r, "s": run_sgd_s, "m": run_sgd_m}[params.variant]
    return runner(dataset, params)
