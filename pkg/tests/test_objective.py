import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from oracles import dense_primal
from sgdsvm import augment_reflect, make_synthetic
from sgdsvm.data import LabeledExample, SparseVector
from sgdsvm.engine import Hyperparams, ModelState, run_epoch, run_sgd_m, run_sgd_s
from sgdsvm.objective import (
    ContractError,
    ConvergenceError,
    Decision,
    approximate_objective,
    dual_lagrangian,
    norm_bound,
    norm_bound_check,
    primal_objective,
    reference_solve,
    stopping_check,
)


def ds_from(rows, rho=0.0):
    return augment_reflect([LabeledExample(SparseVector.from_pairs(p), l) for l, p in rows], rho)


def opposing():
    return ds_from([(1, [(0, 1.0)]), (-1, [(0, 1.0)])])


# ---------------------------------------------------------------- primal


def test_primal_at_zero(medium_dataset):
    a = np.zeros(medium_dataset.dim)
    assert primal_objective(a, 0, medium_dataset, 0.3) == pytest.approx(0.3 * medium_dataset.m)
    assert primal_objective(a, 7, medium_dataset, 0.3) == pytest.approx(0.3 * medium_dataset.m)


def test_primal_single_pattern_hinge():
    ds = ds_from([(1, [(0, 1.0)])])
    C = 2.0
    lam = 1.0 / C
    # w = a / (lam t) = [1]
    assert primal_objective(np.array([lam * 3, 0.0]), 3, ds, C) == pytest.approx(0.5)


def test_primal_opposing_patterns_closed_form():
    ds = opposing()
    for C in (0.05, 1.0, 10.0):
        lam = 1.0 / (2 * C)
        for u in (-1.5, 0.0, 0.3):
            J = primal_objective(np.array([u * lam * 5, 0.0]), 5, ds, C)
            assert J == pytest.approx(u * u / 2 + C * (max(0, 1 - u) + max(0, 1 + u)))
        res = minimize_scalar(lambda u: u * u / 2 + C * (max(0, 1 - u) + max(0, 1 + u)), bounds=(-5, 5), method="bounded")
        assert res.fun == pytest.approx(2 * C, rel=1e-6)


def test_primal_matches_dense(medium_dataset):
    rng = np.random.default_rng(1)
    a = rng.standard_normal(medium_dataset.dim)
    C = 0.8
    lam = 1.0 / (C * medium_dataset.m)
    w = a / (lam * 13)
    J = primal_objective(a, 13, medium_dataset, C)
    assert J == pytest.approx(dense_primal(medium_dataset.matrix.toarray(), w, C), rel=1e-12)


# ---------------------------------------------------------------- dual bound


def test_dual_trivial():
    assert dual_lagrangian(0, 1, np.zeros(3), 4, 1.0, 0.25, 4) == 0.0


def test_dual_all_errors_first_epoch():
    # mutually orthogonal patterns: a . y_k = 0 at each first presentation
    ds = ds_from([(1 if k % 2 else -1, [(k, 1.0 + k)]) for k in range(6)])
    C = 2.0
    lam = 1.0 / (C * ds.m)
    state = run_epoch(ModelState.zeros(ds), ds, np.arange(ds.m), 1, lam)
    assert state.M == ds.m
    w = state.a / (lam * state.t)
    L = dual_lagrangian(state.M, state.T_eff, state.a, state.t, C, lam, ds.m)
    assert L == pytest.approx(C * ds.m - 0.5 * w @ w)


def test_dual_off_boundary_is_contract_error():
    with pytest.raises(ContractError):
        dual_lagrangian(3, 1, np.zeros(2), 5, 1.0, 0.25, 4)
    with pytest.raises(ContractError):
        dual_lagrangian(0, 0, np.zeros(2), 0, 1.0, 0.25, 4)


def test_dual_equals_explicit_box_duals(medium_dataset):
    ds = medium_dataset
    C = 0.5
    params = Hyperparams(C=C, m=ds.m, variant="m", epsilon=1e-12, T_max=6)
    state, report = run_sgd_m(ds, params)
    alpha = C * state.I / state.T_eff
    assert np.all((alpha >= 0) & (alpha <= C))
    w = ds.matrix.T @ alpha
    explicit = alpha.sum() - 0.5 * w @ w
    assert report.final.L_T == pytest.approx(explicit, rel=1e-10)


# ---------------------------------------------------------------- approximate objective


def test_approximate_single_pattern():
    ds = ds_from([(1, [(0, 1.0), (2, 0.5)])])
    C = 1.0
    lam = 1.0 / C
    state = ModelState.zeros(ds)
    run_epoch(state, ds, np.array([0]), 1, lam)
    # presented at t=0 with a=0: loss 1, current w = y / lam
    w = state.a / (lam * state.t)
    assert approximate_objective(state, ds, C) == pytest.approx(0.5 * w @ w + C)


def test_approximate_equals_exact_without_updates():
    ds = ds_from([(1, [(0, 1.0), (1, 0.5)]), (1, [(1, 2.0)]), (1, [(0, 0.3), (2, 1.0)])])
    C = 1.0
    lam = 1.0 / (C * ds.m)
    state = ModelState.zeros(ds)
    state.a[:] = [5.0, 5.0, 5.0, 0.0]
    state.t = 3
    run_epoch(state, ds, np.arange(ds.m), 1, lam)
    assert state.M == 0
    # identical dots; margins differ only through lam t_k versus lam t
    w = state.a / (lam * state.t)
    margins = ds.matrix @ w
    drift = np.array([state.t / t_k for t_k in state.last_t])
    expected = 0.5 * w @ w + C * np.maximum(0, 1 - margins * drift).sum()
    assert approximate_objective(state, ds, C) == pytest.approx(expected, rel=1e-12)
    assert approximate_objective(state, ds, C) <= primal_objective(state.a, state.t, ds, C)


def test_approximate_needs_all_presented(small_dataset):
    with pytest.raises(ContractError):
        approximate_objective(ModelState.zeros(small_dataset), small_dataset, 1.0)


def test_approximate_close_to_exact_on_small_runs():
    for seed in range(5):
        ds = augment_reflect(make_synthetic(60 + 10 * seed, 10, seed=seed))
        for C in (0.1, 1.0):
            params = Hyperparams(C=C, m=ds.m, epsilon=1e-12, T_max=20, exact_every=1, seed=seed)
            _, report = run_sgd_s(ds, params)
            for e in report.epochs[1:]:
                assert abs(e.J_approx - e.J_exact) / e.J_exact < 0.5


# ---------------------------------------------------------------- stopping rule


def _never():
    raise AssertionError("exact objective must not be evaluated")


def test_stopping_nonpositive_bound():
    assert stopping_check(1.0, 0.0, 0.01, 1.2, _never) == (Decision.CONTINUE, None)
    assert stopping_check(-5.0, -1.0, 0.01, 1.2, _never) == (Decision.CONTINUE, None)


def test_stopping_approx_gap_too_large():
    L, eps = 10.0, 0.01
    assert stopping_check(L * (1 + 2 * eps), L, eps, 1.2, _never) == (Decision.CONTINUE, None)


def test_stopping_two_stage():
    L, eps = 10.0, 0.01
    decision, J = stopping_check(L * (1 + eps), L, eps, 1.2, lambda: L * (1 + 1.5 * eps))
    assert decision == Decision.EXACT_CHECK and J == pytest.approx(10.15)
    decision, J = stopping_check(L * (1 + eps), L, eps, 1.2, lambda: L * (1 + 0.5 * eps))
    assert decision == Decision.STOPPED


def test_stopped_only_with_exact_gap(medium_dataset):
    for v, runner in (("s", run_sgd_s), ("m", run_sgd_m)):
        params = Hyperparams(C=1.0, m=medium_dataset.m, variant=v, epsilon=0.02)
        _, report = runner(medium_dataset, params)
        for e in report.epochs:
            if e.decision == Decision.STOPPED:
                assert e.J_exact is not None and e.gap_rel <= 0.02


# ---------------------------------------------------------------- norm bound


def test_norm_bound_first_step_is_tight():
    lam, R = 0.3, 2.0
    assert norm_bound(1, lam, R) == pytest.approx(R / lam, rel=1e-14)
    a = np.array([R, 0.0])
    holds, slack = norm_bound_check(a, 1, lam, R)
    assert holds or slack > -1e-12


def test_norm_bound_zero_vector():
    holds, slack = norm_bound_check(np.zeros(4), 10, 0.5, 1.0)
    assert holds and slack == norm_bound(10, 0.5, 1.0)


def test_norm_bound_along_trajectory(medium_dataset):
    ds = medium_dataset
    params = Hyperparams(C=10.0, m=ds.m, epsilon=1e-12, T_max=30, trace_every=1, variant="s")
    _, report = run_sgd_s(ds, params)
    ts, norms = report.norm_trace
    assert ts.size == 30 * ds.m
    rhs = np.array([norm_bound(int(t), params.lam, ds.R) for t in ts])
    lhs = norms / (params.lam * ts)
    assert np.all(lhs <= rhs + 1e-12)
    assert np.all(lhs <= ds.R / params.lam + 1e-12)


# ---------------------------------------------------------------- reference solver


def test_reference_single_pattern():
    ds = ds_from([(1, [(0, 1.0)])])
    sol = reference_solve(ds, 10.0)
    assert sol.alpha[0] == pytest.approx(1.0)
    np.testing.assert_allclose(sol.w, [1.0, 0.0], atol=1e-12)
    assert sol.J_opt == pytest.approx(0.5)


def test_reference_single_pattern_clipped():
    # alpha* = min(C, 1 / ||y||^2)
    ds = ds_from([(1, [(0, 2.0)])])
    sol = reference_solve(ds, 0.1)
    assert sol.alpha[0] == pytest.approx(0.1)
    assert sol.J_opt == pytest.approx(0.5 * 0.04 + 0.1 * (1 - 0.4))


def test_reference_opposing():
    for C in (0.05, 1.0, 10.0):
        sol = reference_solve(opposing(), C)
        assert sol.J_opt == pytest.approx(2 * C)
        assert sol.dual == pytest.approx(2 * C)


def test_reference_certificate():
    ds = augment_reflect(make_synthetic(50, 8, seed=21))
    sol = reference_solve(ds, 1.0, tol=1e-10)
    assert sol.kkt <= 1e-8
    assert 0 <= sol.J_opt - sol.dual <= 1e-7 * sol.J_opt
    assert np.all((sol.alpha >= 0) & (sol.alpha <= 1.0))


def test_reference_iteration_cap():
    ds = augment_reflect(make_synthetic(50, 8, seed=21))
    with pytest.raises(ConvergenceError) as err:
        reference_solve(ds, 10.0, tol=1e-14, max_sweeps=2)
    assert err.value.primal >= err.value.dual


def test_weak_duality_every_epoch(medium_dataset):
    ds = medium_dataset
    for C in (0.05, 1.0, 10.0):
        J_opt = reference_solve(ds, C).J_opt
        for v, runner in (("s", run_sgd_s), ("m", run_sgd_m)):
            params = Hyperparams(C=C, m=ds.m, variant=v, epsilon=1e-12, T_max=50, exact_every=1)
            _, report = runner(ds, params)
            for e in report.epochs:
                assert e.L_T <= e.J_exact + 1e-9 * (1 + abs(e.J_exact))
                assert e.L_T <= J_opt * (1 + 1e-6)
                assert J_opt <= e.J_exact * (1 + 1e-6)
