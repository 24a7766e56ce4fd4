import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize as sopt
from scipy import special

from ceopt.benchmarks import (
    GRIEWANK_A,
    GRIEWANK_B,
    LassoProblem,
    WeightedGraph,
    dirichlet_loglik,
    griewank,
    lasso_objective,
    make_dirichlet,
    make_lasso,
    make_regime,
    maxcut_value,
    peaks,
    regime_sse,
)
from ceopt.constraints import LinearConstraints
from ceopt.engine import CeConfig, optimize
from ceopt.models import SamplingModel
from ceopt.oracles import (
    OracleConvergenceError,
    OracleRefused,
    compare,
    digamma,
    dirichlet_fixed_point_mle,
    exhaustive_maxcut,
    grid_search,
    inv_digamma,
    lambda_max,
    lasso_coordinate_descent,
    regime_exhaustive,
    soft_threshold,
    sparsity_lambda,
    trigamma,
)


def test_compare_sign_convention():
    assert compare(1.0, 0.99, None, 0.02).agrees
    assert not compare(1.1, 1.0, None, 0.05).agrees
    assert compare(8.0, 8.1, None, 0.2, maximize=True).gap == pytest.approx(0.1)
    # doing better than the oracle always agrees
    assert compare(9.0, 8.0, None, 0.0, maximize=True).agrees
    d = compare(1.0, 1.0, np.array([1, 2]), 0.0).to_dict()
    assert d["oracleArg"] == [1, 2] and d["agrees"]


# -- max-cut -----------------------------------------------------------------


def test_maxcut_two_nodes():
    val, cut = exhaustive_maxcut(WeightedGraph(np.array([[0, 5], [5, 0]])))
    assert val == 5 and cut.tolist() == [1, 0]


def test_maxcut_empty_graph():
    val, cut = exhaustive_maxcut(WeightedGraph(np.zeros((5, 5))))
    assert val == 0 and cut.tolist() == [1, 0, 0, 0, 0]


@pytest.mark.parametrize("seed", range(5))
def test_maxcut_brute_force(seed):
    g = WeightedGraph.random(9, seed=seed)
    brute = max(maxcut_value(g, c) for c in itertools.product([0, 1], repeat=9))
    val, cut = exhaustive_maxcut(g, chunk=37)
    assert val == brute
    assert cut[0] == 1 and maxcut_value(g, cut) == val


def test_maxcut_refuses_large():
    with pytest.raises(OracleRefused):
        exhaustive_maxcut(np.zeros((25, 25)))


# -- grid search -------------------------------------------------------------


def test_grid_peaks():
    val, arg = grid_search(lambda P: -peaks(P), [(-3, 3), (-3, 3)], 601)
    assert -val == pytest.approx(8.106214, abs=5e-3)
    np.testing.assert_allclose(arg, [0.0, 1.58], atol=0.02)


def test_grid_griewank_triangle():
    c = LinearConstraints(GRIEWANK_A, GRIEWANK_B)
    val, arg = grid_search(griewank, [(0, 8), (0, 4)], 801, constraints=c)
    assert val == pytest.approx(0.05685, abs=5e-3)
    assert np.all(c.A @ arg <= c.b + 1e-9)


def test_grid_constant_returns_first_point():
    val, arg = grid_search(lambda P: np.zeros(len(P)), [(-1, 1), (2, 3)], 5)
    assert val == 0 and arg.tolist() == [-1, 2]


def test_grid_scalar_objective():
    val, arg = grid_search(lambda p: float(np.sum((p - 0.25) ** 2)), [(0, 1)], 5,
                           vectorized=False)
    assert val == 0 and arg.tolist() == [0.25]


@pytest.mark.parametrize("k", [5, 11, 51])
def test_grid_refinement_never_worse(k):
    f = lambda P: np.sin(3 * P[:, 0]) * np.cos(2 * P[:, 1]) + 0.1 * P[:, 0]  # noqa: E731
    coarse, _ = grid_search(f, [(-2, 2), (-2, 2)], k)
    fine, _ = grid_search(f, [(-2, 2), (-2, 2)], 2 * k - 1)
    assert fine <= coarse


def test_grid_refuses():
    with pytest.raises(OracleRefused):
        grid_search(peaks, [(0, 1)] * 4, 3)
    with pytest.raises(OracleRefused):
        grid_search(peaks, [(0, 1)] * 3, 300)
    with pytest.raises(OracleRefused):
        grid_search(peaks, [(0, 1), (0, 1)], 5,
                    constraints=LinearConstraints([[1.0, 0.0]], [-1.0]))


# -- lasso -------------------------------------------------------------------


def test_soft_threshold():
    np.testing.assert_array_equal(soft_threshold(np.array([-3.0, -0.5, 0.5, 3.0]), 1.0),
                                  [-2.0, 0.0, 0.0, 2.0])


def test_cd_without_penalty_is_least_squares():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(40, 5)))
    X = Q * np.sqrt(40)
    Y = rng.normal(size=40)
    beta = lasso_coordinate_descent(LassoProblem(X, Y), 0.0)
    np.testing.assert_allclose(beta, np.linalg.lstsq(X, Y, rcond=None)[0], atol=1e-8)


def test_cd_zero_above_lambda_max():
    prob = make_lasso(0)
    lm = lambda_max(prob)
    assert np.all(lasso_coordinate_descent(prob, lm * (1 + 1e-9)) == 0)
    # at the boundary only rounding can leave a coefficient
    assert np.max(np.abs(lasso_coordinate_descent(prob, lm))) < 1e-12
    assert np.any(lasso_coordinate_descent(prob, 0.9 * lm) != 0)


def test_cd_history_monotone():
    prob = make_lasso(1)
    hist = []
    lasso_coordinate_descent(prob, 0.05, history=hist)
    assert len(hist) > 1
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_cd_kkt_conditions():
    prob = make_lasso(2)
    lam = 0.1
    beta = lasso_coordinate_descent(prob, lam, tol=1e-12)
    grad = prob.X.T @ (prob.Y - prob.X @ beta) / prob.Y.size
    active = beta != 0
    np.testing.assert_allclose(grad[active], lam * np.sign(beta[active]), atol=1e-8)
    assert np.all(np.abs(grad[~active]) <= lam + 1e-8)


def test_cd_non_convergence_reports_last_iterate():
    with pytest.raises(OracleConvergenceError) as info:
        lasso_coordinate_descent(make_lasso(0), 0.01, max_iter=1)
    assert info.value.last.shape == (60,)


def test_sparsity_lambda_support_size():
    prob = make_lasso(0)
    lam = sparsity_lambda(prob)
    beta = lasso_coordinate_descent(prob, lam)
    assert np.count_nonzero(beta) == 10
    assert 0 < lam < lambda_max(prob)


def test_cd_agrees_with_ce():
    prob = make_lasso(3, p=8, n_active=3, n=60, lam=0.05)
    beta = lasso_coordinate_descent(prob)
    res = optimize(lasso_objective, SamplingModel.build(mean=[0] * 8, sd=[5] * 8),
                   CeConfig(seed=0, N=1000, sd_thr=1e-6), args=(prob,), vectorized=True)
    assert res.optimum == pytest.approx(float(lasso_objective(beta, prob)), abs=1e-6)


# -- special functions and Dirichlet MLE -------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e4))
def test_digamma_trigamma_match_scipy(x):
    assert digamma(x) == pytest.approx(special.digamma(x), rel=1e-10, abs=1e-12)
    assert trigamma(x) == pytest.approx(special.polygamma(1, x), rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-2, 1e3))
def test_inv_digamma_roundtrip(x):
    assert inv_digamma(digamma(x)) == pytest.approx(x, rel=1e-9)


def test_dirichlet_mle_flat():
    data = make_dirichlet(0, alpha=(1, 1, 1), n=100_000)
    np.testing.assert_allclose(dirichlet_fixed_point_mle(data), 1.0, atol=0.05)


def test_dirichlet_mle_symmetric_data():
    base = make_dirichlet(1, alpha=(2, 2), n=200)[:, 0]
    data = np.concatenate([base, 1 - base])[:, None]
    alpha = dirichlet_fixed_point_mle(data)
    assert alpha[0] == pytest.approx(alpha[1], rel=1e-8)


def test_dirichlet_mle_is_stationary():
    data = make_dirichlet(3)
    alpha = dirichlet_fixed_point_mle(data)
    res = sopt.minimize(lambda a: -dirichlet_loglik(a, data), alpha, method="Nelder-Mead",
                        options={"xatol": 1e-10, "fatol": 1e-12})
    assert -res.fun <= dirichlet_loglik(alpha, data) + 1e-6


def test_dirichlet_mle_agrees_with_ce():
    data = make_dirichlet(4)
    alpha = dirichlet_fixed_point_mle(data)
    res = optimize(dirichlet_loglik, SamplingModel.build(mean=[0] * 5, sd=[10] * 5),
                   CeConfig(seed=4, N=10_000, smooth_sd=0.5, maximize=True),
                   LinearConstraints(-np.eye(5), np.zeros(5)), args=(data,), vectorized=True)
    assert res.optimum == pytest.approx(dirichlet_loglik(alpha, data), abs=0.1)


# -- regime ------------------------------------------------------------------


def test_regime_exhaustive_matches_bounded_least_squares():
    series = make_regime(0, r=(8, 17), length=30)
    x = series.x
    x_prev = np.concatenate([[0.0], x[:-1]])
    best = (np.inf, None, None)
    for r1, r2 in itertools.combinations(range(1, 29), 2):
        steps = np.arange(1, 31)
        D = np.column_stack([(steps <= r1) * x_prev, ((steps > r1) & (steps <= r2)) * x_prev,
                             (steps > r2) * x_prev])
        fit = sopt.lsq_linear(D, x, bounds=(-1, 1), tol=1e-12)
        sse = float(np.sum((x - D @ fit.x) ** 2))
        if sse < best[0] - 1e-12:
            best = (sse, fit.x, (r1, r2))
    sse, theta, r = regime_exhaustive(x, n_categories=28)
    assert sse == pytest.approx(best[0], abs=1e-9)
    assert r == best[2]
    assert regime_sse(theta, np.array(r) - 1, x) == pytest.approx(sse, abs=1e-9)


def test_regime_exhaustive_clips_theta():
    x = np.array([1.0, 3.0, 9.0, 27.0, 81.0, 0.1])
    _, theta, _ = regime_exhaustive(x, n_categories=4)
    assert np.all(np.abs(theta) <= 1.0)
