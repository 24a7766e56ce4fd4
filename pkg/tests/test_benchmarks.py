import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ceopt.benchmarks import (
    FITZHUGH_TRUE,
    LassoProblem,
    RegimeSeries,
    RegressionDataset,
    WeightedGraph,
    dirichlet_loglik,
    fitzhugh_sse,
    fitzhugh_times,
    generate_synthetic,
    griewank,
    lasso_objective,
    make_dirichlet,
    make_fitzhugh,
    make_lasso,
    make_regime,
    maxcut_value,
    peaks,
    read_csv,
    regime_sse,
    rk4_solve,
    write_csv,
)


# -- test functions ----------------------------------------------------------


def test_peaks_reference_values():
    # 50-digit reference
    assert peaks([0.0, 0.0]) == pytest.approx(0.98101184312384619, abs=1e-12)
    assert peaks([-0.0093, 1.5814]) == pytest.approx(8.1062, abs=1e-3)


def test_peaks_batch():
    pts = np.random.default_rng(0).normal(size=(20, 2))
    np.testing.assert_allclose(peaks(pts), [peaks(p) for p in pts])


def test_griewank_reference_values():
    assert griewank([0.0, 0.0]) == 0.0
    assert griewank([math.pi, 0.0]) == pytest.approx(2.00246740110027234, abs=1e-12)
    assert griewank([3.139669, 3.991955]) == pytest.approx(0.0568548391, abs=1e-9)


# -- max-cut -----------------------------------------------------------------


def test_uniform_cut_is_zero():
    g = WeightedGraph.random(8, seed=0)
    assert maxcut_value(g, np.ones(8)) == 0
    assert maxcut_value(g, np.zeros(8)) == 0


def test_two_node_cut():
    g = WeightedGraph(np.array([[0, 3], [3, 0]]))
    assert maxcut_value(g, [0, 1]) == 3
    assert maxcut_value(g, [1, 0]) == 3


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32))
def test_cut_symmetry_and_loop(n, seed):
    g = WeightedGraph.random(n, seed=seed)
    x = np.random.default_rng(seed).integers(0, 2, n)
    v = maxcut_value(g, x)
    assert v == maxcut_value(g, 1 - x)
    naive = sum(g.C[i, j] for i in range(n) for j in range(n) if x[i] == 1 and x[j] == 0)
    assert v == naive


def test_random_graph_shape():
    g = WeightedGraph.random(12, seed=3)
    assert np.array_equal(g.C, g.C.T)
    assert np.all(np.diag(g.C) == 0)
    assert np.all(g.C == np.round(g.C)) and g.C.min() >= 0


def test_graph_roundtrip(tmp_path):
    g = WeightedGraph.random(6, seed=1)
    g.save(tmp_path / "g.txt")
    h = WeightedGraph.load(tmp_path / "g.txt")
    np.testing.assert_array_equal(g.C, h.C)


def test_graph_validation():
    with pytest.raises(ValueError):
        WeightedGraph(np.array([[0, -1], [2, 0]]))
    with pytest.raises(ValueError):
        WeightedGraph(np.ones((2, 3)))
    with pytest.raises(ValueError):
        WeightedGraph(np.ones((2, 2)))


# -- FitzHugh-Nagumo ---------------------------------------------------------


def test_times_grid():
    t = fitzhugh_times()
    assert t.size == 401 and t[0] == 0 and t[-1] == 20


def test_rk4_substep_convergence():
    t = fitzhugh_times()
    coarse = rk4_solve(FITZHUGH_TRUE, t, 5)
    fine = rk4_solve(FITZHUGH_TRUE, t, 50)
    assert np.max(np.abs(coarse - fine)) < 1e-4


def test_rk4_fourth_order():
    t = fitzhugh_times(5.0, 0.5)
    ref = rk4_solve(FITZHUGH_TRUE, t, 400)
    e1 = np.max(np.abs(rk4_solve(FITZHUGH_TRUE, t, 10) - ref))
    e2 = np.max(np.abs(rk4_solve(FITZHUGH_TRUE, t, 20) - ref))
    assert 8 <= e1 / e2 <= 32


def test_rk4_fixed_point():
    # V = a = 0, R = 0 with b = 0 is an equilibrium
    v = rk4_solve(np.array([0.0, 0.0, 3.0, 0.0, 0.0]), fitzhugh_times())
    assert np.all(v == 0)


def test_rk4_batch_matches_single():
    p = np.array([FITZHUGH_TRUE.as_array(), [0.1, 0.3, 2.5, -0.5, 0.5]])
    t = fitzhugh_times()
    batch = rk4_solve(p, t)
    np.testing.assert_allclose(batch[1], rk4_solve(p[1], t), rtol=0, atol=1e-14)


def test_sse_zero_at_truth_without_noise():
    d = make_fitzhugh(0, noise_sd=0.0)
    assert fitzhugh_sse(FITZHUGH_TRUE.as_array(), d) == 0.0


def test_sse_scale_with_noise():
    d = make_fitzhugh(0)
    assert fitzhugh_sse(FITZHUGH_TRUE.as_array(), d) / 401 == pytest.approx(0.25, rel=0.2)


def test_sse_blowup_is_inf():
    d = make_fitzhugh(0)
    assert fitzhugh_sse([0, 0, 50, 40, 40], d) == np.inf


def test_dataset_validation():
    with pytest.raises(ValueError):
        RegressionDataset([0, 1, 3], [0, 0, 0])


# -- Dirichlet ---------------------------------------------------------------


def _loglik_loop(alpha, data):
    total = 0.0
    for row in data:
        y = list(row) + [1 - sum(row)]
        total += math.lgamma(sum(alpha)) - sum(math.lgamma(a) for a in alpha)
        total += sum((a - 1) * math.log(v) for a, v in zip(alpha, y))
    return total


def test_loglik_flat_alpha():
    data = make_dirichlet(0, n=30)
    assert dirichlet_loglik(np.ones(5), data) == pytest.approx(30 * math.lgamma(5), abs=1e-10)


def test_loglik_matches_loop():
    data = make_dirichlet(1, n=50)
    for alpha in ([1, 2, 3, 4, 5], [0.3, 7.0, 1.1, 2.2, 0.9]):
        assert dirichlet_loglik(alpha, data) == pytest.approx(_loglik_loop(alpha, data), abs=1e-8)


def test_loglik_invalid_alpha():
    data = make_dirichlet(0, n=5)
    assert dirichlet_loglik([1, 2, 0, 4, 5], data) == -np.inf
    out = dirichlet_loglik(np.array([[1, 2, 3, 4, 5], [1, -2, 3, 4, 5]]), data)
    assert np.isfinite(out[0]) and out[1] == -np.inf


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_loglik_concave_along_lines(seed):
    rng = np.random.default_rng(seed)
    data = make_dirichlet(seed % 1000, n=40)
    a, b = rng.uniform(0.2, 10, 5), rng.uniform(0.2, 10, 5)
    mid = dirichlet_loglik((a + b) / 2, data)
    assert mid >= (dirichlet_loglik(a, data) + dirichlet_loglik(b, data)) / 2 - 1e-8


def test_dirichlet_generator_moments():
    data = make_dirichlet(2, n=100_000)
    alpha = np.arange(1, 6)
    m = alpha[:4] / 15
    se = np.sqrt(m * (1 - m) / 16 / data.shape[0])
    assert np.all(np.abs(data.mean(axis=0) - m) <= 3 * se)
    assert np.all((data > 0) & (data.sum(axis=1, keepdims=True) < 1))


# -- lasso -------------------------------------------------------------------


def test_lasso_objective_at_zero():
    prob = make_lasso(0, lam=0.3)
    assert lasso_objective(np.zeros(60), prob) == pytest.approx(np.sum(prob.Y**2) / 300)


def test_lasso_objective_loop():
    prob = make_lasso(1, lam=0.05)
    beta = np.random.default_rng(2).normal(size=60)
    n = prob.Y.size
    sse = sum((prob.Y[i] - sum(prob.X[i, j] * beta[j] for j in range(60))) ** 2 for i in range(n))
    want = sse / (2 * n) + 0.05 * sum(abs(v) for v in beta)
    assert lasso_objective(beta, prob) == pytest.approx(want, rel=1e-12)
    batch = lasso_objective(np.stack([beta, beta]), prob)
    np.testing.assert_allclose(batch, want, rtol=1e-12)


def test_lasso_generator():
    prob = make_lasso(0)
    assert prob.X.shape == (150, 60)
    assert np.all((prob.beta_true[:10] >= 0.5) & (prob.beta_true[:10] <= 1))
    assert np.count_nonzero(prob.beta_true[10:]) == 0


def test_lasso_validation():
    with pytest.raises(ValueError):
        LassoProblem(np.ones((3, 2)), np.ones(4))
    with pytest.raises(ValueError):
        LassoProblem(np.ones((3, 2)), np.ones(3), lam=-1)


# -- regime switching --------------------------------------------------------


def _regime_loop(theta, rm1, x):
    r1, r2 = sorted(v + 1 for v in rm1)
    total, prev = 0.0, 0.0
    for i, xi in enumerate(x, start=1):
        th = theta[0] if i <= r1 else theta[1] if i <= r2 else theta[2]
        total += (xi - th * prev) ** 2
        prev = xi
    return total


def test_regime_equal_change_points_is_inf():
    s = make_regime(0)
    assert regime_sse([0.1, 0.2, 0.3], [50, 50], s) == np.inf


def test_regime_zero_theta():
    s = make_regime(0)
    assert regime_sse([0, 0, 0], [99, 199], s) == pytest.approx(np.sum(s.x**2))


def test_regime_noiseless_truth_is_zero():
    s = make_regime(0, sigma=0.0)
    assert regime_sse([0.3, 0.9, -0.9], [99, 199], s) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 297), st.integers(0, 297), st.integers(0, 2**32))
def test_regime_matches_loop_and_is_order_free(a, b, seed):
    s = make_regime(seed % 50)
    theta = np.random.default_rng(seed).uniform(-1, 1, 3)
    v = regime_sse(theta, [a, b], s)
    assert v == regime_sse(theta, [b, a], s)
    if a != b:
        assert v == pytest.approx(_regime_loop(theta, [a, b], s.x), rel=1e-12)


def test_regime_batch():
    s = make_regime(1)
    th = np.random.default_rng(0).uniform(-1, 1, (5, 3))
    r = np.array([[10, 20], [100, 5], [7, 7], [0, 297], [150, 151]])
    got = regime_sse(th, r, s)
    assert got[2] == np.inf
    for k in (0, 1, 3, 4):
        assert got[k] == pytest.approx(regime_sse(th[k], r[k], s))


def test_regime_generator():
    s = make_regime(3)
    assert s.x.size == 300 and s.r == (100, 200)
    assert isinstance(s, RegimeSeries)


# -- generators and files ----------------------------------------------------


def test_generate_synthetic_dispatch():
    a = generate_synthetic("lasso", 5)
    b = make_lasso(5)
    np.testing.assert_array_equal(a.X, b.X)
    with pytest.raises(ValueError):
        generate_synthetic("nope", 0)


def test_generators_are_seeded():
    np.testing.assert_array_equal(make_fitzhugh(4).y, make_fitzhugh(4).y)
    assert not np.array_equal(make_fitzhugh(4).y, make_fitzhugh(5).y)


def test_csv_roundtrip(tmp_path):
    x = np.random.default_rng(0).normal(size=(7, 3))
    write_csv(tmp_path / "d.csv", ["a", "b", "c"], list(x.T))
    header, arr = read_csv(tmp_path / "d.csv")
    assert header == ["a", "b", "c"]
    np.testing.assert_array_equal(arr, x)
