"""Test problems: objective functions, their data, and data generators.

Every objective accepts either one point or a batch of points stacked
along the leading axis (so it can be passed to ``optimize`` with
``vectorized=True``) and is a pure function of its inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import gammaln

TIME_STEP = 0.05


# ---------------------------------------------------------------------------
# closed-form test functions


def peaks(x):
    """The two-dimensional peaks surface (global max ~8.106 near (-0.009, 1.581))."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    return (
        3 * (1 - x1) ** 2 * np.exp(-(x1**2) - (x2 + 1) ** 2)
        - 10 * (x1 / 5 - x1**3 - x2**5) * np.exp(-(x1**2) - x2**2)
        - np.exp(-((x1 + 1) ** 2) - x2**2) / 3
    )


def griewank(x):
    """``1 + sum(x_i^2)/4000 - prod(cos(x_i / sqrt(i)))``."""
    x = np.asarray(x, dtype=float)
    i = np.arange(1, x.shape[-1] + 1)
    return 1 + np.sum(x**2, axis=-1) / 4000 - np.prod(np.cos(x / np.sqrt(i)), axis=-1)


# Triangle with vertices (0, 4), (4, 0), (8, 4).
GRIEWANK_A = np.array([[0.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
GRIEWANK_B = np.array([4.0, -4.0, 4.0])


# ---------------------------------------------------------------------------
# max-cut


@dataclass(frozen=True)
class WeightedGraph:
    """Dense non-negative weight matrix with a zero diagonal."""

    C: np.ndarray

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("weight matrix must be square")
        if np.any(C < 0) or not np.all(np.isfinite(C)):
            raise ValueError("weights must be finite and non-negative")
        if np.any(np.diag(C) != 0):
            raise ValueError("weight matrix must have a zero diagonal")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @classmethod
    def load(cls, path) -> "WeightedGraph":
        """Read the text format: first token ``n``, then ``n*n`` weights."""
        tokens = Path(path).read_text().split()
        if not tokens:
            raise ValueError(f"{path}: empty graph file")
        n = int(tokens[0])
        if len(tokens) != 1 + n * n:
            raise ValueError(f"{path}: expected {n * n} weights after n={n}, got {len(tokens) - 1}")
        return cls(np.array(tokens[1:], dtype=float).reshape(n, n))

    def save(self, path) -> None:
        lines = [str(self.n)]
        lines += [" ".join(repr(float(w)) for w in row) for row in self.C]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def random(cls, n: int, seed=None, max_weight: int = 10) -> "WeightedGraph":
        """Symmetric graph with integer weights uniform on ``0..max_weight``."""
        rng = np.random.default_rng(seed)
        W = np.triu(rng.integers(0, max_weight + 1, size=(n, n)), 1).astype(float)
        return cls(W + W.T)


def maxcut_value(graph, cut):
    """Total weight ``sum C_ij`` over ``i`` with ``cut_i = 1`` and ``j`` with ``cut_j = 0``.

    Only one direction is summed; for a symmetric matrix this is the
    usual undirected cut weight.
    """
    C = graph.C if isinstance(graph, WeightedGraph) else np.asarray(graph, dtype=float)
    x = np.asarray(cut, dtype=float)
    return np.einsum("...i,ij,...j->...", x, C, 1.0 - x)


# ---------------------------------------------------------------------------
# FitzHugh-Nagumo


@dataclass(frozen=True)
class FitzHughParams:
    a: float
    b: float
    c: float
    V0: float
    R0: float

    def __post_init__(self):
        if self.c == 0:
            raise ValueError("c must be non-zero")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.V0, self.R0])


FITZHUGH_TRUE = FitzHughParams(a=0.2, b=0.2, c=3.0, V0=-1.0, R0=1.0)


@dataclass(frozen=True)
class RegressionDataset:
    times: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if times.shape != y.shape or times.ndim != 1:
            raise ValueError("times and y must be vectors of equal length")
        steps = np.diff(times)
        if times.size > 1 and not np.allclose(steps, steps[0], rtol=0, atol=1e-9):
            raise ValueError("observation times must be uniformly spaced")
        if times.size > 1 and steps[0] <= 0:
            raise ValueError("observation times must be increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "y", y)


def fitzhugh_times(t_end: float = 20.0, step: float = TIME_STEP) -> np.ndarray:
    return np.round(np.arange(0, round(t_end / step) + 1) * step, 12)


def rk4_solve(params, times, substeps: int = 5) -> np.ndarray:
    """Integrate the FitzHugh-Nagumo system with classic fixed-step RK4.

    ``params`` is a :class:`FitzHughParams` or an array ``(..., 5)`` of
    ``(a, b, c, V0, R0)``; a batch is integrated in lock step.  Returns
    ``V`` at every entry of ``times`` (which must be uniformly spaced and
    start at 0), shape ``(..., len(times))``.  Trajectories that blow up
    come back with non-finite entries.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if isinstance(params, FitzHughParams):
        params = params.as_array()
    p = np.asarray(params, dtype=float)
    times = np.asarray(times, dtype=float)
    a, b, c, V, R = (p[..., k] for k in range(5))
    dt = (times[1] - times[0]) if times.size > 1 else TIME_STEP
    h = dt / substeps
    out = np.empty(V.shape + (times.size,))
    out[..., 0] = V

    def rhs(V, R):
        return c * (V - V**3 / 3 + R), -(V - a + b * R) / c

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, times.size):
            for _ in range(substeps):
                k1v, k1r = rhs(V, R)
                k2v, k2r = rhs(V + 0.5 * h * k1v, R + 0.5 * h * k1r)
                k3v, k3r = rhs(V + 0.5 * h * k2v, R + 0.5 * h * k2r)
                k4v, k4r = rhs(V + h * k3v, R + h * k3r)
                V = V + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
                R = R + h / 6 * (k1r + 2 * k2r + 2 * k3r + k4r)
            out[..., k] = V
    return out


def fitzhugh_sse(x, data: RegressionDataset, substeps: int = 5):
    """Least-squares misfit of the simulated ``V`` curve; ``inf`` on blow-up."""
    V = rk4_solve(x, data.times, substeps)
    with np.errstate(over="ignore", invalid="ignore"):
        sse = np.sum((data.y - V) ** 2, axis=-1)
    return np.where(np.isfinite(sse), sse, np.inf)


# ---------------------------------------------------------------------------
# Dirichlet


def dirichlet_loglik(alpha, data):
    """Log-likelihood of ``alpha`` (length ``K+1``) for ``n x K`` simplex data.

    The last coordinate of every observation is implied, ``1 - sum(y)``.
    Returns ``-inf`` wherever some ``alpha_i <= 0``.
    """
    alpha = np.asarray(alpha, dtype=float)
    data = np.asarray(data, dtype=float)
    n, K = data.shape
    if alpha.shape[-1] != K + 1:
        raise ValueError(f"alpha needs {K + 1} entries for {K}-column data")
    logs = np.column_stack([np.log(data), np.log1p(-data.sum(axis=1))])
    suff = logs.sum(axis=0)
    valid = np.all(alpha > 0, axis=-1)
    safe = np.where(alpha > 0, alpha, 1.0)
    ll = n * (gammaln(safe.sum(axis=-1)) - gammaln(safe).sum(axis=-1)) + (safe - 1) @ suff
    out = np.where(valid, ll, -np.inf)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# lasso


@dataclass(frozen=True)
class LassoProblem:
    X: np.ndarray
    Y: np.ndarray
    lam: float = 0.0
    beta_true: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float)
        if Y.shape != (X.shape[0],):
            raise ValueError("Y must have one entry per row of X")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)


def lasso_objective(beta, prob: LassoProblem, lam: Optional[float] = None):
    """``||Y - X beta||^2 / (2n) + lam * ||beta||_1``."""
    lam = prob.lam if lam is None else lam
    beta = np.asarray(beta, dtype=float)
    resid = prob.Y - beta @ prob.X.T
    return 0.5 * np.mean(resid**2, axis=-1) + lam * np.sum(np.abs(beta), axis=-1)


# ---------------------------------------------------------------------------
# regime-switching AR(1)


@dataclass(frozen=True)
class RegimeSeries:
    """Observed increments ``x_1..x_T`` (``x_0 = 0`` is implicit)."""

    x: np.ndarray
    theta: Optional[np.ndarray] = None
    r: Optional[tuple] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))


def regime_sse(theta, r_minus1, series):
    """Sum of squared one-step AR(1) residuals with two change points.

    ``r_minus1`` holds the change points minus one, in either order.
    Coefficient ``theta[0]`` applies to steps ``1..r1``, ``theta[1]`` to
    ``r1+1..r2`` and ``theta[2]`` afterwards.  Returns ``inf`` when the
    two change points coincide.  Batches of ``theta`` ``(m, 3)`` and
    ``r_minus1`` ``(m, 2)`` give ``m`` values.
    """
    x = series.x if isinstance(series, RegimeSeries) else np.asarray(series, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r = np.sort(np.asarray(r_minus1), axis=-1) + 1
    r1, r2 = r[..., :1], r[..., 1:2]
    steps = np.arange(1, x.size + 1)
    coef = np.where(
        steps <= r1, theta[..., :1], np.where(steps <= r2, theta[..., 1:2], theta[..., 2:3])
    )
    x_prev = np.concatenate([[0.0], x[:-1]])
    sse = np.sum((x - coef * x_prev) ** 2, axis=-1)
    out = np.where(r[..., 0] == r[..., 1], np.inf, sse)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# synthetic data


def make_fitzhugh(seed=None, params: FitzHughParams = FITZHUGH_TRUE, noise_sd: float = 0.5,
                  substeps: int = 5) -> RegressionDataset:
    times = fitzhugh_times()
    rng = np.random.default_rng(seed)
    V = rk4_solve(params, times, substeps)
    return RegressionDataset(times, V + noise_sd * rng.standard_normal(times.size))


def make_lasso(seed=None, n: int = 150, p: int = 60, n_active: int = 10,
               noise_sd: float = 1.0, lam: float = 0.0) -> LassoProblem:
    rng = np.random.default_rng(seed)
    beta = np.concatenate([rng.uniform(0.5, 1.0, n_active), np.zeros(p - n_active)])
    X = rng.standard_normal((n, p))
    Y = X @ beta + noise_sd * rng.standard_normal(n)
    return LassoProblem(X, Y, lam, beta)


def make_regime(seed=None, theta=(0.3, 0.9, -0.9), r=(100, 200), sigma: float = 0.1,
                length: int = 300) -> RegimeSeries:
    rng = np.random.default_rng(seed)
    theta = np.asarray(theta, dtype=float)
    eps = sigma * rng.standard_normal(length)
    x = np.empty(length)
    prev = 0.0
    for i in range(1, length + 1):
        th = theta[0] if i <= r[0] else theta[1] if i <= r[1] else theta[2]
        prev = th * prev + eps[i - 1]
        x[i - 1] = prev
    return RegimeSeries(x, theta, tuple(r), sigma)


def make_dirichlet(seed=None, alpha=(1, 2, 3, 4, 5), n: int = 100) -> np.ndarray:
    """``n`` draws from Dirichlet(alpha) via normalized gammas; last column dropped."""
    rng = np.random.default_rng(seed)
    g = rng.standard_gamma(np.asarray(alpha, dtype=float), size=(n, len(alpha)))
    return (g / g.sum(axis=1, keepdims=True))[:, :-1]


def generate_synthetic(kind: str, seed=None, **params):
    """Dispatch to the generator for ``kind`` in fitzhugh/lasso/regime/dirichlet."""
    makers = {
        "fitzhugh": make_fitzhugh,
        "lasso": make_lasso,
        "regime": make_regime,
        "dirichlet": make_dirichlet,
    }
    if kind not in makers:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {sorted(makers)}")
    return makers[kind](seed, **params)


# ---------------------------------------------------------------------------
# CSV dumps


def write_csv(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))
