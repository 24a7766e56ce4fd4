"""Deterministic reference solvers used to check CE results.

Nothing here uses random numbers.  These are the independent side of the
comparisons run by the test-suite and by ``ceopt run --verify``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .benchmarks import LassoProblem, lasso_objective, maxcut_value
from .constraints import LinearConstraints, is_feasible


class OracleRefused(ValueError):
    """The instance is too large for an exhaustive method."""


class OracleConvergenceError(RuntimeError):
    """An iterative oracle did not converge; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


@dataclass
class OracleReport:
    oracle_value: float
    oracle_arg: Any
    agrees: bool
    gap: float
    tolerance: float

    def to_dict(self) -> dict:
        arg = self.oracle_arg
        if isinstance(arg, np.ndarray):
            arg = arg.tolist()
        return {
            "oracleValue": self.oracle_value,
            "oracleArg": arg,
            "agrees": self.agrees,
            "gap": self.gap,
            "tolerance": self.tolerance,
        }


def compare(ce_value: float, oracle_value: float, oracle_arg, tol: float,
            maximize: bool = False) -> OracleReport:
    """Signed gap in the minimization sense; agreement iff ``gap <= tol``."""
    gap = (oracle_value - ce_value) if maximize else (ce_value - oracle_value)
    return OracleReport(float(oracle_value), oracle_arg, bool(gap <= tol), float(gap), tol)


# ---------------------------------------------------------------------------
# max-cut


MAXCUT_MAX_NODES = 24


def exhaustive_maxcut(graph, chunk: int = 1 << 16):
    """Best cut over all ``2^(n-1)`` cut vectors with node 0 on side 1.

    Returns ``(value, cut)``; ties go to the first cut in binary order of
    nodes ``1..n-1``.
    """
    C = graph.C if hasattr(graph, "C") else np.asarray(graph, dtype=float)
    n = C.shape[0]
    if n > MAXCUT_MAX_NODES:
        raise OracleRefused(f"exhaustive max-cut limited to {MAXCUT_MAX_NODES} nodes, got {n}")
    if n == 1:
        return 0.0, np.array([1])
    total = 1 << (n - 1)
    shifts = np.arange(n - 1)
    best_val, best_cut = -np.inf, None
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        bits = (codes[:, None] >> shifts) & 1
        cuts = np.hstack([np.ones((codes.size, 1), dtype=int), bits])
        vals = maxcut_value(C, cuts)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_cut = float(vals[k]), cuts[k]
    return best_val, best_cut


# ---------------------------------------------------------------------------
# lattice search


GRID_BUDGET = 10_000_000


def grid_search(
    objective: Callable,
    box: Sequence[tuple[float, float]],
    points_per_dim: int,
    constraints: Optional[LinearConstraints] = None,
    vectorized: bool = True,
):
    """Exact minimum of ``objective`` over a regular lattice on ``box``.

    Lattice points outside ``constraints`` (if given) are skipped.  Returns
    ``(value, point)``; on ties the first point in C order wins.
    """
    d = len(box)
    if d > 3:
        raise OracleRefused("grid search supports at most 3 dimensions")
    if points_per_dim > 2001 or points_per_dim ** d > GRID_BUDGET:
        raise OracleRefused(f"lattice of {points_per_dim}^{d} points exceeds the budget")
    axes = [np.linspace(lo, hi, points_per_dim) for lo, hi in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    if constraints is not None:
        pts = pts[is_feasible(constraints, pts, 1e-12)]
        if pts.shape[0] == 0:
            raise OracleRefused("no lattice point satisfies the constraints")
    if vectorized:
        vals = np.asarray(objective(pts), dtype=float)
    else:
        vals = np.array([objective(p) for p in pts], dtype=float)
    k = int(np.argmin(vals))
    return float(vals[k]), pts[k]


# ---------------------------------------------------------------------------
# lasso


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_coordinate_descent(
    prob: LassoProblem,
    lam: Optional[float] = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    beta0=None,
    history: Optional[list] = None,
) -> np.ndarray:
    """Cyclic coordinate descent with soft-thresholding.

    Minimizes ``||Y - X beta||^2/(2n) + lam*||beta||_1`` (no intercept, no
    standardization).  Stops when no coordinate moves by more than
    ``tol`` in a sweep.  If ``history`` is a list, the objective value
    after every sweep is appended to it.
    """
    lam = prob.lam if lam is None else lam
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X, Y = prob.X, prob.Y
    n, p = X.shape
    col_sq = np.einsum("ij,ij->j", X, X) / n
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    resid = Y - X @ beta
    for _ in range(max_iter):
        max_step = 0.0
        for j in range(p):
            if col_sq[j] == 0:
                continue
            old = beta[j]
            rho = X[:, j] @ resid / n + col_sq[j] * old
            new = soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                resid -= X[:, j] * (new - old)
                beta[j] = new
                max_step = max(max_step, abs(new - old))
        if history is not None:
            history.append(float(lasso_objective(beta, prob, lam)))
        if max_step < tol:
            return beta
    raise OracleConvergenceError(f"coordinate descent did not converge in {max_iter} sweeps", beta)


def lambda_max(prob: LassoProblem) -> float:
    """Smallest ``lam`` at which the lasso solution is identically zero."""
    return float(np.max(np.abs(prob.X.T @ prob.Y)) / prob.X.shape[0])


def sparsity_lambda(prob: LassoProblem, k: int = 10, n_lambda: int = 100,
                    ratio: float = 1e-4, tol: float = 1e-10) -> float:
    """First ``lam`` on a decreasing geometric path whose solution has ``k`` non-zeros.

    The path runs from :func:`lambda_max` down to ``ratio`` times it with
    warm starts.  If the path jumps over ``k``, the bracketing interval is
    bisected.
    """
    lams = lambda_max(prob) * np.geomspace(1.0, ratio, n_lambda)
    beta = None
    prev_lam, prev_beta = None, None
    for lam in lams:
        beta = lasso_coordinate_descent(prob, lam, tol, beta0=beta)
        df = int(np.count_nonzero(beta))
        if df == k:
            return float(lam)
        if df > k and prev_lam is not None:
            hi, lo = prev_lam, lam
            for _ in range(100):
                mid = math.sqrt(hi * lo)
                b_mid = lasso_coordinate_descent(prob, mid, tol, beta0=prev_beta)
                m = int(np.count_nonzero(b_mid))
                if m == k:
                    return float(mid)
                hi, lo = (mid, lo) if m < k else (hi, mid)
            break
        prev_lam, prev_beta = lam, beta.copy()
    raise OracleConvergenceError(f"no lambda on the path gives exactly {k} non-zeros")


# ---------------------------------------------------------------------------
# digamma and Dirichlet MLE

_EULER = 0.5772156649015329


def digamma(x):
    """psi(x) for x > 0: shift above 6 by recurrence, then the asymptotic series."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    z = x.copy()
    small = z < 6
    while np.any(small):
        acc = np.where(small, acc - 1.0 / z, acc)
        z = np.where(small, z + 1.0, z)
        small = z < 6
    w = 1.0 / (z * z)
    series = w * (1/12 - w * (1/120 - w * (1/252 - w * (1/240 - w * (1/132 - w * 691/32760)))))
    out = acc + np.log(z) - 0.5 / z - series
    return out if out.ndim else float(out)


def trigamma(x):
    """psi'(x) for x > 0, same shift-and-expand scheme as :func:`digamma`."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    z = x.copy()
    small = z < 6
    while np.any(small):
        acc = np.where(small, acc + 1.0 / (z * z), acc)
        z = np.where(small, z + 1.0, z)
        small = z < 6
    w = 1.0 / (z * z)
    series = (1/6 - w * (1/30 - w * (1/42 - w * (1/30 - w * 5/66)))) / (z * z * z)
    out = acc + 1.0 / z + 0.5 / (z * z) + series
    return out if out.ndim else float(out)


def inv_digamma(y, iters: int = 8):
    """Solve ``psi(x) = y`` by Newton's method from Minka's starting point."""
    y = np.asarray(y, dtype=float)
    x = np.where(y >= -2.22, np.exp(y) + 0.5, -1.0 / (y + _EULER))
    for _ in range(iters):
        x = x - (digamma(x) - y) / trigamma(x)
    return x if x.ndim else float(x)


def dirichlet_fixed_point_mle(data, tol: float = 1e-10, max_iter: int = 100_000,
                              alpha0=None) -> np.ndarray:
    """Maximum-likelihood Dirichlet parameters by fixed-point iteration.

    ``data`` is ``n x K`` with rows strictly inside the simplex; the
    implied last coordinate gives ``K + 1`` parameters.  Each step sets
    ``alpha_k = psi^{-1}(psi(sum(alpha)) + mean(log y_k))``.
    """
    data = np.asarray(data, dtype=float)
    logs = np.column_stack([np.log(data), np.log1p(-data.sum(axis=1))])
    mean_log = logs.mean(axis=0)
    if alpha0 is None:
        # moment-matching start
        full = np.exp(logs)
        m = full.mean(axis=0)
        v = full[:, 0].var()
        s = m[0] * (1 - m[0]) / v - 1 if v > 0 else 1.0
        alpha = m * max(s, 1e-3)
    else:
        alpha = np.array(alpha0, dtype=float)
    for _ in range(max_iter):
        new = inv_digamma(digamma(alpha.sum()) + mean_log)
        if np.max(np.abs(new - alpha)) < tol:
            return new
        alpha = new
    raise OracleConvergenceError("Dirichlet fixed-point iteration did not converge", alpha)


# ---------------------------------------------------------------------------
# regime-switching AR(1)


def regime_exhaustive(x, n_categories: int = 298, theta_bound: float = 1.0):
    """Global least-squares fit of the three-regime AR(1) model.

    Enumerates every pair of change points ``r1 < r2`` with ``r - 1`` in
    ``0..n_categories-1``; for fixed change points each coefficient is
    the one-dimensional least-squares slope clipped to
    ``[-theta_bound, theta_bound]``.  Returns ``(sse, theta, r)``.
    """
    x = np.asarray(x, dtype=float)
    x_prev = np.concatenate([[0.0], x[:-1]])
    # prefix sums over steps 1..i
    cxx = np.concatenate([[0.0], np.cumsum(x * x)])
    cxp = np.concatenate([[0.0], np.cumsum(x * x_prev)])
    cpp = np.concatenate([[0.0], np.cumsum(x_prev * x_prev)])
    T = x.size

    def segment(lo, hi):
        # steps lo+1..hi
        sxx = cxx[hi] - cxx[lo]
        sxp = cxp[hi] - cxp[lo]
        spp = cpp[hi] - cpp[lo]
        with np.errstate(divide="ignore", invalid="ignore"):
            th = np.where(spp > 0, sxp / spp, 0.0)
        th = np.clip(th, -theta_bound, theta_bound)
        return sxx - 2 * th * sxp + th * th * spp, th

    r = np.arange(1, n_categories + 1)
    r1, r2 = np.meshgrid(r, r, indexing="ij")
    keep = r1 < r2
    r1, r2 = r1[keep], r2[keep]
    s1, t1 = segment(np.zeros_like(r1), r1)
    s2, t2 = segment(r1, r2)
    s3, t3 = segment(r2, np.full_like(r2, T))
    sse = s1 + s2 + s3
    k = int(np.argmin(sse))
    return float(sse[k]), np.array([t1[k], t2[k], t3[k]]), (int(r1[k]), int(r2[k]))


# ---------------------------------------------------------------------------
# FitzHugh-Nagumo


def fitzhugh_least_squares(data, x0, substeps: int = 5):
    """Local least-squares fit of the FitzHugh-Nagumo parameters from ``x0``.

    A trust-region solve (scipy) started at a known good point, e.g. the
    generating parameters of synthetic data.  Returns ``(sse, params)``.
    """
    from scipy.optimize import least_squares

    from .benchmarks import rk4_solve

    def resid(p):
        r = data.y - rk4_solve(p, data.times, substeps)
        return np.where(np.isfinite(r), r, 1e6)

    fit = least_squares(resid, np.asarray(x0, dtype=float), xtol=1e-12, ftol=1e-12, gtol=1e-12)
    return float(np.sum(resid(fit.x) ** 2)), fit.x
