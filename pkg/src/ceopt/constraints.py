"""Linear inequality constraint sets ``A x <= b`` and penalty wrappers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FEASIBILITY_TOL = 1e-9


class ContractError(ValueError):
    """Raised when arrays passed to a routine have incompatible shapes."""


@dataclass(frozen=True)
class LinearConstraints:
    """The polytope ``{x : A x <= b}`` over the continuous variables.

    Parameters
    ----------
    A : array_like, shape (k, n)
        Constraint matrix. Every entry must be finite.
    b : array_like, shape (k,)
        Right-hand side. Entries may be ``+inf`` (inactive rows).
    """

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ContractError(f"A must be a non-empty matrix, got shape {A.shape}")
        if b.shape != (A.shape[0],):
            raise ContractError(
                f"b must have length {A.shape[0]} to match A, got shape {b.shape}"
            )
        if not np.all(np.isfinite(A)):
            raise ContractError("A must be finite")
        if np.any(np.isnan(b)):
            raise ContractError("b must not contain NaN")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def violation(self, x) -> np.ndarray:
        """Componentwise ``max(A x - b, 0)``; works on a batch along the last axis."""
        x = self._check(x)
        return np.maximum(x @ self.A.T - self.b, 0.0)

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ContractError(
                f"point has {x.shape[-1] if x.ndim else 0} coordinates, constraints expect {self.dim}"
            )
        return x


def box_constraints(lower, upper) -> LinearConstraints:
    """Constraints ``lower <= x <= upper`` expressed as ``A x <= b``."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.shape[0]
    eye = np.eye(n)
    return LinearConstraints(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))


def is_feasible(c: LinearConstraints, x, tol: float = 0.0):
    """Return True iff ``(A x)_i <= b_i + tol`` for every row.

    ``x`` may be a single point of shape ``(n,)`` or a batch ``(m, n)``,
    in which case a boolean array of length ``m`` is returned.
    """
    if tol < 0:
        raise ContractError("tol must be non-negative")
    x = c._check(x)
    ok = np.all(x @ c.A.T <= c.b + tol, axis=-1)
    return bool(ok) if ok.ndim == 0 else ok


def penalize(objective: Callable, c: LinearConstraints, weight: float) -> Callable:
    """Wrap ``objective`` with the penalty ``weight * ||max(A x - b, 0)||_2``.

    The returned callable equals ``objective`` exactly on the feasible set.
    It accepts the same inputs as ``objective``; if ``objective`` handles a
    batch of points along the leading axis, so does the wrapper.

    A per-row weighted hinge sum, ``S(x) + sum_i H_i * max(a_i x - b_i, 0)``,
    is a one-liner on top of :meth:`LinearConstraints.violation`::

        lambda x: S(x) + c.violation(x) @ H
    """
    if not weight > 0:
        raise ContractError("penalty weight must be positive")

    def penalized(x, *args):
        value = objective(x, *args)
        excess = np.linalg.norm(c.violation(x), axis=-1)
        return value + weight * excess

    penalized.__wrapped__ = objective
    return penalized
