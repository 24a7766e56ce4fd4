"""Sampling families for the cross-entropy method and their updates.

A :class:`SamplingModel` holds an independent Gaussian block for the
continuous variables and/or an independent categorical block for the
discrete ones.  Models are immutable; :func:`fit_elites` and
:func:`smooth` return new instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

from .constraints import ContractError, LinearConstraints

SD_FLOOR = 1e-12
PROB_SUM_TOL = 1e-12


class InfeasibleConstraintsError(RuntimeError):
    """No point satisfying the linear constraints could be located."""


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianBlock:
    """Independent normals with per-dimension ``mean`` and ``sd``."""

    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        mean = _frozen(np.atleast_1d(self.mean))
        sd = _frozen(np.atleast_1d(self.sd))
        if mean.ndim != 1 or mean.shape != sd.shape or mean.size == 0:
            raise ContractError("mean and sd must be non-empty vectors of equal length")
        if np.any(sd < 0) or not np.all(np.isfinite(sd)) or not np.all(np.isfinite(mean)):
            raise ContractError("sd must be finite and non-negative; mean finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sd", sd)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class CategoricalBlock:
    """Independent categorical variables; ``probs[i][j] = P(X_i = j)``."""

    probs: tuple

    def __post_init__(self):
        probs = tuple(_frozen(np.atleast_1d(p)) for p in self.probs)
        if not probs:
            raise ContractError("categorical block needs at least one variable")
        for i, p in enumerate(probs):
            if p.ndim != 1 or p.size < 1:
                raise ContractError(f"probs[{i}] must be a non-empty vector")
            if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_SUM_TOL * max(1, p.size):
                raise ContractError(f"probs[{i}] is not a probability vector")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, categories: Sequence[int]) -> "CategoricalBlock":
        if any(int(c) < 1 for c in categories):
            raise ContractError("every variable needs at least one category")
        return cls(tuple(np.full(int(c), 1.0 / int(c)) for c in categories))

    @property
    def categories(self) -> np.ndarray:
        return np.array([p.size for p in self.probs], dtype=int)

    @property
    def dim(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class SamplingModel:
    """The full parameter vector: optional Gaussian and categorical blocks."""

    gauss: Optional[GaussianBlock] = None
    cat: Optional[CategoricalBlock] = None

    def __post_init__(self):
        if self.gauss is None and self.cat is None:
            raise ContractError("a sampling model needs a continuous or a discrete block")

    @classmethod
    def build(cls, mean=None, sd=None, categories=None, probs=None) -> "SamplingModel":
        """Convenience constructor mirroring the usual argument lists.

        If ``probs`` is given it takes precedence over ``categories``;
        otherwise the categorical probabilities start uniform.
        """
        gauss = None
        if mean is not None or sd is not None:
            if mean is None or sd is None:
                raise ContractError("both mean and sd are required for the continuous block")
            gauss = GaussianBlock(mean, sd)
        cat = None
        if probs is not None:
            cat = CategoricalBlock(tuple(probs))
        elif categories is not None:
            cat = CategoricalBlock.uniform(categories)
        return cls(gauss, cat)

    @property
    def n_cont(self) -> int:
        return 0 if self.gauss is None else self.gauss.dim

    @property
    def n_disc(self) -> int:
        return 0 if self.cat is None else self.cat.dim


@dataclass(frozen=True)
class Candidate:
    """One sampled state with its objective value."""

    cont: np.ndarray = field(default_factory=lambda: np.empty(0))
    disc: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    value: float = np.inf


# ---------------------------------------------------------------------------
# univariate truncated normal


def truncnorm_ppf(u, mean, sd, lower, upper):
    """Inverse-CDF draw from ``N(mean, sd^2)`` restricted to ``[lower, upper]``.

    ``u`` holds uniforms in ``[0, 1)``.  All arguments broadcast.  The CDF
    is handled in log space on the lighter side of the interval, so
    intervals deep in either tail (tens of standard deviations out) still
    produce points inside ``[lower, upper]``.
    """
    u, mean, sd, lower, upper = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (u, mean, sd, lower, upper))
    )
    sd = np.maximum(sd, SD_FLOOR)
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    # reflect so that the interval sits mostly on the negative half-line;
    # an unbounded interval gives nan here and is left unflipped
    with np.errstate(invalid="ignore"):
        flip = (a + b) > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_lo = log_ndtr(lo)
        log_hi = log_ndtr(hi)
        ratio = np.exp(log_lo - log_hi)
        ratio = np.where(np.isfinite(ratio), ratio, 0.0)
        log_p = log_hi + np.log(u + (1.0 - u) * ratio)
        z = ndtri_exp(np.minimum(log_p, 0.0))
    z = np.clip(np.nan_to_num(z, nan=0.0), lo, hi)
    z = np.where(flip, -z, z)
    x = mean + sd * z
    x = np.clip(x, lower, upper)
    return x if x.ndim else float(x)


# ---------------------------------------------------------------------------
# sampling


class TruncatedGaussianSampler:
    """Draws from an independent Gaussian truncated to a polytope.

    Acceptance-rejection is used while it is efficient.  When a probe
    batch accepts fewer than ``min_acceptance`` of its draws, the sampler
    switches permanently to a systematic-scan Gibbs chain whose
    coordinate conditionals are univariate truncated normals.  The chain
    state is kept between calls so successive iterations of an
    optimization run continue the same chain (re-burned under the new
    parameters).

    Parameters
    ----------
    constraints : LinearConstraints
    method : {"auto", "rejection", "gibbs"}
        ``"auto"`` applies the switching rule above.
    probe_size : int
        Batch size for rejection attempts and the acceptance probe.
    min_acceptance : float
    burn_in : int
        Gibbs sweeps discarded at the start of every call.
    thin : int
        Gibbs sweeps between retained samples.
    max_attempts : int
        Rejection budget per call before falling back to Gibbs.
    """

    def __init__(
        self,
        constraints: LinearConstraints,
        method: str = "auto",
        probe_size: int = 1000,
        min_acceptance: float = 0.01,
        burn_in: int = 10,
        thin: int = 1,
        max_attempts: int = 10_000_000,
    ):
        if method not in ("auto", "rejection", "gibbs"):
            raise ValueError(f"unknown truncation method {method!r}")
        self.constraints = constraints
        self.method = method
        self.mode = "gibbs" if method == "gibbs" else "rejection"
        self.probe_size = probe_size
        self.min_acceptance = min_acceptance
        self.burn_in = burn_in
        self.thin = thin
        self.max_attempts = max_attempts
        self.state: Optional[np.ndarray] = None
        self.attempts = 0
        self.accepted = 0

    def sample(self, gauss: GaussianBlock, size: int, rng: np.random.Generator) -> np.ndarray:
        if gauss.dim != self.constraints.dim:
            raise ContractError(
                f"constraints have {self.constraints.dim} columns, model has {gauss.dim} dimensions"
            )
        if self.mode == "rejection":
            out = self._rejection(gauss, size, rng)
            if out is not None:
                return out
            self.mode = "gibbs"
        return self._gibbs(gauss, size, rng)

    # -- acceptance-rejection -------------------------------------------------

    def _rejection(self, gauss, size, rng):
        c = self.constraints
        sd = np.maximum(gauss.sd, SD_FLOOR)
        kept = []
        n_kept = 0
        tried = 0
        best_violator, best_violation = None, np.inf
        while n_kept < size:
            batch = max(self.probe_size, size - n_kept)
            x = gauss.mean + sd * rng.standard_normal((batch, gauss.dim))
            excess = (x @ c.A.T - c.b).max(axis=1)
            ok = excess <= 0
            tried += batch
            self.attempts += batch
            n_ok = int(ok.sum())
            self.accepted += n_ok
            if n_ok:
                kept.append(x[ok])
                n_kept += n_ok
                self.state = x[ok][-1].copy()
            else:
                j = int(np.argmin(excess))
                if excess[j] < best_violation:
                    best_violator, best_violation = x[j], excess[j]
            too_slow = tried == batch and n_ok < self.min_acceptance * batch
            if self.method == "auto" and too_slow:
                if self.state is None:
                    self.state = self._repair(best_violator, gauss.mean)
                return None
            if tried >= self.max_attempts and n_kept < size:
                if self.method == "rejection":
                    raise InfeasibleConstraintsError(
                        f"acceptance-rejection found {n_kept} of {size} feasible points "
                        f"in {tried} attempts"
                    )
                if self.state is None:
                    self.state = self._repair(best_violator, gauss.mean)
                return None
        return np.concatenate(kept)[:size]

    # -- Gibbs ------------------------------------------------------------

    def _repair(self, start, mean) -> np.ndarray:
        """Move a point into the polytope by cyclic projection onto violated rows."""
        c = self.constraints
        row_norm2 = np.einsum("ij,ij->i", c.A, c.A)
        for x0 in (start, mean):
            if x0 is None:
                continue
            x = np.array(x0, dtype=float)
            for _ in range(10_000):
                excess = c.A @ x - c.b
                if np.all(excess <= 0):
                    return x
                for k in np.flatnonzero(excess > 0):
                    if row_norm2[k] == 0:
                        continue
                    r = c.A[k] @ x - c.b[k]
                    if r > 0:
                        # overshoot slightly so the point lands strictly inside
                        x = x - (r * (1 + 1e-9) + 1e-12) / row_norm2[k] * c.A[k]
        raise InfeasibleConstraintsError(
            "no feasible point found for the linear constraints; the polytope may be empty"
        )

    def _gibbs(self, gauss, size, rng):
        c = self.constraints
        if self.state is None or np.any(c.A @ self.state > c.b):
            self.state = self._repair(self.state, gauss.mean)
        x = self.state.copy()
        mean, sd = gauss.mean, np.maximum(gauss.sd, SD_FLOOR)
        A, b = c.A, c.b
        n = gauss.dim
        out = np.empty((size, n))
        slack = b - A @ x
        for sweep in range(self.burn_in + size * self.thin):
            for i in range(n):
                col = A[:, i]
                resid = slack + col * x[i]
                with np.errstate(divide="ignore", invalid="ignore"):
                    bound = resid / col
                pos, neg = col > 0, col < 0
                hi = bound[pos].min() if pos.any() else np.inf
                lo = bound[neg].max() if neg.any() else -np.inf
                if lo > hi:
                    # rounding at a vertex; stay put
                    continue
                new = truncnorm_ppf(rng.random(), mean[i], sd[i], lo, hi)
                slack = resid - col * new
                x[i] = new
            k = sweep - self.burn_in + 1
            if k > 0 and k % self.thin == 0:
                out[k // self.thin - 1] = x
        self.state = x.copy()
        return out


def sample_categorical(cat: CategoricalBlock, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` integer vectors, one column per categorical variable."""
    u = rng.random((size, cat.dim))
    out = np.empty((size, cat.dim), dtype=int)
    for i, p in enumerate(cat.probs):
        cum = np.cumsum(p)
        j = np.searchsorted(cum, u[:, i], side="right")
        # u beyond a cumsum that rounded below 1 goes to the last supported category
        out[:, i] = np.minimum(j, np.flatnonzero(p > 0)[-1])
    return out


def sample_candidates(
    model: SamplingModel,
    size: int,
    rng: np.random.Generator,
    constraints: Optional[LinearConstraints] = None,
    sampler: Optional[TruncatedGaussianSampler] = None,
):
    """Draw ``size`` states from ``model``.

    Returns ``(cont, disc)`` with shapes ``(size, n_cont)`` and
    ``(size, n_disc)``.  The continuous block for all candidates is drawn
    first, then the discrete block, each in candidate-major order.
    """
    if constraints is not None and model.gauss is None:
        raise ContractError("linear constraints require a continuous block")
    if model.gauss is None:
        cont = np.empty((size, 0))
    elif constraints is None and sampler is None:
        sd = np.maximum(model.gauss.sd, SD_FLOOR)
        cont = model.gauss.mean + sd * rng.standard_normal((size, model.n_cont))
    else:
        if sampler is None:
            sampler = TruncatedGaussianSampler(constraints)
        cont = sampler.sample(model.gauss, size, rng)
    if model.cat is None:
        disc = np.empty((size, 0), dtype=int)
    else:
        disc = sample_categorical(model.cat, size, rng)
    return cont, disc


def sample_candidate(
    model: SamplingModel,
    rng: np.random.Generator,
    constraints: Optional[LinearConstraints] = None,
) -> Candidate:
    """Draw a single (unevaluated) candidate."""
    cont, disc = sample_candidates(model, 1, rng, constraints)
    return Candidate(cont[0], disc[0], np.nan)


def sample_truncated(
    gauss: GaussianBlock,
    constraints: LinearConstraints,
    rng: np.random.Generator,
    size: Optional[int] = None,
    method: str = "auto",
) -> np.ndarray:
    """Sample the Gaussian block truncated to ``constraints``.

    Returns one vector when ``size`` is None, else an array ``(size, n)``.
    """
    sampler = TruncatedGaussianSampler(constraints, method=method)
    out = sampler.sample(gauss, 1 if size is None else size, rng)
    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# updates


def fit_elites(model: SamplingModel, cont=None, disc=None) -> SamplingModel:
    """Maximum-likelihood refit of ``model``'s family to the elite states.

    Gaussian block: elite sample mean and ML standard deviation (divisor
    ``N_e``).  Categorical block: relative frequency of each category
    among the elites.
    """
    gauss = cat = None
    if model.gauss is not None:
        cont = np.asarray(cont, dtype=float).reshape(-1, model.n_cont)
        if cont.shape[0] == 0:
            raise ContractError("at least one elite is required")
        mu = cont.mean(axis=0)
        gauss = GaussianBlock(mu, np.sqrt(np.mean((cont - mu) ** 2, axis=0)))
    if model.cat is not None:
        disc = np.asarray(disc, dtype=int).reshape(-1, model.n_disc)
        n_elite = disc.shape[0]
        if n_elite == 0:
            raise ContractError("at least one elite is required")
        cat = CategoricalBlock(
            tuple(
                np.bincount(disc[:, i], minlength=c) / n_elite
                for i, c in enumerate(model.cat.categories)
            )
        )
    return SamplingModel(gauss, cat)


def smooth(
    new: SamplingModel,
    old: SamplingModel,
    alpha_mean: float = 1.0,
    alpha_sd: float = 1.0,
    alpha_prob: float = 1.0,
) -> SamplingModel:
    """Blend ``alpha * new + (1 - alpha) * old`` per parameter family."""
    for a in (alpha_mean, alpha_sd, alpha_prob):
        if not 0.0 <= a <= 1.0:
            raise ContractError("smoothing constants must lie in [0, 1]")
    if (new.gauss is None) != (old.gauss is None) or (new.cat is None) != (old.cat is None):
        raise ContractError("models have different blocks")

    def blend(a, x, y):
        if a == 1.0:
            return x
        if a == 0.0:
            return y
        return a * x + (1.0 - a) * y

    gauss = cat = None
    if new.gauss is not None:
        if new.gauss.dim != old.gauss.dim:
            raise ContractError("continuous blocks differ in dimension")
        gauss = GaussianBlock(
            blend(alpha_mean, new.gauss.mean, old.gauss.mean),
            blend(alpha_sd, new.gauss.sd, old.gauss.sd),
        )
    if new.cat is not None:
        if not np.array_equal(new.cat.categories, old.cat.categories):
            raise ContractError("categorical blocks differ in shape")
        cat = CategoricalBlock(
            tuple(blend(alpha_prob, p, q) for p, q in zip(new.cat.probs, old.cat.probs))
        )
    return SamplingModel(gauss, cat)


def degeneracy_metrics(model: SamplingModel) -> tuple[float, float]:
    """``(max sd, max_ij min(p_ij, 1 - p_ij))``; zero for an absent block."""
    max_sd = float(model.gauss.sd.max()) if model.gauss is not None else 0.0
    max_dev = 0.0
    if model.cat is not None:
        max_dev = max(float(np.minimum(p, 1.0 - p).max()) for p in model.cat.probs)
    return max_sd, max_dev
