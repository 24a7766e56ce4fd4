"""The generic cross-entropy optimization loop.

Each iteration draws ``N`` candidates from the current sampling model,
ranks them, refits the model to the ``ceil(rho * N)`` best (the elites)
by maximum likelihood, and blends the refit with the previous model.
Internally everything is a minimization; ``maximize=True`` negates the
objective values on the way in and out.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constraints import LinearConstraints
from .models import (
    Candidate,
    SamplingModel,
    TruncatedGaussianSampler,
    degeneracy_metrics,
    fit_elites,
    sample_candidates,
    smooth,
)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid optimizer configuration."""


class Convergence(enum.Enum):
    VARIANCE_CONVERGED = "VarianceConverged"
    NO_IMPROVEMENT = "NoImprovement"
    ITER_LIMIT = "IterLimit"

    @property
    def message(self) -> str:
        return {
            Convergence.VARIANCE_CONVERGED: "Variances converged",
            Convergence.NO_IMPROVEMENT: "The optimum did not change for noImproveThr iterations",
            Convergence.ITER_LIMIT: "Not converged",
        }[self]


@dataclass(frozen=True)
class CeConfig:
    """Tuning constants of a run.

    ``no_improve_thr`` may be ``math.inf`` to disable that stopping rule.
    ``seed=None`` draws fresh OS entropy.  ``parallelism`` is the number
    of threads used to evaluate a non-vectorized objective; it never
    changes the results.
    """

    N: int = 100
    rho: float = 0.1
    maximize: bool = False
    iter_thr: int = 10_000
    no_improve_thr: float = 5
    sd_thr: float = 0.001
    prob_thr: float = 0.001
    smooth_mean: float = 1.0
    smooth_sd: float = 1.0
    smooth_prob: float = 1.0
    seed: Optional[int] = None
    parallelism: int = 1

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho!r}")
        if int(self.iter_thr) != self.iter_thr or self.iter_thr < 1:
            raise ConfigError(f"iter_thr must be a positive integer, got {self.iter_thr!r}")
        if not (self.no_improve_thr == math.inf or
                (int(self.no_improve_thr) == self.no_improve_thr and self.no_improve_thr >= 1)):
            raise ConfigError(
                f"no_improve_thr must be a positive integer or inf, got {self.no_improve_thr!r}"
            )
        for name in ("sd_thr", "prob_thr"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("smooth_mean", "smooth_sd", "smooth_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")

    @property
    def n_elite(self) -> int:
        return max(1, math.ceil(self.rho * self.N))


@dataclass
class IterationRecord:
    iter: int
    best_value: float
    gamma: float
    means: np.ndarray
    max_sd: float
    max_prob_dev: float
    probs: Optional[tuple] = None


@dataclass
class RunResult:
    optimum: float
    optimizer_cont: np.ndarray
    optimizer_disc: np.ndarray
    niter: int
    convergence: Convergence
    trace: list = field(default_factory=list)
    n_evaluations: int = 0
    n_nan: int = 0
    model: Optional[SamplingModel] = None

    @property
    def optimizer(self) -> Candidate:
        return Candidate(self.optimizer_cont, self.optimizer_disc, self.optimum)


def select_elites(values, rho: float) -> tuple[np.ndarray, float]:
    """Indices of the ``ceil(rho * N)`` smallest values and the level.

    Ties are broken by original position, so the result is the prefix of
    a stable ascending sort.  The level is the largest elite value.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ConfigError("need at least one value")
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"rho must lie in (0, 1), got {rho!r}")
    n_elite = max(1, math.ceil(rho * values.size))
    order = np.argsort(values, kind="stable")[:n_elite]
    return order, float(values[order[-1]])


def _worker_count(cfg: CeConfig) -> int:
    cap = os.environ.get("CEOPT_THREADS")
    n = cfg.parallelism
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _make_evaluator(objective, model, vectorized, args, workers):
    n_c, n_d = model.n_cont, model.n_disc

    def call(c, d):
        if n_c and n_d:
            return objective(c, d, *args)
        return objective(c if n_c else d, *args)

    if vectorized:
        def evaluate(cont, disc):
            return np.asarray(call(cont, disc), dtype=float).reshape(cont.shape[0])
        return evaluate

    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def evaluate(cont, disc):
        rows = range(cont.shape[0])
        if pool is None:
            vals = [call(cont[k], disc[k]) for k in rows]
        else:
            vals = list(pool.map(lambda k: call(cont[k], disc[k]), rows))
        return np.array(vals, dtype=float)

    evaluate.pool = pool
    return evaluate


def optimize(
    objective: Callable,
    model0: SamplingModel,
    config: Optional[CeConfig] = None,
    constraints: Optional[LinearConstraints] = None,
    *,
    args: tuple = (),
    vectorized: bool = False,
    truncation: str = "auto",
    callback: Optional[Callable[[IterationRecord], None]] = None,
) -> RunResult:
    """Minimize (or maximize) ``objective`` with the cross-entropy method.

    Parameters
    ----------
    objective : callable
        Called as ``objective(x, *args)`` for purely continuous or purely
        discrete problems and ``objective(x_cont, x_disc, *args)`` for
        mixed ones.  With ``vectorized=True`` it receives 2-D arrays with
        one candidate per row and must return one value per row.  ``inf``
        is a valid value (e.g. to reject a state); NaN is treated as the
        worst possible value.
    model0 : SamplingModel
        Initial sampling distribution.
    config : CeConfig, optional
    constraints : LinearConstraints, optional
        Restricts the continuous block to ``A x <= b``.  The initial mean
        does not have to be feasible.
    truncation : {"auto", "rejection", "gibbs"}
        Sampling strategy under constraints.
    callback : callable, optional
        Receives each :class:`IterationRecord` as it is produced.

    Returns
    -------
    RunResult
        The best candidate ever evaluated, with the per-iteration trace.
    """
    cfg = config or CeConfig()
    if constraints is not None:
        if model0.gauss is None:
            raise ConfigError("linear constraints need a continuous block")
        if constraints.dim != model0.n_cont:
            raise ConfigError(
                f"constraints have {constraints.dim} columns, model has {model0.n_cont} "
                "continuous dimensions"
            )
    rng = np.random.default_rng(cfg.seed)
    sign = -1.0 if cfg.maximize else 1.0
    sampler = (
        TruncatedGaussianSampler(constraints, method=truncation) if constraints is not None else None
    )
    evaluate = _make_evaluator(objective, model0, vectorized, args, _worker_count(cfg))

    model = model0
    best = np.inf
    best_cont = np.full(model0.n_cont, np.nan)
    best_disc = np.zeros(model0.n_disc, dtype=int)
    trace: list[IterationRecord] = []
    stall = 0
    n_nan = 0
    n_evals = 0
    t = 0
    try:
        while True:
            t += 1
            cont, disc = sample_candidates(model, cfg.N, rng, constraints, sampler)
            values = sign * evaluate(cont, disc)
            n_evals += cfg.N
            nan = np.isnan(values)
            if nan.any():
                n_nan += int(nan.sum())
                values[nan] = np.inf
            elite, gamma = select_elites(values, cfg.rho)

            if values[elite[0]] < best:
                best = float(values[elite[0]])
                best_cont = cont[elite[0]].copy()
                best_disc = disc[elite[0]].copy()
                stall = 0
            else:
                stall += 1

            fitted = fit_elites(model, cont[elite], disc[elite])
            model = smooth(fitted, model, cfg.smooth_mean, cfg.smooth_sd, cfg.smooth_prob)
            max_sd, max_dev = degeneracy_metrics(model)
            record = IterationRecord(
                iter=t,
                best_value=sign * best,
                gamma=sign * gamma,
                means=model.gauss.mean.copy() if model.gauss is not None else np.empty(0),
                max_sd=max_sd,
                max_prob_dev=max_dev,
                probs=tuple(p.copy() for p in model.cat.probs) if model.cat is not None else None,
            )
            trace.append(record)
            if callback is not None:
                callback(record)

            sd_done = model.gauss is None or max_sd < cfg.sd_thr
            prob_done = model.cat is None or max_dev < cfg.prob_thr
            if sd_done and prob_done:
                status = Convergence.VARIANCE_CONVERGED
            elif stall >= cfg.no_improve_thr:
                status = Convergence.NO_IMPROVEMENT
            elif t >= cfg.iter_thr:
                status = Convergence.ITER_LIMIT
            else:
                continue
            break
    finally:
        pool = getattr(evaluate, "pool", None)
        if pool is not None:
            pool.shutdown()

    if n_nan:
        logger.warning("objective returned NaN %d times; treated as worst value", n_nan)
    return RunResult(
        optimum=sign * best,
        optimizer_cont=best_cont,
        optimizer_disc=best_disc,
        niter=t,
        convergence=status,
        trace=trace,
        n_evaluations=n_evals,
        n_nan=n_nan,
        model=model,
    )
