"""Ready-made problem definitions used by the command-line front end.

Each preset builds the objective, the initial sampling model, optional
constraints, the configuration it is normally run with, and an oracle
check for ``--verify``.
"""

from __future__ import annotations

import dataclasses
import importlib.util
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import benchmarks as bm
from . import oracles
from .constraints import LinearConstraints, box_constraints, penalize
from .engine import RunResult
from .models import SamplingModel


@dataclass
class Problem:
    name: str
    objective: Callable
    model: SamplingModel
    maximize: bool = False
    constraints: Optional[LinearConstraints] = None
    vectorized: bool = True
    args: tuple = ()
    preset: dict = field(default_factory=dict)
    verify: Optional[Callable[[RunResult], Optional[oracles.OracleReport]]] = None
    describe: Optional[Callable[[RunResult], dict]] = None
    dump: Optional[Callable[[Path], None]] = None


def _peaks(opts) -> Problem:
    def verify(res):
        val, arg = oracles.grid_search(lambda P: -bm.peaks(P), [(-3, 3), (-3, 3)], 601)
        return oracles.compare(res.optimum, -val, arg, 5e-3, maximize=True)

    return Problem(
        "peaks", bm.peaks, SamplingModel.build(mean=[-3, -3], sd=[10, 10]),
        maximize=True, verify=verify,
    )


def _griewank_oracle():
    c = LinearConstraints(bm.GRIEWANK_A, bm.GRIEWANK_B)
    return oracles.grid_search(bm.griewank, [(0, 8), (0, 4)], 801, constraints=c)


def _griewank(opts) -> Problem:
    c = LinearConstraints(bm.GRIEWANK_A, bm.GRIEWANK_B)

    def verify(res):
        val, arg = _griewank_oracle()
        return oracles.compare(res.optimum, val, arg, 5e-3)

    return Problem(
        "griewank", bm.griewank, SamplingModel.build(mean=[0, 0], sd=[10, 10]),
        constraints=c, preset={"N": 200, "no_improve_thr": math.inf}, verify=verify,
    )


def _griewank_penalty(opts) -> Problem:
    c = LinearConstraints(bm.GRIEWANK_A, bm.GRIEWANK_B)

    def verify(res):
        val, arg = _griewank_oracle()
        return oracles.compare(float(bm.griewank(res.optimizer_cont)), val, arg, 5e-3)

    def describe(res):
        return {"griewankAtOptimizer": float(bm.griewank(res.optimizer_cont))}

    return Problem(
        "griewank-penalty", penalize(bm.griewank, c, 100.0),
        SamplingModel.build(mean=[0, 0], sd=[10, 10]),
        preset={"N": 2000, "rho": 0.01, "no_improve_thr": math.inf},
        verify=verify, describe=describe,
    )


def _maxcut(opts) -> Problem:
    if opts.get("graph"):
        graph = bm.WeightedGraph.load(opts["graph"])
    else:
        graph = bm.WeightedGraph.random(12, seed=opts.get("data_seed"))
    probs = [np.array([0.0, 1.0])] + [np.array([0.5, 0.5])] * (graph.n - 1)

    def verify(res):
        if graph.n > oracles.MAXCUT_MAX_NODES:
            return None
        val, cut = oracles.exhaustive_maxcut(graph)
        return oracles.compare(res.optimum, val, cut, 0.0, maximize=True)

    return Problem(
        "maxcut", lambda X: bm.maxcut_value(graph, X), SamplingModel.build(probs=probs),
        maximize=True, preset={"N": 3000}, verify=verify,
        dump=lambda out: graph.save(out / "graph.txt"),
    )


def _fitzhugh(opts) -> Problem:
    truth = None
    if opts.get("data"):
        _, arr = bm.read_csv(opts["data"])
        data = bm.RegressionDataset(arr[:, 0], arr[:, 1])
    else:
        data = bm.make_fitzhugh(opts.get("data_seed"))
        truth = bm.FITZHUGH_TRUE.as_array()

    def verify(res):
        start = truth if truth is not None else res.optimizer_cont
        val, arg = oracles.fitzhugh_least_squares(data, start)
        return oracles.compare(res.optimum, val, arg, 0.01 * val)

    def describe(res):
        return {"residualSd": math.sqrt(res.optimum / data.y.size)}

    return Problem(
        "fitzhugh", bm.fitzhugh_sse, SamplingModel.build(mean=[0, 0, 5, 0, 0], sd=[1] * 5),
        args=(data,), preset={"smooth_mean": 0.9, "smooth_sd": 0.5},
        verify=verify, describe=describe,
        dump=lambda out: bm.write_csv(out / "data.csv", ["t", "y"], [data.times, data.y]),
    )


def _dirichlet(opts) -> Problem:
    if opts.get("data"):
        _, data = bm.read_csv(opts["data"])
    else:
        data = bm.make_dirichlet(opts.get("data_seed"))
    k1 = data.shape[1] + 1

    def verify(res):
        alpha = oracles.dirichlet_fixed_point_mle(data)
        return oracles.compare(res.optimum, bm.dirichlet_loglik(alpha, data), alpha, 0.1,
                               maximize=True)

    return Problem(
        "dirichlet", bm.dirichlet_loglik, SamplingModel.build(mean=[0] * k1, sd=[10] * k1),
        maximize=True, constraints=LinearConstraints(-np.eye(k1), np.zeros(k1)),
        args=(data,), preset={"N": 10_000, "smooth_sd": 0.5}, verify=verify,
        dump=lambda out: bm.write_csv(
            out / "data.csv", [f"y{i + 1}" for i in range(k1 - 1)], list(data.T)
        ),
    )


def _lasso(opts) -> Problem:
    if opts.get("data"):
        _, arr = bm.read_csv(opts["data"])
        prob = bm.LassoProblem(arr[:, 1:], arr[:, 0])
    else:
        prob = bm.make_lasso(opts.get("data_seed"))
    prob = dataclasses.replace(prob, lam=oracles.sparsity_lambda(prob))
    p = prob.X.shape[1]

    def verify(res):
        beta = oracles.lasso_coordinate_descent(prob)
        return oracles.compare(res.optimum, float(bm.lasso_objective(beta, prob)), beta, 1e-2)

    def describe(res):
        support = np.flatnonzero(np.abs(res.optimizer_cont) > 1e-6) + 1
        return {"lambda": prob.lam, "support": support.tolist()}

    return Problem(
        "lasso", bm.lasso_objective, SamplingModel.build(mean=[0] * p, sd=[5] * p),
        args=(prob,), preset={"N": 1000, "sd_thr": 1e-5}, verify=verify, describe=describe,
        dump=lambda out: bm.write_csv(
            out / "data.csv", ["y"] + [f"x{j + 1}" for j in range(p)], [prob.Y, *prob.X.T]
        ),
    )


def _regime(opts) -> Problem:
    if opts.get("data"):
        _, arr = bm.read_csv(opts["data"])
        series = bm.RegimeSeries(arr[:, -1])
    else:
        series = bm.make_regime(opts.get("data_seed"))

    def objective(theta, rm1):
        return bm.regime_sse(theta, rm1, series)

    def verify(res):
        sse, theta, r = oracles.regime_exhaustive(series.x)
        return oracles.compare(res.optimum, sse, {"theta": theta.tolist(), "r": list(r)}, 1e-2)

    def describe(res):
        return {"changePoints": (np.sort(res.optimizer_disc) + 1).tolist()}

    steps = np.arange(1, series.x.size + 1)
    return Problem(
        "regime", objective,
        SamplingModel.build(mean=[0, 0, 0], sd=[1, 1, 1], categories=[298, 298]),
        constraints=box_constraints([-1] * 3, [1] * 3),
        preset={"N": 10_000, "rho": 0.001, "smooth_prob": 0.5},
        verify=verify, describe=describe,
        dump=lambda out: bm.write_csv(out / "data.csv", ["t", "x"], [steps, series.x]),
    )


PRESETS: dict[str, Callable[[dict], Problem]] = {
    "peaks": _peaks,
    "fitzhugh": _fitzhugh,
    "maxcut": _maxcut,
    "griewank": _griewank,
    "griewank-penalty": _griewank_penalty,
    "dirichlet": _dirichlet,
    "lasso": _lasso,
    "regime": _regime,
}


def load_custom(path) -> Problem:
    """Build a problem from a Python file.

    The file must define ``objective`` and at least one of ``mean``/``sd``
    or ``categories``/``probs``.  Optional names: ``maximize``,
    ``vectorized``, ``args``, ``A`` and ``b`` (linear constraints).
    """
    path = Path(path)
    spec = importlib.util.spec_from_file_location(f"ceopt_custom_{path.stem}", path)
    if spec is None or spec.loader is None:
        raise ValueError(f"cannot import {path}")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    if not hasattr(mod, "objective"):
        raise ValueError(f"{path} does not define 'objective'")
    model = SamplingModel.build(
        mean=getattr(mod, "mean", None), sd=getattr(mod, "sd", None),
        categories=getattr(mod, "categories", None), probs=getattr(mod, "probs", None),
    )
    constraints = None
    if hasattr(mod, "A"):
        constraints = LinearConstraints(mod.A, mod.b)
    return Problem(
        path.stem, mod.objective, model,
        maximize=bool(getattr(mod, "maximize", False)),
        constraints=constraints,
        vectorized=bool(getattr(mod, "vectorized", False)),
        args=tuple(getattr(mod, "args", ())),
    )


def build_problem(name: str, opts: dict) -> Problem:
    if name in PRESETS:
        return PRESETS[name](opts)
    if name.endswith(".py") and Path(name).is_file():
        return load_custom(name)
    raise KeyError(name)
