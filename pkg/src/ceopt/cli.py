"""``ceopt`` command line: run benchmark or custom problems and write traces.

Exit status: 0 on success, 1 when ``--verify`` finds a disagreement with
the reference solver, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import secrets
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .engine import CeConfig, ConfigError, RunResult, optimize
from .problems import PRESETS, Problem, build_problem

# config-file keys -> CeConfig field names
CONFIG_KEYS = {
    "N": "N",
    "rho": "rho",
    "seed": "seed",
    "maximize": "maximize",
    "iter_thr": "iter_thr",
    "iterThr": "iter_thr",
    "no_improve_thr": "no_improve_thr",
    "noImproveThr": "no_improve_thr",
    "sd_thr": "sd_thr",
    "sdThr": "sd_thr",
    "prob_thr": "prob_thr",
    "probThr": "prob_thr",
    "smooth_mean": "smooth_mean",
    "smoothMean": "smooth_mean",
    "smooth_sd": "smooth_sd",
    "smoothSd": "smooth_sd",
    "smooth_prob": "smooth_prob",
    "smoothProb": "smooth_prob",
    "parallelism": "parallelism",
}
SPEC_KEYS = {"benchmark", "data_seed", "out", "verify", "verbose", "repeat", "graph", "data"}


class UsageError(Exception):
    pass


@dataclass
class RunSpec:
    benchmark: Optional[str] = None
    overrides: dict = field(default_factory=dict)
    data_seed: Optional[int] = 0
    out: str = "ceopt-out"
    verify: bool = False
    verbose: bool = False
    repeat: int = 1
    graph: Optional[str] = None
    data: Optional[str] = None

    def validate(self) -> None:
        if self.repeat < 1:
            raise ConfigError("repeat: must be at least 1")
        if self.benchmark is None:
            raise UsageError("no benchmark given")
        if self.benchmark not in PRESETS and not (
            self.benchmark.endswith(".py") and Path(self.benchmark).is_file()
        ):
            raise UsageError(
                f"unknown benchmark {self.benchmark!r}; choose from {', '.join(PRESETS)} "
                "or give a path to a .py problem file"
            )
        make_config(self.overrides)


def _coerce_inf(value):
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    return value


def make_config(overrides: dict, preset: Optional[dict] = None) -> CeConfig:
    """CeConfig from defaults, then ``preset``, then ``overrides``."""
    fields = {**(preset or {}), **overrides}
    try:
        return CeConfig(**fields)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunSpec:
    """Read a JSON run description.  An empty file yields all defaults."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return RunSpec()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    spec = RunSpec()
    for key, value in raw.items():
        if key in CONFIG_KEYS:
            spec.overrides[CONFIG_KEYS[key]] = _coerce_inf(value)
        elif key in SPEC_KEYS:
            setattr(spec, key, value)
        else:
            raise ConfigError(f"{path}: unknown field {key!r}")
    try:
        make_config(spec.overrides)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(spec.repeat, int) or spec.repeat < 1:
        raise ConfigError(f"{path}: repeat must be a positive integer")
    return spec


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    return repr(float(v))


def write_trace(path: Path, res: RunResult) -> None:
    n_mean = res.trace[0].means.size if res.trace else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "bestValue", "gammaT", "maxSd", "maxProbDev"]
                   + [f"mean_{i}" for i in range(n_mean)])
        for rec in res.trace:
            w.writerow([rec.iter, _fmt(rec.best_value), _fmt(rec.gamma), _fmt(rec.max_sd),
                        _fmt(rec.max_prob_dev)] + [_fmt(m) for m in rec.means])


def write_probs(out: Path, res: RunResult) -> None:
    for rec in res.trace:
        if rec.probs is None:
            return
        with open(out / f"probs_{rec.iter}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variable", "category", "prob"])
            for i, p in enumerate(rec.probs):
                for j, v in enumerate(p):
                    w.writerow([i, j, _fmt(v)])


def summarize(problem: Problem, cfg: CeConfig, res: RunResult, wall: float) -> dict:
    summary = {
        "benchmark": problem.name,
        "seed": cfg.seed,
        "optimum": float(res.optimum),
        "optimizer": {
            "continuous": res.optimizer_cont.tolist(),
            "discrete": res.optimizer_disc.tolist(),
        },
        "niter": res.niter,
        "convergence": res.convergence.value,
        "convergenceMessage": res.convergence.message,
        "nEvaluations": res.n_evaluations,
        "nNaN": res.n_nan,
        "wallTime": wall,
        "config": {k: (None if v == math.inf else v)
                   for k, v in dataclasses.asdict(cfg).items()},
    }
    if problem.describe is not None:
        summary.update(problem.describe(res))
    return summary


# ---------------------------------------------------------------------------
# running


def run_benchmark(spec: RunSpec, stream=None) -> int:
    """Execute ``spec.repeat`` seeded runs and write their artifacts."""
    stream = sys.stdout if stream is None else stream
    spec.validate()
    opts = {"data_seed": spec.data_seed, "graph": spec.graph, "data": spec.data}
    problem = build_problem(spec.benchmark, opts)
    overrides = dict(spec.overrides)
    base_seed = overrides.pop("seed", None)
    if base_seed is None:
        base_seed = secrets.randbits(63)
    if overrides.get("maximize"):
        problem.maximize = True
    overrides.pop("maximize", None)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    if problem.dump is not None:
        problem.dump(out)

    summaries = []
    failed = False
    for k in range(spec.repeat):
        cfg = make_config(
            {**overrides, "seed": base_seed + k, "maximize": problem.maximize}, problem.preset
        )
        run_dir = out / f"run_{k:04d}"
        run_dir.mkdir(exist_ok=True)

        def progress(rec, k=k):
            print(f"run {k} iter {rec.iter:5d}  gamma {rec.gamma: .6g}  best {rec.best_value: .10g}",
                  file=stream)

        t0 = time.perf_counter()
        res = optimize(problem.objective, problem.model, cfg, problem.constraints,
                       args=problem.args, vectorized=problem.vectorized,
                       callback=progress if spec.verbose else None)
        wall = time.perf_counter() - t0
        summary = summarize(problem, cfg, res, wall)
        write_trace(run_dir / "trace.csv", res)
        write_probs(run_dir, res)
        if spec.verify:
            report = problem.verify(res) if problem.verify is not None else None
            if report is None:
                summary["verification"] = None
                print(f"run {k}: no reference solver available for this instance", file=stream)
            else:
                summary["verification"] = report.to_dict()
                (run_dir / "oracle.json").write_text(json.dumps(report.to_dict(), indent=2))
                if not report.agrees:
                    failed = True
                    print(f"run {k}: oracle disagreement, gap {report.gap:.6g} > "
                          f"{report.tolerance:.6g}", file=stream)
        (run_dir / "result.json").write_text(json.dumps(summary, indent=2))
        summaries.append(summary)
        print(f"run {k}: optimum {res.optimum:.10g} after {res.niter} iterations "
              f"({res.convergence.message})", file=stream)

    freq = Counter(s["optimum"] for s in summaries)
    table = [{"optimum": v, "count": c} for v, c in sorted(freq.items())]
    (out / "summary.json").write_text(json.dumps(
        {"benchmark": problem.name, "baseSeed": base_seed, "dataSeed": spec.data_seed,
         "repeat": spec.repeat, "frequency": table, "runs": summaries}, indent=2))
    if spec.repeat > 1:
        print("optimum frequencies:", file=stream)
        for row in table[::-1] if problem.maximize else table:
            print(f"  {row['optimum']:.10g}: {row['count']}", file=stream)
    return 1 if failed else 0


def _int_or_inf(text: str):
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ceopt", description="Cross-entropy optimizer")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a benchmark or a custom problem file")
    run.add_argument("benchmark", help=f"one of {', '.join(PRESETS)}, or a path to a .py file")
    run.add_argument("--N", type=int)
    run.add_argument("--rho", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--smooth-mean", type=float)
    run.add_argument("--smooth-sd", type=float)
    run.add_argument("--smooth-prob", type=float)
    run.add_argument("--iter-thr", type=int)
    run.add_argument("--no-improve-thr", type=_int_or_inf)
    run.add_argument("--sd-thr", type=float)
    run.add_argument("--prob-thr", type=float)
    run.add_argument("--maximize", action="store_true", default=None,
                     help="maximize a custom objective (presets fix their own sense)")
    run.add_argument("--verbose", action="store_true", default=None)
    run.add_argument("--verify", action="store_true", default=None)
    run.add_argument("--repeat", type=int)
    run.add_argument("--out")
    run.add_argument("--graph", help="max-cut weight matrix file")
    run.add_argument("--data", help="CSV dataset replacing the generated one")
    run.add_argument("--data-seed", type=int)
    run.add_argument("--config", help="JSON run description; flags take precedence")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_config(args.config) if args.config else RunSpec()
        spec.benchmark = args.benchmark
        flag_fields = {
            "N": "N", "rho": "rho", "seed": "seed", "smooth_mean": "smooth_mean",
            "smooth_sd": "smooth_sd", "smooth_prob": "smooth_prob", "iter_thr": "iter_thr",
            "no_improve_thr": "no_improve_thr", "sd_thr": "sd_thr", "prob_thr": "prob_thr",
            "maximize": "maximize",
        }
        for attr, key in flag_fields.items():
            value = getattr(args, attr)
            if value is not None:
                spec.overrides[key] = value
        for attr in ("verify", "verbose", "repeat", "out", "graph", "data", "data_seed"):
            value = getattr(args, attr)
            if value is not None:
                setattr(spec, attr, value)
        return run_benchmark(spec)
    except (ConfigError, UsageError, ValueError, OSError) as exc:
        print(f"ceopt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
