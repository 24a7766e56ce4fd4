"""Cross-entropy method for continuous, discrete, mixed and linearly constrained optimization."""

from .constraints import LinearConstraints, box_constraints, is_feasible, penalize
from .engine import (
    CeConfig,
    ConfigError,
    Convergence,
    IterationRecord,
    RunResult,
    optimize,
    select_elites,
)
from .models import (
    Candidate,
    CategoricalBlock,
    GaussianBlock,
    InfeasibleConstraintsError,
    SamplingModel,
    TruncatedGaussianSampler,
    degeneracy_metrics,
    fit_elites,
    sample_candidate,
    sample_candidates,
    sample_truncated,
    smooth,
)

__all__ = [
    "Candidate",
    "CategoricalBlock",
    "CeConfig",
    "ConfigError",
    "Convergence",
    "GaussianBlock",
    "InfeasibleConstraintsError",
    "IterationRecord",
    "LinearConstraints",
    "RunResult",
    "SamplingModel",
    "TruncatedGaussianSampler",
    "box_constraints",
    "degeneracy_metrics",
    "fit_elites",
    "is_feasible",
    "optimize",
    "penalize",
    "sample_candidate",
    "sample_candidates",
    "sample_truncated",
    "select_elites",
    "smooth",
]

__version__ = "0.1.0"
