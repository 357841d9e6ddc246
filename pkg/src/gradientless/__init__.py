"""Gradient-free optimization by comparing function values: GradientLess Descent."""

from .baselines import ArsConfig, MisestimationVariant, apply_misestimation, ars_run, misestimated_q_bound
from .errors import DomainError, ParameterError
from .geometry import (
    BallPair,
    Estimate,
    cap_fraction_exact,
    cap_fraction_mc,
    descent_probability_mc,
    intersection_fraction_exact,
    intersection_fraction_mc,
    lower_bound_probe,
    regularized_incomplete_beta,
    verify_geometry,
)
from .gld import GldFastConfig, GldSearchConfig, RunTrace, TraceRecord, gld_fast_run, gld_search_run, gld_step
from .harness import ExperimentSpec, run_experiment, summarize_traces
from .objectives import (
    ObjectiveOracle,
    build_benchmark,
    build_low_rank,
    build_quadratic,
    evaluate_benchmark,
    evaluate_counted,
    wrap_monotone,
)
from .sampling import (
    RadiusLadder,
    SamplerSpec,
    SeededRng,
    build_ladder_fast,
    build_ladder_search,
    low_rank_ladder_extension,
    sample_gaussian,
    sample_uniform_ball,
)

__version__ = "0.1.0"
