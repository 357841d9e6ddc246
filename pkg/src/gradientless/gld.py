"""GradientLess Descent: GLD-Search and GLD-Fast.

Both methods only *compare* objective values, so any strictly increasing
transform of the objective produces the same iterates for the same seed.

Evaluation accounting: the starting point costs one evaluation, then each
iteration costs ``ladder.candidates_per_iteration`` evaluations.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import ParameterError
from .sampling import (
    RadiusLadder,
    SamplerSpec,
    build_ladder_fast,
    build_ladder_search,
    low_rank_ladder_extension,
)


@dataclass
class TraceRecord:
    iteration: int
    evaluations: int
    best_value: float
    gap: Optional[float] = None
    accepted_radius: Optional[float] = None
    nonfinite: int = 0
    wall_time_ms: float = 0.0


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    final_point: Optional[np.ndarray] = None
    final_value: Optional[float] = None
    truncated: bool = False
    points: Optional[list] = None
    meta: dict = field(default_factory=dict)
    # evaluations spent outside any record (e.g. only the start point)
    start_evaluations: int = 0

    @property
    def evaluations(self) -> int:
        return self.records[-1].evaluations if self.records else self.start_evaluations

    def evaluations_to_gap(self, target: float) -> Optional[int]:
        """First cumulative evaluation count at which the gap is <= ``target``."""
        for rec in self.records:
            if rec.gap is not None and rec.gap <= target:
                return rec.evaluations
        return None

    def gaps(self) -> np.ndarray:
        return np.array([np.nan if r.gap is None else r.gap for r in self.records])


class StepResult(NamedTuple):
    point: np.ndarray
    value: float
    evaluations: int
    accepted_radius: Optional[float]
    nonfinite: int


def _optimum_value(oracle) -> Optional[float]:
    opt = getattr(oracle, "known_optimum", None)
    return None if opt is None else float(opt[1])


@functools.lru_cache(maxsize=256)
def _candidate_scales(ladder: RadiusLadder, effective_dim: int):
    rungs, scales = ladder.candidate_scales(effective_dim)
    rungs.setflags(write=False)
    scales.setflags(write=False)
    return rungs, scales


def gld_step(oracle, x, ladder: RadiusLadder, sampler: SamplerSpec, rng,
             fx: Optional[float] = None, effective_dim: Optional[int] = None,
             budget: Optional[int] = None) -> StepResult:
    """One GLD iteration: one candidate per rung (and latent dim), keep the best.

    Candidates at rung ``r`` use scale ``r / sqrt(effective_dim)``.  The
    incumbent wins exact ties, then earlier candidates win.  Non-finite
    candidate values count as evaluations but are never selected.
    ``budget`` caps how many candidates are evaluated; the full block is
    still drawn so the random stream does not depend on it.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterError("current iterate is not finite")
    if not ladder.radii:
        raise ParameterError("ladder is empty")
    used = 0
    if fx is None:
        fx = oracle.evaluate(x)
        used += 1
    eff = sampler.dim if effective_dim is None else int(effective_dim)
    rungs, scales = _candidate_scales(ladder, eff)
    candidates = sampler.draw(rng, x, scales)
    if budget is not None:
        candidates = candidates[: max(0, budget - used)]
        rungs = rungs[: candidates.shape[0]]
    if candidates.shape[0] == 0:
        return StepResult(x, fx, used, None, 0)

    finite_rows = np.all(np.isfinite(candidates), axis=1)
    values = np.full(candidates.shape[0], np.inf)
    if finite_rows.all():
        values[:] = oracle.evaluate_many(candidates)
    else:
        # overflowed coordinates still cost an evaluation each
        if finite_rows.any():
            values[finite_rows] = oracle.evaluate_many(candidates[finite_rows])
        oracle.charge(int((~finite_rows).sum()))
    used += candidates.shape[0]
    bad = ~np.isfinite(values)
    values[bad] = np.inf

    j = int(np.argmin(values))
    if values[j] < fx:
        return StepResult(candidates[j], float(values[j]), used, float(rungs[j]), int(bad.sum()))
    return StepResult(x, fx, used, None, int(bad.sum()))


@dataclass
class GldSearchConfig:
    """Settings for GLD-Search.

    ``R`` and ``r`` are rung values; the sampler divides them by
    ``sqrt(effective_dim)``.  ``latent_dims=True`` turns on the low-rank
    ladder extension over ``1, 2, 4, ..., n``.
    """

    max_iterations: int
    R: float
    r: float
    sampler: str = "gaussian"
    effective_dim: Optional[int] = None
    latent_dims: Union[bool, Sequence[int], None] = None
    max_evals: Optional[int] = None
    target_gap: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ParameterError("max_iterations must be >= 0")
        if not (0 < self.r <= self.R):
            raise ParameterError(f"need 0 < r <= R (got r={self.r}, R={self.R})")


def default_halving_period(dim: int, Q: float) -> int:
    """``max(1, ceil(n * Q * log2(max(Q, 2))))``; clamped so ``Q = 1`` still halves."""
    return max(1, math.ceil(dim * Q * math.log2(max(Q, 2.0)) - 1e-9))


@dataclass
class GldFastConfig:
    """Settings for GLD-Fast.

    ``halving_period`` defaults to :func:`default_halving_period` evaluated at
    ``effective_dim`` (``n`` when unset).
    """

    max_iterations: int
    initial_R: float
    Q_bound: float
    halving_period: Optional[int] = None
    sampler: str = "gaussian"
    effective_dim: Optional[int] = None
    latent_dims: Union[bool, Sequence[int], None] = None
    max_evals: Optional[int] = None
    target_gap: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ParameterError("max_iterations must be >= 0")
        if not (self.initial_R > 0):
            raise ParameterError("initial_R must be > 0")
        if not (self.Q_bound >= 1):
            raise ParameterError(f"Q_bound must be >= 1 (got {self.Q_bound})")
        if self.halving_period is not None and self.halving_period < 1:
            raise ParameterError("halving_period must be >= 1")


def _extend(ladder: RadiusLadder, latent_dims, n: int) -> RadiusLadder:
    if latent_dims is None or latent_dims is False:
        return ladder
    if latent_dims is True:
        return low_rank_ladder_extension(ladder, n)
    return RadiusLadder(ladder.radii, ladder.K, ladder.mode, tuple(int(d) for d in latent_dims))


def _run(oracle, x0, rng, T, ladder_at, sampler_kind, effective_dim, max_evals, target_gap,
         record_points) -> RunTrace:
    x = np.array(x0, dtype=float)
    n = x.shape[0]
    if n != oracle.dim:
        raise ParameterError(f"x0 has length {n}, oracle expects {oracle.dim}")
    trace = RunTrace(points=[x.copy()] if record_points else None)
    if T == 0 or (max_evals is not None and max_evals < 1):
        trace.final_point = x
        return trace

    sampler = SamplerSpec(sampler_kind, n)
    eff = n if effective_dim is None else int(effective_dim)
    f_star = _optimum_value(oracle)
    start = time.perf_counter()
    fx = oracle.evaluate(x)
    evals = 1
    trace.start_evaluations = 1
    for t in range(1, T + 1):
        ladder = ladder_at(t)
        budget = None if max_evals is None else max_evals - evals
        if budget is not None and budget <= 0:
            trace.truncated = True
            break
        step = gld_step(oracle, x, ladder, sampler, rng, fx=fx, effective_dim=eff, budget=budget)
        x, fx = step.point, step.value
        evals += step.evaluations
        gap = None if f_star is None else fx - f_star
        trace.records.append(TraceRecord(t, evals, fx, gap, step.accepted_radius, step.nonfinite,
                                         (time.perf_counter() - start) * 1e3))
        if record_points:
            trace.points.append(x.copy())
        if step.evaluations < ladder.candidates_per_iteration:
            trace.truncated = True
            break
        if target_gap is not None and gap is not None and gap <= target_gap:
            break
    trace.final_point = x
    trace.final_value = fx
    return trace


def gld_search_run(oracle, config: GldSearchConfig, x0, rng, record_points: bool = False) -> RunTrace:
    """GLD-Search: the same ladder ``R, R/2, ..., ~r`` every iteration."""
    n = len(x0)
    ladder = _extend(build_ladder_search(config.R, config.r), config.latent_dims, n)
    trace = _run(oracle, x0, rng, config.max_iterations, lambda t: ladder, config.sampler,
                 config.effective_dim, config.max_evals, config.target_gap, record_points)
    trace.meta.update(algorithm="gld-search", ladder_size=ladder.candidates_per_iteration,
                      R=config.R, r=config.r, sampler=config.sampler)
    return trace


def gld_fast_run(oracle, config: GldFastConfig, x0, rng, record_points: bool = False) -> RunTrace:
    """GLD-Fast: ladder of ``2K+1`` radii around ``R``; ``R`` halves every ``H`` iterations."""
    n = len(x0)
    eff = n if config.effective_dim is None else config.effective_dim
    H = config.halving_period or default_halving_period(eff, config.Q_bound)
    state = {"R": float(config.initial_R)}
    state["ladder"] = _extend(build_ladder_fast(state["R"], config.Q_bound), config.latent_dims, n)

    def ladder_at(t):
        if t % H == 0:
            state["R"] /= 2.0
            state["ladder"] = _extend(build_ladder_fast(state["R"], config.Q_bound), config.latent_dims, n)
        return state["ladder"]

    trace = _run(oracle, x0, rng, config.max_iterations, ladder_at, config.sampler,
                 config.effective_dim, config.max_evals, config.target_gap, record_points)
    trace.meta.update(algorithm="gld-fast", halving_period=H, final_R=state["R"],
                      Q_bound=config.Q_bound, sampler=config.sampler)
    return trace
