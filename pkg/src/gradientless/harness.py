"""Experiment runner: builds objectives and optimizers, writes CSV traces.

Trace CSV columns (fixed order) are :data:`TRACE_COLUMNS`.  Floats are
written with ``repr`` so output is byte-stable for fixed seeds; only
``wall_time_ms`` varies between invocations.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import geometry
from .baselines import (
    ARS_VARIANTS,
    ArsConfig,
    MisestimationVariant,
    apply_misestimation,
    ars_run,
    default_mu,
    misestimated_q_bound,
)
from .errors import ParameterError
from .gld import GldFastConfig, GldSearchConfig, RunTrace, gld_fast_run, gld_search_run
from .objectives import BENCHMARKS, build_benchmark, build_low_rank, build_quadratic, wrap_monotone
from .sampling import SeededRng, build_ladder_search

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "experiment", "algorithm", "variant", "dim", "Q", "seed", "iteration",
    "evaluations", "best_value", "optimality_gap", "status", "wall_time_ms",
)
SUMMARY_COLUMNS = (
    "experiment", "algorithm", "variant", "dim", "Q", "runs", "reached",
    "median_evals_to_target", "gap_min", "gap_q25", "gap_median", "gap_q75", "gap_max",
)
EXPERIMENTS = (
    "ConvergenceByDim", "MonotoneTransform", "ConditionMisestimation", "LowRank",
    "DescentProbability", "GeometryGrid", "LowerBoundProbe", "BenchmarkSuite",
)
ALGORITHMS = ("gld-search", "gld-fast", "ars")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def default_seed() -> int:
    return int(os.environ.get("GLD_SEED", "0"))


@dataclass
class ExperimentSpec:
    name: str
    dims: list = field(default_factory=lambda: [10, 20, 50, 100])
    alpha: float = 1.0
    beta: float = 8.0
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    seeds: list = field(default_factory=lambda: list(range(10)))
    max_evals: int = 100_000
    target_gap: float = 1e-3
    output: str = "trace.csv"
    # experiment-specific knobs
    approx_factors: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    latent_dim: int = 5
    delta: float = 0.0
    functions: list = field(default_factory=lambda: list(BENCHMARKS))
    samples: int = 100_000
    min_radius_ratio: float = 1e-6
    sampler: str = "gaussian"
    halving_period: Optional[int] = None
    jobs: int = 1

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.name!r}; choose from {EXPERIMENTS}")
        if not self.dims or not self.seeds or not self.algorithms:
            raise ParameterError("dims, seeds and algorithms must be nonempty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ParameterError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if self.max_evals < 1:
            raise ParameterError("max_evals must be >= 1")
        if not (0 < self.alpha <= self.beta):
            raise ParameterError(f"need 0 < alpha <= beta (got alpha={self.alpha}, beta={self.beta})")
        if any(int(d) != d or d < 1 for d in self.dims):
            raise ParameterError("dims must be positive integers")

    @property
    def Q(self) -> float:
        return self.beta / self.alpha

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- single runs --------------------------------------------------------------


def standard_start(n: int) -> np.ndarray:
    return np.full(n, 1.0 / math.sqrt(n))


def run_optimizer(algorithm: str, oracle, x0, seed: int, *, Q_bound: float, R: float,
                  alpha_hat: float, beta_hat: float, max_evals: int,
                  min_radius_ratio: float = 1e-6, sampler: str = "gaussian",
                  halving_period: Optional[int] = None, latent_dims=None,
                  target_gap: Optional[float] = None, record_points: bool = False) -> RunTrace:
    """One optimizer run on ``oracle`` with the standard quadratic-suite setup.

    ``R`` is the search diameter: GLD-Search sweeps ``[R * min_radius_ratio, R]``,
    GLD-Fast starts its ladder at ``R``, ARS uses it to size the smoothing step.
    """
    rng = SeededRng(seed)
    n = len(x0)
    T = max_evals  # the evaluation budget always binds first
    if algorithm == "gld-search":
        cfg = GldSearchConfig(T, R, R * min_radius_ratio, sampler=sampler, latent_dims=latent_dims,
                              max_evals=max_evals, target_gap=target_gap)
        return gld_search_run(oracle, cfg, x0, rng, record_points=record_points)
    if algorithm == "gld-fast":
        cfg = GldFastConfig(T, R, Q_bound, halving_period=halving_period, sampler=sampler,
                            latent_dims=latent_dims, max_evals=max_evals, target_gap=target_gap)
        return gld_fast_run(oracle, cfg, x0, rng, record_points=record_points)
    if algorithm == "ars":
        cfg = ArsConfig(alpha_hat, beta_hat, T, mu=default_mu(R, n), max_evals=max_evals,
                        target_gap=target_gap)
        return ars_run(oracle, cfg, x0, rng, R=R)
    raise ParameterError(f"unknown algorithm {algorithm!r}")


@dataclass
class Task:
    experiment: str
    algorithm: str
    variant: str
    dim: int
    Q: float
    seed: int
    kwargs: dict


def _quadratic_oracle(spec: ExperimentSpec, n: int, transform: bool = False):
    o = build_quadratic(spec.alpha, spec.beta, n).oracle()
    return wrap_monotone(o) if transform else o


def _tasks(spec: ExperimentSpec) -> list[Task]:
    Q = spec.Q
    tasks = []
    for n in spec.dims:
        for algo in spec.algorithms:
            for seed in spec.seeds:
                base = dict(objective="quadratic", transform=False, Q_bound=Q, R=math.sqrt(Q),
                            alpha_hat=spec.alpha, beta_hat=spec.beta)
                if spec.name == "ConvergenceByDim":
                    tasks.append(Task(spec.name, algo, "", n, Q, seed, base))
                elif spec.name == "MonotoneTransform":
                    for tf in (False, True):
                        tasks.append(Task(spec.name, algo, "neg_exp_neg_sqrt" if tf else "identity",
                                          n, Q, seed, {**base, "transform": tf}))
                elif spec.name == "ConditionMisestimation":
                    for z in spec.approx_factors:
                        if algo == "ars":
                            for kind in ARS_VARIANTS:
                                a, b = apply_misestimation(spec.alpha, spec.beta, MisestimationVariant(kind, z))
                                tasks.append(Task(spec.name, kind, f"z={z:g}", n, Q, seed,
                                                  {**base, "alpha_hat": a, "beta_hat": b}))
                        else:
                            if algo == "gld-search" and z != spec.approx_factors[0]:
                                continue  # does not use the estimate
                            tasks.append(Task(spec.name, algo, f"z={z:g}", n, Q, seed,
                                              {**base, "Q_bound": misestimated_q_bound(Q, z)}))
                elif spec.name == "LowRank":
                    if algo == "ars":
                        variants = [("", None)]
                    else:
                        variants = [("isotropic", None), ("extended", True)]
                    for label, ext in variants:
                        tasks.append(Task(spec.name, algo, label, n, Q, seed,
                                          {**base, "objective": "lowrank", "latent_dims": ext}))
                elif spec.name == "BenchmarkSuite":
                    # fixed curvature guesses for every function: alpha 0.1, beta 10
                    for fn in spec.functions:
                        tasks.append(Task(spec.name, algo, fn, n, 100.0, seed,
                                          {**base, "objective": fn, "Q_bound": 100.0, "R": 10.0,
                                           "alpha_hat": 0.1, "beta_hat": 10.0}))
    return tasks


def _oracle_for(spec: ExperimentSpec, task: Task):
    kw = task.kwargs
    n = task.dim
    if kw["objective"] == "quadratic":
        return _quadratic_oracle(spec, n, kw["transform"]), standard_start(n), None
    if kw["objective"] == "lowrank":
        k = spec.latent_dim
        lr = build_low_rank(n, k, build_quadratic(spec.alpha, spec.beta, k), spec.delta, seed=task.seed)
        x0 = lr.basis @ np.full(k, 1.0 / math.sqrt(k))
        return lr.oracle(), x0, lr
    fn = build_benchmark(kw["objective"], n)
    return fn.oracle(), standard_start(n), None


def execute_task(spec: ExperimentSpec, task: Task) -> list[list[str]]:
    """Run one task and return its CSV rows (never raises for run failures)."""
    kw = task.kwargs
    head = [task.experiment, task.algorithm, task.variant, task.dim, task.Q, task.seed]
    try:
        oracle, x0, lowrank = _oracle_for(spec, task)
        runner = "ars" if task.algorithm in ARS_VARIANTS else task.algorithm
        trace = run_optimizer(
            runner, oracle, x0, task.seed, Q_bound=kw["Q_bound"], R=kw["R"],
            alpha_hat=kw["alpha_hat"], beta_hat=kw["beta_hat"], max_evals=spec.max_evals,
            min_radius_ratio=spec.min_radius_ratio, sampler=spec.sampler,
            halving_period=spec.halving_period, latent_dims=kw.get("latent_dims"),
            record_points=lowrank is not None and spec.delta > 0,
        )
    except Exception as exc:  # one failed run must not sink the others
        log.warning("run %s failed: %s", head, exc)
        return [[_fmt(v) for v in head + ["", "", "", "", f"error: {exc}", ""]]]
    gaps = [r.gap for r in trace.records]
    if lowrank is not None and spec.delta > 0 and trace.points is not None:
        # perturbed objective has no known optimum: report the projected gap
        gaps = list(lowrank.projected_value(np.asarray(trace.points[1:])))
    status = "truncated" if trace.truncated else "ok"
    rows = []
    for rec, gap in zip(trace.records, gaps):
        rows.append([_fmt(v) for v in head + [rec.iteration, rec.evaluations, rec.best_value,
                                              gap, status, round(rec.wall_time_ms, 3)]])
    return rows


def _check_writable(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline=""):
        pass


def _geometry_rows(spec: ExperimentSpec) -> tuple[tuple, list[list]]:
    seed = spec.seeds[0]
    if spec.name == "GeometryGrid":
        rows = geometry.verify_geometry(spec.samples, SeededRng(seed))
        cols = tuple(rows[0].keys())
        return cols, [[r[c] for c in cols] for r in rows]
    if spec.name == "DescentProbability":
        cols = ("dim", "Q", "rung", "probability", "stderr", "best_rung", "max_probability")
        out = []
        for n in spec.dims:
            q = build_quadratic(spec.alpha, spec.beta, n)
            x = standard_start(n)
            x = x / math.sqrt(q(x)[0])  # unit optimality gap
            d = float(np.linalg.norm(x))
            ladder = build_ladder_search(d, d / (2 * q.condition_number))
            sweep = geometry.descent_probability_sweep(q, x, ladder, n, q.condition_number, spec.samples,
                                                       SeededRng(seed).spawn(n), x_star=np.zeros(n), f_star=0.0)
            for rung, est in sweep.per_rung:
                out.append([n, q.condition_number, rung, est.value, est.stderr, rung == sweep.best_rung,
                            sweep.best.value])
        return cols, out
    if spec.name == "LowerBoundProbe":
        cols = ("dim", "Q", "rung", "regime", "probability", "stderr")
        out = []
        Q = spec.Q
        for n in spec.dims:
            if n < 2:
                continue
            small = math.sqrt(math.log(n * Q)) / (n * Q)
            for rung in (small, geometry.large_rung_threshold(n, Q), 1.0):
                est = geometry.lower_bound_probe(n, Q, rung, spec.samples, SeededRng(seed).spawn(n))
                out.append([n, Q, rung, est.flags[0].split("=")[1], est.value, est.stderr])
        return cols, out
    raise ParameterError(f"{spec.name} is not a geometry experiment")


def run_experiment(spec: ExperimentSpec, output: Optional[str] = None) -> Path:
    """Run every (algorithm x dim x seed) cell of ``spec`` and write the CSV.

    Rows are written run by run in task order, so output is identical for
    any ``jobs`` setting.  A summary CSV (``<stem>_summary.csv``) is written
    next to trace outputs.
    """
    path = Path(output or spec.output)
    _check_writable(path)

    if spec.name in ("GeometryGrid", "DescentProbability", "LowerBoundProbe"):
        cols, rows = _geometry_rows(spec)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            w.writerows([[_fmt(v) for v in row] for row in rows])
        return path

    tasks = _tasks(spec)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        if spec.jobs > 1:
            with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                results = pool.map(execute_task, [spec] * len(tasks), tasks)
                for rows in results:
                    w.writerows(rows)
                    fh.flush()
        else:
            for task in tasks:
                w.writerows(execute_task(spec, task))
                fh.flush()
    summarize_traces([path], path.with_name(path.stem + "_summary.csv"), target=spec.target_gap)
    return path


# -- summaries ----------------------------------------------------------------


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = tuple(reader.fieldnames or ())
        if cols != TRACE_COLUMNS:
            missing = [c for c in TRACE_COLUMNS if c not in cols]
            extra = [c for c in cols if c not in TRACE_COLUMNS]
            offending = (missing or extra or [next(c for c, e in zip(cols, TRACE_COLUMNS) if c != e)])[0]
            raise ParameterError(f"{path}: trace schema mismatch at column {offending!r}")
        return list(reader)


def summarize_traces(paths: Sequence, output=None, target: float = 1e-3) -> list[dict]:
    """Per (experiment, algorithm, variant, dim, Q) cell: lower-median evaluations to ``target``
    and quantiles of the final gap.

    Runs that never reach the target count as infinitely slow; if the lower
    median is such a run the median column is left empty.
    """
    runs: dict = {}
    for p in paths:
        for row in read_trace_csv(p):
            if row["status"].startswith("error"):
                continue
            cell = (row["experiment"], row["algorithm"], row["variant"], row["dim"], row["Q"])
            key = cell + (row["seed"],)
            run = runs.setdefault(key, {"first": None, "final": None})
            gap = float(row["optimality_gap"]) if row["optimality_gap"] else None
            if gap is not None:
                run["final"] = gap
                if run["first"] is None and gap <= target:
                    run["first"] = int(row["evaluations"])
    cells: dict = {}
    for key, run in sorted(runs.items(), key=lambda kv: kv[0]):
        cells.setdefault(key[:-1], []).append(run)
    summary = []
    for cell, group in cells.items():
        evals = [r["first"] if r["first"] is not None else math.inf for r in group]
        finals = np.array([r["final"] for r in group if r["final"] is not None], dtype=float)
        med = statistics.median_low(evals)
        q = (np.quantile(finals, [0, 0.25, 0.5, 0.75, 1.0], method="lower")
             if finals.size else [None] * 5)
        summary.append(dict(zip(SUMMARY_COLUMNS, list(cell) + [
            len(group), sum(r["first"] is not None for r in group),
            None if math.isinf(med) else int(med), *[None if v is None else float(v) for v in q]])))
    if output is not None:
        with open(output, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for s in summary:
                w.writerow([_fmt(s[c]) for c in SUMMARY_COLUMNS])
    return summary


def strip_wall_time(text: str) -> str:
    """CSV text with the ``wall_time_ms`` column removed (for reproducibility checks)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or "wall_time_ms" not in rows[0]:
        return text
    i = rows[0].index("wall_time_ms")
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows([r[:i] + r[i + 1:] for r in rows])
    return buf.getvalue()
