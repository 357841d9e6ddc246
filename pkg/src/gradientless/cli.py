"""Command-line entry point: ``gld run | experiment | verify-geometry | probe-lower-bound | summarize``.

Exit codes: 0 success, 1 bad parameters or usage, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from . import geometry, harness
from .baselines import ARS_VARIANTS, MisestimationVariant, apply_misestimation
from .errors import DomainError, ParameterError
from .objectives import BENCHMARKS, build_benchmark, build_quadratic, wrap_monotone
from .sampling import SeededRng

EXIT_OK, EXIT_PARAM, EXIT_IO = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    seed_default = harness.default_seed()
    p = _Parser(prog="gld", description="Gradient-free optimization with GradientLess Descent.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="single optimizer run, writes a trace CSV")
    r.add_argument("--algo", choices=harness.ALGORITHMS + ARS_VARIANTS, default="gld-fast")
    r.add_argument("--dim", type=int, required=True)
    r.add_argument("--alpha", type=float, default=1.0)
    r.add_argument("--beta", type=float, default=8.0)
    r.add_argument("--q", type=float, default=None,
                   help="condition-number bound given to GLD-Fast (default beta/alpha)")
    r.add_argument("--z", type=float, default=1.0, help="misestimation factor for ars-* variants")
    r.add_argument("--objective", choices=("quadratic",) + tuple(BENCHMARKS), default="quadratic")
    r.add_argument("--transform", action="store_true", help="optimize -exp(-sqrt(f)) instead of f")
    r.add_argument("--sampler", choices=("gaussian", "uniform"), default="gaussian")
    r.add_argument("--seed", type=int, default=seed_default)
    r.add_argument("--max-evals", type=int, default=100_000)
    r.add_argument("--target-gap", type=float, default=None)
    r.add_argument("--out", required=True)

    e = sub.add_parser("experiment", help="run a named experiment from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--out", default=None, help="override the config's output path")
    e.add_argument("--jobs", type=int, default=None)

    g = sub.add_parser("verify-geometry", help="ball-intersection and cap-volume grid checks")
    g.add_argument("--samples", type=int, default=100_000)
    g.add_argument("--seed", type=int, default=seed_default)
    g.add_argument("--slack", type=float, default=4.0, help="r2 slack factor in the intersection hypothesis")
    g.add_argument("--out", required=True)

    lb = sub.add_parser("probe-lower-bound", help="descent probability on the hard ellipsoid")
    lb.add_argument("--dim", type=int, default=100)
    lb.add_argument("--q", type=float, default=10.0)
    lb.add_argument("--rung", type=float, action="append", default=None,
                    help="rung(s) to probe; default: small control, large threshold, 1.0")
    lb.add_argument("--samples", type=int, default=10_000)
    lb.add_argument("--seed", type=int, default=seed_default)
    lb.add_argument("--out", default=None)

    s = sub.add_parser("summarize", help="aggregate trace CSVs")
    s.add_argument("paths", nargs="+")
    s.add_argument("--target", type=float, default=1e-3)
    s.add_argument("--out", required=True)
    return p


def _cmd_run(a) -> int:
    if a.dim < 1:
        raise ParameterError(f"--dim must be >= 1 (got {a.dim})")
    if not (a.alpha > 0 and a.beta > 0):
        raise ParameterError("need alpha > 0 and beta > 0")
    if a.alpha > a.beta:
        raise ParameterError(f"constraint alpha <= beta violated (alpha={a.alpha}, beta={a.beta})")
    if a.max_evals < 1:
        raise ParameterError("--max-evals must be >= 1")
    Q = a.beta / a.alpha
    Q_bound = Q if a.q is None else a.q
    if a.objective == "quadratic":
        oracle = build_quadratic(a.alpha, a.beta, a.dim).oracle()
        R = math.sqrt(Q)
    else:
        oracle = build_benchmark(a.objective, a.dim).oracle()
        R = 10.0
    if a.transform:
        oracle = wrap_monotone(oracle)
    alpha_hat, beta_hat, algo, variant = a.alpha, a.beta, a.algo, ""
    if a.algo in ARS_VARIANTS:
        alpha_hat, beta_hat = apply_misestimation(a.alpha, a.beta, MisestimationVariant(a.algo, a.z))
        algo, variant = "ars", f"{a.algo} z={a.z:g}"
    x0 = harness.standard_start(a.dim)

    out = Path(a.out)
    harness._check_writable(out)
    trace = harness.run_optimizer(algo, oracle, x0, a.seed, Q_bound=Q_bound, R=R, alpha_hat=alpha_hat,
                                  beta_hat=beta_hat, max_evals=a.max_evals, sampler=a.sampler,
                                  target_gap=a.target_gap)
    status = "truncated" if trace.truncated else "ok"
    head = ["run", a.algo, variant, a.dim, Q_bound, a.seed]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(harness.TRACE_COLUMNS)
        for rec in trace.records:
            w.writerow([harness._fmt(v) for v in head + [rec.iteration, rec.evaluations, rec.best_value,
                                                         rec.gap, status, round(rec.wall_time_ms, 3)]])
    logging.info("%d evaluations, final value %r", trace.evaluations, trace.final_value)
    return EXIT_OK


def _cmd_experiment(a) -> int:
    spec = harness.ExperimentSpec.from_json(a.config)
    if a.jobs is not None:
        spec.jobs = a.jobs
    harness.run_experiment(spec, a.out)
    return EXIT_OK


def _write_rows(path, cols, rows):
    path = Path(path)
    harness._check_writable(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        w.writerows([[harness._fmt(v) for v in row] for row in rows])


def _cmd_verify_geometry(a) -> int:
    if a.samples < 1:
        raise ParameterError("--samples must be >= 1")
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    open(a.out, "w").close()  # fail on an unwritable path before sampling
    rows = geometry.verify_geometry(a.samples, SeededRng(a.seed), r2_slack=a.slack)
    cols = tuple(rows[0].keys())
    _write_rows(a.out, cols, [[r[c] for c in cols] for r in rows])
    return EXIT_OK


def _cmd_probe(a) -> int:
    n, Q = a.dim, a.q
    if n < 2 or Q < 1:
        raise ParameterError("need dim >= 2 and q >= 1")
    rungs = a.rung or [math.sqrt(math.log(n * Q)) / (n * Q), geometry.large_rung_threshold(n, Q), 1.0]
    rows = []
    for i, rung in enumerate(rungs):
        est = geometry.lower_bound_probe(n, Q, rung, a.samples, SeededRng(a.seed).spawn(i))
        rows.append([n, Q, rung, est.flags[0].split("=")[1], est.value, est.stderr,
                     geometry.lower_bound_factor(n, Q)])
    cols = ("dim", "Q", "rung", "regime", "probability", "stderr", "required_factor")
    if a.out:
        _write_rows(a.out, cols, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(cols)
        w.writerows([[harness._fmt(v) for v in row] for row in rows])
    return EXIT_OK


def _cmd_summarize(a) -> int:
    harness.summarize_traces(a.paths, a.out, target=a.target)
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "experiment": _cmd_experiment,
    "verify-geometry": _cmd_verify_geometry,
    "probe-lower-bound": _cmd_probe,
    "summarize": _cmd_summarize,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_PARAM
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_PARAM
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ParameterError, DomainError, ValueError, TypeError) as exc:
        print(f"gld: error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except OSError as exc:
        print(f"gld: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
