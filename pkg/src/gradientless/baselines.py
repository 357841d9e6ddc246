"""Accelerated random search (two-point random gradient-free method).

Nesterov-style estimate-sequence acceleration driven by a forward-difference
directional derivative along a fresh Gaussian direction each iteration.
It needs the strong convexity and smoothness constants up front, which is
why the misestimation variants exist.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .gld import RunTrace, TraceRecord
from .sampling import as_generator

ARS_VARIANTS = ("ars-alpha", "ars-beta", "ars-even")


@dataclass
class ArsConfig:
    alpha_hat: float
    beta_hat: float
    max_iterations: int
    mu: Optional[float] = None
    max_evals: Optional[int] = None
    target_gap: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.alpha_hat <= self.beta_hat):
            raise ParameterError(f"need 0 < alpha_hat <= beta_hat (got {self.alpha_hat}, {self.beta_hat})")
        if self.mu is not None and not (self.mu > 0):
            raise ParameterError("mu must be > 0")
        if self.max_iterations < 0:
            raise ParameterError("max_iterations must be >= 0")


def default_mu(R: float, n: int) -> float:
    return 1e-6 * R / math.sqrt(n)


@dataclass(frozen=True)
class MisestimationVariant:
    kind: str
    z: float

    def __post_init__(self):
        if self.kind not in ARS_VARIANTS:
            raise ParameterError(f"unknown variant {self.kind!r}; choose from {ARS_VARIANTS}")
        if not (self.z >= 1):
            raise ParameterError(f"approximation factor z must be >= 1 (got {self.z})")


def apply_misestimation(alpha: float, beta: float, variant: MisestimationVariant) -> tuple[float, float]:
    z = variant.z
    if variant.kind == "ars-alpha":
        return alpha / z, beta
    if variant.kind == "ars-beta":
        return alpha, z * beta
    rz = math.sqrt(z)
    return alpha / rz, rz * beta


def misestimated_q_bound(Q: float, z: float) -> float:
    """Condition-number bound handed to GLD-Fast when the estimate is off by ``z``."""
    if not (z >= 1):
        raise ParameterError(f"approximation factor z must be >= 1 (got {z})")
    return Q * z


def ars_run(oracle, config: ArsConfig, x0, rng, R: Optional[float] = None) -> RunTrace:
    """Run accelerated random search; two evaluations per iteration.

    The trace follows the best point evaluated so far.  A non-finite
    evaluation rejects the step (state unchanged) and is flagged in the
    record's ``nonfinite`` count.
    """
    gen = as_generator(rng)
    x = np.array(x0, dtype=float)
    n = x.shape[0]
    if n != oracle.dim:
        raise ParameterError(f"x0 has length {n}, oracle expects {oracle.dim}")
    sigma, L = config.alpha_hat, config.beta_hat
    mu = config.mu if config.mu is not None else default_mu(R if R is not None else 1.0, n)
    theta = 1.0 / (16.0 * (n + 1) ** 2 * L)
    h = 1.0 / (4.0 * (n + 4) * L)
    gamma = L
    v = x.copy()

    f_star = None if oracle.known_optimum is None else float(oracle.known_optimum[1])
    trace = RunTrace(final_point=x.copy())
    trace.meta.update(algorithm="ars", alpha_hat=sigma, beta_hat=L, mu=mu)
    best_x, best_f = x.copy(), math.inf
    evals = 0
    start = time.perf_counter()
    for t in range(1, config.max_iterations + 1):
        if config.max_evals is not None and evals + 2 > config.max_evals:
            trace.truncated = True
            break
        # alpha solves alpha^2 = theta * ((1 - alpha) gamma + alpha sigma)
        b = theta * (gamma - sigma)
        a = 0.5 * (-b + math.sqrt(b * b + 4.0 * theta * gamma))
        gamma_next = (1.0 - a) * gamma + a * sigma
        lam = a * sigma / gamma_next
        y = (a * gamma * v + gamma_next * x) / (gamma + a * sigma)
        u = gen.standard_normal(n)
        pts = np.stack([y, y + mu * u])
        nonfinite = 0
        if np.all(np.isfinite(pts)):
            fy, fyu = oracle.evaluate_many(pts)
        else:
            oracle.charge(2)
            fy = fyu = math.nan
        evals += 2
        if math.isfinite(fy) and math.isfinite(fyu):
            for p, fp in ((y, fy), (pts[1], fyu)):
                if fp < best_f:
                    best_x, best_f = p.copy(), fp
            g = ((fyu - fy) / mu) * u
            x_next = y - h * g
            v = (1.0 - lam) * v + lam * y - (theta / a) * g
            x = x_next
            gamma = gamma_next
        else:
            nonfinite = 2 - int(math.isfinite(fy)) - int(math.isfinite(fyu))
        gap = None if f_star is None or not math.isfinite(best_f) else best_f - f_star
        trace.records.append(TraceRecord(t, evals, best_f, gap, None, nonfinite,
                                         (time.perf_counter() - start) * 1e3))
        if config.target_gap is not None and gap is not None and gap <= config.target_gap:
            break
    trace.final_point = best_x
    trace.final_value = best_f if math.isfinite(best_f) else None
    trace.meta["last_iterate"] = x
    return trace
