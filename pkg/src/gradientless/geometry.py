"""Ball-intersection geometry and Monte Carlo checks of descent guarantees.

Exact side: spherical-cap volumes via the regularized incomplete beta
function.  Empirical side: seeded Monte Carlo estimates with binomial
standard errors.  Every estimator returns an :class:`Estimate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .sampling import RadiusLadder, as_generator, gaussian_offsets, uniform_ball_offsets

_CHUNK = 1 << 16


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    samples: int
    flags: tuple = ()

    @property
    def _se(self) -> float:
        # a zero-variance estimate (all hits or all misses) still has resolution 1/samples
        return max(self.stderr, 1.0 / self.samples)

    def within(self, target: float, k: float = 4.0) -> bool:
        return abs(self.value - target) <= k * self._se

    def at_least(self, bound: float, k: float = 4.0) -> bool:
        return self.value >= bound - k * self._se


def _binomial(hits: int, samples: int, flags=()) -> Estimate:
    p = hits / samples
    return Estimate(p, math.sqrt(p * (1.0 - p) / samples), samples, tuple(flags))


# -- incomplete beta ----------------------------------------------------------


def _beta_cf(x: float, a: float, b: float, eps: float = 1e-16, max_iter: int = 10_000) -> float:
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) by continued fraction, using I_x(a,b) = 1 - I_{1-x}(b,a) off the fast side."""
    if not (a > 0 and b > 0):
        raise ParameterError(f"a and b must be > 0 (got a={a}, b={b})")
    if not (0.0 <= x <= 1.0):
        raise ParameterError(f"x must lie in [0, 1] (got {x})")
    if x == 0.0 or x == 1.0:
        return float(x)
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(x, a, b) / a
    return 1.0 - math.exp(log_front) * _beta_cf(1.0 - x, b, a) / b


# -- two-ball geometry --------------------------------------------------------


@dataclass(frozen=True)
class BallPair:
    """Ball B1 of radius ``r1`` centered at the origin, B2 of radius ``r2`` at ``ell * e1``."""

    r1: float
    r2: float
    ell: float
    dim: int

    def __post_init__(self):
        if not (self.r1 > 0 and self.r2 > 0 and self.ell > 0):
            raise ParameterError("radii and center distance must be positive")
        if self.dim < 1:
            raise ParameterError("dim must be >= 1")

    @property
    def intersects(self) -> bool:
        return self.ell <= self.r1 + self.r2

    @property
    def b1_inside_b2(self) -> bool:
        return self.r2 >= self.ell + self.r1

    @property
    def b2_inside_b1(self) -> bool:
        return self.r1 >= self.ell + self.r2

    def intersection_hypothesis(self, r2_slack: float = 4.0) -> bool:
        """``r1 in [ell/(2 sqrt n), ell/sqrt n]`` and ``r2 >= ell - ell/(slack * n)``."""
        s = math.sqrt(self.dim)
        lo, hi = self.ell / (2 * s), self.ell / s
        tol = 1e-12 * self.ell
        return (lo - tol <= self.r1 <= hi + tol
                and self.r2 >= self.ell - self.ell / (r2_slack * self.dim) - tol)


@dataclass(frozen=True)
class CapParams:
    c1: float
    beta_x: float
    a: float
    b: float


def cap_params(pair: BallPair) -> CapParams:
    """Radical-hyperplane offset ``c1`` from B1's center and the beta-function arguments."""
    c1 = (pair.ell ** 2 + pair.r1 ** 2 - pair.r2 ** 2) / (2 * pair.ell)
    beta_x = min(1.0, max(0.0, 1.0 - (c1 / pair.r1) ** 2))
    return CapParams(c1, beta_x, (pair.dim + 1) / 2.0, 0.5)


def _cap_fraction(offset: float, radius: float, dim: int) -> float:
    """Fraction of a ball lying beyond a hyperplane at signed distance ``offset`` from its center."""
    if offset >= radius:
        return 0.0
    if offset <= -radius:
        return 1.0
    half = 0.5 * regularized_incomplete_beta(1.0 - (offset / radius) ** 2, (dim + 1) / 2.0, 0.5)
    return half if offset >= 0 else 1.0 - half


@dataclass(frozen=True)
class CapResult:
    fraction: float
    complementary: bool = False
    degenerate: str = ""


def cap_fraction_exact(pair: BallPair) -> CapResult:
    """vol(C1) / vol(B1): the part of B1 on B2's side of the radical hyperplane.

    When the hyperplane passes behind B1's center (``c1 < 0``) the cap is
    more than a hemisphere and the complementary formula is used
    (``complementary=True``).  Full containment or disjointness is reported
    in ``degenerate``.
    """
    if not pair.intersects:
        return CapResult(0.0, degenerate="disjoint")
    if pair.b1_inside_b2:
        return CapResult(1.0, complementary=True, degenerate="b1_inside_b2")
    if pair.b2_inside_b1:
        return CapResult(0.0, degenerate="b2_inside_b1")
    c1 = cap_params(pair).c1
    return CapResult(_cap_fraction(c1, pair.r1, pair.dim), complementary=c1 < 0)


def intersection_fraction_exact(pair: BallPair) -> float:
    """vol(B1 ∩ B2) / vol(B1) as the sum of the two caps cut by the radical hyperplane."""
    if not pair.intersects:
        return 0.0
    if pair.b1_inside_b2:
        return 1.0
    if pair.b2_inside_b1:
        return (pair.r2 / pair.r1) ** pair.dim
    c1 = cap_params(pair).c1
    c2 = pair.ell - c1
    own = _cap_fraction(c1, pair.r1, pair.dim)
    other = _cap_fraction(c2, pair.r2, pair.dim)
    return own + other * (pair.r2 / pair.r1) ** pair.dim


def _chunks(total: int):
    done = 0
    while done < total:
        m = min(_CHUNK, total - done)
        yield m
        done += m


def _min_samples(samples: int, floor: int = 1000):
    if samples < floor:
        raise ParameterError(f"need at least {floor} samples (got {samples})")


def intersection_fraction_mc(pair: BallPair, samples: int, rng) -> Estimate:
    """Fraction of uniform samples from B1 that land in B2."""
    _min_samples(samples)
    gen = as_generator(rng)
    hits = 0
    for m in _chunks(samples):
        Y = uniform_ball_offsets(gen, pair.dim, np.full(m, pair.r1))
        Y[:, 0] -= pair.ell
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", Y, Y) <= pair.r2 ** 2))
    return _binomial(hits, samples)


def cap_fraction_mc(pair: BallPair, samples: int, rng) -> Estimate:
    """Fraction of uniform samples from B1 that lie in B2 and past the radical hyperplane."""
    _min_samples(samples)
    gen = as_generator(rng)
    c1 = cap_params(pair).c1
    hits = 0
    for m in _chunks(samples):
        Y = uniform_ball_offsets(gen, pair.dim, np.full(m, pair.r1))
        beyond = Y[:, 0] >= c1
        Y[:, 0] -= pair.ell
        inside = np.einsum("ij,ij->i", Y, Y) <= pair.r2 ** 2
        hits += int(np.count_nonzero(beyond & inside))
    return _binomial(hits, samples)


def gaussian_intersection_mc(pair: BallPair, samples: int, rng, r2_slack: float = 1.0,
                             floor: Optional[float] = None) -> Estimate:
    """P(X in B2) for X ~ N(center of B1, r1**2/n I).

    ``r2_slack`` selects the hypothesis ``r2 >= ell - ell/(slack*n)``
    (1 or 4).  A violated hypothesis adds ``"hypothesis_violated"`` to the
    flags; ``floor`` adds ``"above_floor"`` or ``"below_floor"``.
    """
    _min_samples(samples)
    gen = as_generator(rng)
    std = pair.r1 / math.sqrt(pair.dim)
    hits = 0
    for m in _chunks(samples):
        Y = gaussian_offsets(gen, pair.dim, np.full(m, std))
        Y[:, 0] -= pair.ell
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", Y, Y) <= pair.r2 ** 2))
    flags = []
    if not pair.intersection_hypothesis(r2_slack):
        flags.append("hypothesis_violated")
    est = _binomial(hits, samples, flags)
    if floor is not None:
        est = Estimate(est.value, est.stderr, est.samples,
                       est.flags + ("above_floor" if est.value > floor else "below_floor",))
    return est


# -- descent probability ------------------------------------------------------


def _values(objective, X: np.ndarray) -> np.ndarray:
    if hasattr(objective, "evaluate_many"):
        return objective.evaluate_many(X)
    return np.asarray(objective(X), dtype=float)


def descent_probability_mc(objective, x, rung: float, n: int, Q: float, samples: int, rng,
                           sampler: str = "uniform", x_star=None, f_star: Optional[float] = None) -> Estimate:
    """P[f(y) - f* <= (f(x) - f*)(1 - 1/(5nQ))] for one rung.

    ``y`` is uniform on ``B(x, rung/sqrt(n))`` or Gaussian with per-coordinate
    variance ``rung**2/n``.  The optimum comes from ``objective.known_optimum``
    unless ``x_star``/``f_star`` are given.
    """
    x = np.asarray(x, dtype=float)
    if x_star is None or f_star is None:
        opt = getattr(objective, "known_optimum", None)
        if opt is None:
            raise ParameterError("objective has no known optimum; pass x_star and f_star")
        x_star, f_star = opt
    if np.linalg.norm(x - np.asarray(x_star)) <= 1e-12:
        raise ParameterError("x coincides with the optimum")
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    gen = as_generator(rng)
    fx = float(_values(objective, x[None, :])[0])
    target = (fx - f_star) * (1.0 - 1.0 / (5.0 * n * Q))
    scale = rung / math.sqrt(n)
    hits = 0
    for m in _chunks(samples):
        if sampler == "uniform":
            off = uniform_ball_offsets(gen, x.shape[0], np.full(m, scale))
        elif sampler == "gaussian":
            off = gaussian_offsets(gen, x.shape[0], np.full(m, scale))
        else:
            raise ParameterError(f"unknown sampler {sampler!r}")
        hits += int(np.count_nonzero(_values(objective, x + off) - f_star <= target))
    return _binomial(hits, samples)


@dataclass
class SweepResult:
    best: Estimate
    best_rung: float
    per_rung: list = field(default_factory=list)


def descent_probability_sweep(objective, x, ladder: RadiusLadder, n: int, Q: float, samples: int, rng,
                              sampler: str = "uniform", **kw) -> SweepResult:
    """Max over ladder rungs of :func:`descent_probability_mc`."""
    per_rung = [(r, descent_probability_mc(objective, x, r, n, Q, samples, rng, sampler, **kw))
                for r in ladder.radii]
    rung, best = max(per_rung, key=lambda p: p[1].value)
    return SweepResult(best, rung, per_rung)


# -- lower-bound probe --------------------------------------------------------


def lower_bound_factor(n: int, Q: float) -> float:
    """Required decrease factor ``1 - sqrt(5 ln(nQ)) / (nQ)``."""
    return 1.0 - math.sqrt(5.0 * math.log(n * Q)) / (n * Q)


def large_rung_threshold(n: int, Q: float, c: float = 10.0) -> float:
    """Smallest rung with ``Q * rung * n >= c * sqrt(ln(nQ))``."""
    return c * math.sqrt(math.log(n * Q)) / (Q * n)


def lower_bound_probe(n: int, Q: float, rung: float, samples: int, rng) -> Estimate:
    """Success probability on the ellipsoid ``x^T D x`` with ``D = diag(1, Q, ..., Q)``.

    Each sample draws a fresh start ``x`` uniformly from the box
    ``x1 in [0.9, 1]``, ``|x_i| <= 0.1/(Q sqrt n)``, steps to
    ``y = x + rung * v`` with standard Gaussian ``v``, and succeeds when
    ``f(y) <= f(x) * lower_bound_factor(n, Q)``.
    """
    if n < 2 or not (Q >= 1):
        raise ParameterError("need n >= 2 and Q >= 1")
    if rung < 0:
        raise ParameterError("rung must be >= 0")
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    gen = as_generator(rng)
    D = np.full(n, float(Q))
    D[0] = 1.0
    factor = lower_bound_factor(n, Q)
    box = 0.1 / (Q * math.sqrt(n))
    hits = 0
    for m in _chunks(samples):
        X = gen.uniform(-box, box, size=(m, n))
        X[:, 0] = gen.uniform(0.9, 1.0, size=m)
        Y = X + rung * gen.standard_normal((m, n))
        fx = (X * X) @ D
        fy = (Y * Y) @ D
        hits += int(np.count_nonzero(fy <= fx * factor))
    regime = "large" if Q * rung * n >= 10.0 * math.sqrt(math.log(n * Q)) else "small"
    return _binomial(hits, samples, (f"regime={regime}",))


# -- grids --------------------------------------------------------------------

GRID_DIMS = (1, 2, 5, 10, 50)


def hypothesis_grid(dims=GRID_DIMS, ells=(1.0, 3.0)) -> list[BallPair]:
    """Two-ball configurations around the intersection-bound hypothesis.

    Radii of B1 sweep ``[ell/(2 sqrt n), ell/sqrt n]``; radii of B2 include the
    tight ``ell - ell/(4n)``, the looser ``ell - ell/n`` and two larger values.
    """
    pairs = []
    for n in dims:
        s = math.sqrt(n)
        for ell in ells:
            for f1 in (0.5, 0.75, 1.0):
                r1 = f1 * ell / s
                for r2 in (ell - ell / (4 * n), ell - ell / n, ell, ell + 0.5 * r1):
                    if r2 > 0:
                        pairs.append(BallPair(r1, r2, ell, n))
    return pairs


def oracle_grid() -> list[BallPair]:
    """20 configurations (4 per dimension) whose cap is at most a hemisphere."""
    pairs = []
    for n in GRID_DIMS:
        s = math.sqrt(n)
        pairs += [
            BallPair(0.5 / s, 1 - 1 / (4 * n), 1.0, n),
            BallPair(1.0 / s, 1 - 1 / (4 * n), 1.0, n),
            BallPair(1.5 / s, 2.0, 2.0, n),
            BallPair(0.6, 0.9, 1.0, n),
        ]
    return pairs


def verify_geometry(samples: int, rng, r2_slack: float = 4.0) -> list[dict]:
    """Run the hypothesis grid and the oracle grid; one dict per grid point."""
    gen = as_generator(rng)
    rows = []
    for grid_name, grid in (("intersection", hypothesis_grid()), ("oracle", oracle_grid())):
        for pair in grid:
            cap = cap_fraction_exact(pair)
            inter = intersection_fraction_exact(pair)
            mc = intersection_fraction_mc(pair, samples, gen)
            cap_mc = cap_fraction_mc(pair, samples, gen)
            hyp = pair.intersection_hypothesis(r2_slack)
            rows.append({
                "grid": grid_name,
                "dim": pair.dim,
                "r1": pair.r1,
                "r2": pair.r2,
                "ell": pair.ell,
                "hypothesis": hyp,
                "c1": cap_params(pair).c1,
                "cap_exact": cap.fraction,
                "cap_mc": cap_mc.value,
                "cap_stderr": cap_mc.stderr,
                "intersection_exact": inter,
                "fraction": mc.value,
                "stderr": mc.stderr,
                "bound": 0.125,
                "bound_satisfied": mc.at_least(0.125) if hyp else "",
                "meets_quarter": mc.at_least(0.25) if hyp else "",
                "exact_agrees": mc.within(inter) and cap_mc.within(cap.fraction),
            })
    return rows
