"""Random streams, ball/Gaussian samplers and radius ladders."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError

# -- RNG ----------------------------------------------------------------------


class SeededRng:
    """PCG64 stream with an explicit seed and serializable state.

    Parallel runs use :meth:`spawn`, which derives an independent stream by
    hashing ``(seed, index)`` through :class:`numpy.random.SeedSequence`.
    """

    def __init__(self, seed: int, *, _key: Sequence[int] = ()):
        if int(seed) != seed or seed < 0 or seed >= 2 ** 64:
            raise ParameterError(f"seed must be an integer in [0, 2**64) (got {seed})")
        self.seed = int(seed)
        self._key = tuple(_key)
        entropy = (self.seed, *self._key) if self._key else self.seed
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def spawn(self, index: int) -> "SeededRng":
        return SeededRng(self.seed, _key=(*self._key, int(index)))

    @property
    def state(self) -> dict:
        return self.generator.bit_generator.state

    @state.setter
    def state(self, value: dict):
        self.generator.bit_generator.state = value

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, key={self._key})"


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return SeededRng(0 if rng is None else int(rng)).generator
    raise TypeError(f"not a random generator: {rng!r}")


# -- samplers -----------------------------------------------------------------


def _check_center(center) -> np.ndarray:
    center = np.asarray(center, dtype=float)
    if center.ndim != 1:
        raise ParameterError("center must be a 1-D point")
    return center


def uniform_ball_offsets(gen: np.random.Generator, dim: int, radii: np.ndarray) -> np.ndarray:
    """One offset per entry of ``radii``, uniform in the ball of that radius."""
    radii = np.asarray(radii, dtype=float)
    direction = gen.standard_normal((radii.shape[0], dim))
    norms = np.linalg.norm(direction, axis=1)
    norms[norms == 0] = 1.0
    u = gen.random(radii.shape[0])
    length = radii * u ** (1.0 / dim)
    return direction * (length / norms)[:, None]


def gaussian_offsets(gen: np.random.Generator, dim: int, stds: np.ndarray) -> np.ndarray:
    stds = np.asarray(stds, dtype=float)
    return gen.standard_normal((stds.shape[0], dim)) * stds[:, None]


def sample_uniform_ball(rng, center, radius: float, size: Optional[int] = None) -> np.ndarray:
    """Uniform sample(s) from the ball ``B(center, radius)``.

    Direction is a normalized Gaussian vector and the length is
    ``radius * U**(1/n)``, so no rejection is needed in any dimension.
    """
    if not (radius > 0):
        raise ParameterError(f"radius must be > 0 (got {radius})")
    center = _check_center(center)
    m = 1 if size is None else int(size)
    out = center + uniform_ball_offsets(as_generator(rng), center.shape[0], np.full(m, float(radius)))
    return out[0] if size is None else out


def sample_gaussian(rng, center, radius: float, effective_dim: int, size: Optional[int] = None) -> np.ndarray:
    """Sample(s) from ``N(center, radius**2 / effective_dim * I)``."""
    if not (radius > 0):
        raise ParameterError(f"radius must be > 0 (got {radius})")
    if int(effective_dim) != effective_dim or effective_dim < 1:
        raise ParameterError(f"effective_dim must be a positive integer (got {effective_dim})")
    center = _check_center(center)
    m = 1 if size is None else int(size)
    std = radius / math.sqrt(effective_dim)
    out = center + gaussian_offsets(as_generator(rng), center.shape[0], np.full(m, std))
    return out[0] if size is None else out


SAMPLER_KINDS = ("gaussian", "uniform")


@dataclass(frozen=True)
class SamplerSpec:
    """Which distribution a GLD step draws candidates from.

    ``draw`` takes one scale per candidate: the ball radius for ``uniform``,
    the per-coordinate standard deviation for ``gaussian``.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ParameterError(f"unknown sampler {self.kind!r}; choose from {SAMPLER_KINDS}")
        if self.dim < 1:
            raise ParameterError("sampler dim must be >= 1")

    def draw(self, rng, center: np.ndarray, scales: np.ndarray) -> np.ndarray:
        gen = as_generator(rng)
        if self.kind == "uniform":
            return center + uniform_ball_offsets(gen, self.dim, scales)
        return center + gaussian_offsets(gen, self.dim, scales)


# -- radius ladders -----------------------------------------------------------


@dataclass(frozen=True)
class RadiusLadder:
    """Geometric radii swept in one GLD iteration, largest first.

    ``latent_dims``, when set, lists the candidate latent dimensions sampled
    at every rung (see :func:`low_rank_ladder_extension`).
    """

    radii: tuple
    K: int
    mode: str
    latent_dims: Optional[tuple] = None

    def __len__(self):
        return len(self.radii)

    @property
    def candidates_per_iteration(self) -> int:
        return len(self.radii) * (1 if self.latent_dims is None else len(self.latent_dims))

    def candidate_scales(self, effective_dim: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-candidate ``(rung, scale)`` arrays, rung-major.

        Each candidate's scale is ``rung / sqrt(d)`` where ``d`` is
        ``effective_dim`` or, for an extended ladder, each latent dim in turn.
        """
        radii = np.asarray(self.radii, dtype=float)
        dims = (effective_dim,) if self.latent_dims is None else self.latent_dims
        d = np.sqrt(np.asarray(dims, dtype=float))
        rungs = np.repeat(radii, len(dims))
        scales = (radii[:, None] / d[None, :]).ravel()
        return rungs, scales


def _ceil_log2(ratio: float) -> int:
    # tolerate representation error so exact powers of two are not bumped up
    return max(0, math.ceil(math.log2(ratio) - 1e-12))


def build_ladder_search(R: float, r: float) -> RadiusLadder:
    """Radii ``R, R/2, ..., R/2**K`` with ``K = ceil(log2(R/r))``."""
    if not (r > 0 and math.isfinite(R)):
        raise ParameterError(f"need 0 < r <= R (got r={r}, R={R})")
    if r > R:
        raise ParameterError(f"minimum radius r={r} exceeds maximum radius R={R}")
    K = _ceil_log2(R / r)
    return RadiusLadder(tuple(math.ldexp(R, -k) for k in range(K + 1)), K, "search")


def build_ladder_fast(R: float, Q: float) -> RadiusLadder:
    """Radii ``2**K R, ..., R, ..., 2**-K R`` with ``K = ceil(log2(4 sqrt(Q)))``."""
    if not (R > 0 and math.isfinite(R)):
        raise ParameterError(f"R must be positive and finite (got {R})")
    if not (Q >= 1):
        raise ParameterError(f"condition number bound must be >= 1 (got {Q})")
    K = _ceil_log2(4.0 * math.sqrt(Q))
    return RadiusLadder(tuple(math.ldexp(R, -k) for k in range(-K, K + 1)), K, "fast")


def latent_dim_candidates(n: int) -> tuple:
    """Powers of two below ``n``, then ``n`` itself."""
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer (got {n})")
    dims = []
    d = 1
    while d < n:
        dims.append(d)
        d *= 2
    dims.append(int(n))
    return tuple(dims)


def low_rank_ladder_extension(ladder: RadiusLadder, n: int) -> RadiusLadder:
    """Sweep every rung at each candidate latent dimension ``1, 2, 4, ..., n``.

    Used when the latent dimension is unknown; each iteration then costs
    ``len(ladder) * ceil(log2(n) + 1)`` evaluations.
    """
    if not ladder.radii:
        raise ParameterError("ladder is empty")
    return RadiusLadder(ladder.radii, ladder.K, ladder.mode, latent_dim_candidates(n))
