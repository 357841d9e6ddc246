"""Objective functions behind a counted black-box oracle.

Everything an optimizer touches goes through :class:`ObjectiveOracle` (or a
:class:`MonotoneWrap` around one), so the evaluation counter is the single
source of truth for budgets.  Function kernels are plain vectorized callables
mapping an ``(m, n)`` array of points to ``m`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ParameterError

Kernel = Callable[[np.ndarray], np.ndarray]


def _as_point(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise ParameterError(f"expected a point of length {dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("point has non-finite coordinates")
    return x


def _as_points(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ParameterError(f"expected points of shape (m, {dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ParameterError("points have non-finite coordinates")
    return X


class ObjectiveOracle:
    """Counted evaluator for a function on R^n.

    ``eval_count`` goes up by one per point evaluated, whether the point comes
    in through :meth:`evaluate` or as a row of :meth:`evaluate_many`.
    Instances hold a mutable counter: use one oracle per run.
    """

    def __init__(
        self,
        kernel: Kernel,
        dim: int,
        known_optimum: Optional[tuple[np.ndarray, float]] = None,
        name: str = "objective",
    ):
        if dim < 1:
            raise ParameterError("dim must be >= 1")
        self.kernel = kernel
        self.dim = int(dim)
        self.name = name
        self.eval_count = 0
        if known_optimum is not None:
            x_star, f_star = known_optimum
            known_optimum = (np.asarray(x_star, dtype=float), float(f_star))
        self.known_optimum = known_optimum

    @property
    def optimum_value(self) -> Optional[float]:
        return None if self.known_optimum is None else self.known_optimum[1]

    def evaluate(self, x) -> float:
        x = _as_point(x, self.dim)
        self.eval_count += 1
        return float(self.kernel(x[None, :])[0])

    def evaluate_many(self, X) -> np.ndarray:
        X = _as_points(X, self.dim)
        self.eval_count += X.shape[0]
        return np.asarray(self.kernel(X), dtype=float)

    def charge(self, k: int) -> None:
        """Count ``k`` evaluations that could not be carried out (e.g. overflowed points)."""
        self.eval_count += int(k)

    __call__ = evaluate

    def __repr__(self):
        return f"ObjectiveOracle({self.name!r}, dim={self.dim}, evals={self.eval_count})"


# -- quadratics ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticSpec:
    """Diagonal quadratic ``f(x) = 0.5 * sum(diag * x**2)`` with evenly spaced curvatures."""

    alpha: float
    beta: float
    dim: int
    diag: np.ndarray = field(repr=False, compare=False)

    @property
    def condition_number(self) -> float:
        return self.beta / self.alpha

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return 0.5 * (X * X) @ self.diag

    def oracle(self) -> ObjectiveOracle:
        return ObjectiveOracle(
            self,
            self.dim,
            known_optimum=(np.zeros(self.dim), 0.0),
            name=f"quadratic(alpha={self.alpha:g}, beta={self.beta:g}, n={self.dim})",
        )


def build_quadratic(alpha: float, beta: float, dim: int) -> QuadraticSpec:
    """Build the quadratic whose i-th curvature is ``alpha + (beta - alpha)(i-1)/(n-1)``.

    For ``dim == 1`` the single curvature is ``alpha``.
    """
    if not (alpha > 0 and math.isfinite(alpha) and math.isfinite(beta)):
        raise ParameterError(f"alpha and beta must be finite with alpha > 0 (got {alpha}, {beta})")
    if not (beta >= alpha):
        raise ParameterError(f"need alpha <= beta (got alpha={alpha}, beta={beta})")
    if int(dim) != dim or dim < 1:
        raise ParameterError(f"dim must be a positive integer (got {dim})")
    dim = int(dim)
    if dim == 1:
        diag = np.array([float(alpha)])
    else:
        i = np.arange(dim, dtype=float)
        diag = alpha + (beta - alpha) * i / (dim - 1)
        diag[-1] = float(beta)
    diag.setflags(write=False)
    return QuadraticSpec(float(alpha), float(beta), dim, diag)


# -- monotone transforms ------------------------------------------------------


def _neg_exp_neg_sqrt(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("-exp(-sqrt(y)) needs y >= 0; inner objective returned a negative value")
    return -np.exp(-np.sqrt(y))


TRANSFORMS: dict[str, Callable] = {
    "identity": lambda y: np.asarray(y, dtype=float),
    "neg_exp_neg_sqrt": _neg_exp_neg_sqrt,
}


class MonotoneWrap:
    """``g(f(x))`` for a strictly increasing ``g``; counting stays with the inner oracle."""

    def __init__(self, inner: ObjectiveOracle, transform: Callable, transform_id: str = "custom"):
        self.inner = inner
        self.transform = transform
        self.transform_id = transform_id
        self.dim = inner.dim
        self.name = f"{transform_id}({inner.name})"
        if inner.known_optimum is not None:
            x_star, f_star = inner.known_optimum
            self.known_optimum = (x_star, float(transform(np.array([f_star]))[0]))
        else:
            self.known_optimum = None

    @property
    def eval_count(self) -> int:
        return self.inner.eval_count

    @property
    def optimum_value(self) -> Optional[float]:
        return None if self.known_optimum is None else self.known_optimum[1]

    def evaluate(self, x) -> float:
        return float(self.transform(np.array([self.inner.evaluate(x)]))[0])

    def evaluate_many(self, X) -> np.ndarray:
        return np.asarray(self.transform(self.inner.evaluate_many(X)), dtype=float)

    def charge(self, k: int) -> None:
        self.inner.charge(k)

    __call__ = evaluate


def evaluate_counted(oracle, x) -> float:
    """Evaluate ``oracle`` at ``x``, bumping its counter by one."""
    return oracle.evaluate(x)


def wrap_monotone(oracle: ObjectiveOracle, transform_id: str = "neg_exp_neg_sqrt",
                  transform: Optional[Callable] = None) -> MonotoneWrap:
    """Wrap ``oracle`` in a monotone transform.

    ``transform_id`` is ``"identity"``, ``"neg_exp_neg_sqrt"`` (``g(y) = -exp(-sqrt(y))``)
    or ``"custom"``, in which case ``transform`` must be given and must be
    strictly increasing and vectorized.
    """
    if transform_id == "custom":
        if transform is None:
            raise ParameterError("custom transform requires a callable")
        return MonotoneWrap(oracle, transform, "custom")
    try:
        g = TRANSFORMS[transform_id]
    except KeyError:
        raise ParameterError(f"unknown transform {transform_id!r}; choose from {sorted(TRANSFORMS)}") from None
    return MonotoneWrap(oracle, g, transform_id)


# -- low-rank composites ------------------------------------------------------


@dataclass(frozen=True)
class LowRankComposite:
    """``f(x) = g(A^T x) + h(x)`` with orthonormal ``A`` (n x k) and ``|h| <= delta``.

    ``g`` sees the latent coordinates of the projection ``A A^T x``.  The
    perturbation is ``h(x) = delta * sin(sum(x))``.
    """

    basis: np.ndarray = field(repr=False)
    inner_g: QuadraticSpec
    delta: float
    dim: int
    latent_dim: int

    @property
    def latent_condition_number(self) -> float:
        return self.inner_g.condition_number

    def latent(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.basis

    def perturbation(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.delta == 0:
            return np.zeros(X.shape[0])
        return self.delta * np.sin(X.sum(axis=1))

    def projected_value(self, X: np.ndarray) -> np.ndarray:
        """``g(P_A x)``, the unperturbed part."""
        return self.inner_g(self.latent(X))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.projected_value(X) + self.perturbation(X)

    def oracle(self) -> ObjectiveOracle:
        optimum = (np.zeros(self.dim), 0.0) if self.delta == 0 else None
        return ObjectiveOracle(self, self.dim, known_optimum=optimum,
                               name=f"lowrank(n={self.dim}, k={self.latent_dim}, delta={self.delta:g})")


def random_orthonormal(dim: int, k: int, seed) -> np.ndarray:
    """Orthonormal n x k matrix from the QR factorization of a seeded Gaussian matrix."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((dim, k))
    A, R = np.linalg.qr(G)
    # fix the sign convention so the result depends only on G
    A = A * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    if np.max(np.abs(np.linalg.norm(A, axis=0) - 1.0)) > 1e-10:
        A, _ = np.linalg.qr(A)
    return A


def build_low_rank(dim: int, latent_dim: int, inner_spec: QuadraticSpec, delta: float = 0.0,
                   seed=0, basis: Optional[np.ndarray] = None) -> LowRankComposite:
    if not (1 <= latent_dim < dim):
        raise ParameterError(f"need 1 <= latent_dim < dim (got k={latent_dim}, n={dim})")
    if inner_spec.dim != latent_dim:
        raise ParameterError(f"inner quadratic has dim {inner_spec.dim}, expected {latent_dim}")
    if delta < 0 or not math.isfinite(delta):
        raise ParameterError(f"delta must be finite and >= 0 (got {delta})")
    if basis is None:
        basis = random_orthonormal(dim, latent_dim, seed)
    else:
        basis = np.asarray(basis, dtype=float)
        if basis.shape != (dim, latent_dim):
            raise ParameterError(f"basis must have shape ({dim}, {latent_dim})")
        if np.max(np.abs(basis.T @ basis - np.eye(latent_dim))) > 1e-10:
            raise ParameterError("basis columns are not orthonormal")
    basis = np.array(basis)
    basis.setflags(write=False)
    return LowRankComposite(basis, inner_spec, float(delta), dim, latent_dim)


# -- benchmark functions ------------------------------------------------------
# Raw analytic forms with an optimum shift; no rotations or instance transforms.


def _rastrigin(Z):
    n = Z.shape[1]
    return 10.0 * n + np.sum(Z * Z - 10.0 * np.cos(2 * np.pi * Z), axis=1)


def _cond_weights(n, cond=1e6):
    if n == 1:
        return np.ones(1)
    return cond ** (np.arange(n) / (n - 1))


def _ellipsoidal(Z):
    return (Z * Z) @ _cond_weights(Z.shape[1])


def _bent_cigar(Z):
    return Z[:, 0] ** 2 + 1e6 * np.sum(Z[:, 1:] ** 2, axis=1)


def _discus(Z):
    return 1e6 * Z[:, 0] ** 2 + np.sum(Z[:, 1:] ** 2, axis=1)


def _different_powers(Z):
    n = Z.shape[1]
    expo = 2.0 + (4.0 * np.arange(n) / (n - 1) if n > 1 else np.zeros(1))
    return np.sqrt(np.sum(np.abs(Z) ** expo, axis=1))


def _sharp_ridge(Z):
    return Z[:, 0] ** 2 + 100.0 * np.sqrt(np.sum(Z[:, 1:] ** 2, axis=1))


def _schaffers_f7(Z):
    if Z.shape[1] == 1:
        s = np.abs(Z)
    else:
        s = np.sqrt(Z[:, :-1] ** 2 + Z[:, 1:] ** 2)
    root = np.sqrt(s)
    return np.mean(root + root * np.sin(50.0 * s ** 0.2) ** 2, axis=1) ** 2


def _katsuura(Z):
    n = Z.shape[1]
    powers = 2.0 ** np.arange(1, 33)
    scaled = Z[:, :, None] * powers
    inner = np.sum(np.abs(scaled - np.round(scaled)) / powers, axis=2)
    prod = np.prod((1.0 + np.arange(1, n + 1) * inner) ** (10.0 / n ** 1.2), axis=1)
    return 10.0 / n ** 2 * (prod - 1.0)


_WEIER_K = np.arange(12)


def _weierstrass_terms(Z):
    a = 0.5 ** _WEIER_K
    b = 3.0 ** _WEIER_K
    return np.sum(a * np.cos(2 * np.pi * b * (Z[..., None] + 0.5)), axis=-1)


_WEIER_F0 = float(_weierstrass_terms(np.zeros((1, 1)))[0, 0])


def _weierstrass(Z):
    return 10.0 * np.mean(_weierstrass_terms(Z) - _WEIER_F0, axis=1) ** 3


BENCHMARKS: dict[str, Kernel] = {
    "rastrigin": _rastrigin,
    "bent_cigar": _bent_cigar,
    "different_powers": _different_powers,
    "discus": _discus,
    "ellipsoidal": _ellipsoidal,
    "sharp_ridge": _sharp_ridge,
    "schaffers_f7": _schaffers_f7,
    "katsuura": _katsuura,
    "weierstrass": _weierstrass,
}


@dataclass(frozen=True)
class BenchmarkFunction:
    kind: str
    dim: int
    optimum_shift: np.ndarray = field(repr=False, compare=False)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        Z = np.atleast_2d(X) - self.optimum_shift
        return BENCHMARKS[self.kind](Z)

    def oracle(self) -> ObjectiveOracle:
        return ObjectiveOracle(self, self.dim, known_optimum=(self.optimum_shift.copy(), 0.0),
                               name=f"{self.kind}(n={self.dim})")


def build_benchmark(kind: str, dim: int, optimum_shift=None) -> BenchmarkFunction:
    if kind not in BENCHMARKS:
        raise ParameterError(f"unknown benchmark {kind!r}; choose from {sorted(BENCHMARKS)}")
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    shift = np.zeros(dim) if optimum_shift is None else np.asarray(optimum_shift, dtype=float)
    if shift.shape != (dim,):
        raise ParameterError(f"optimum_shift must have length {dim}")
    shift = shift.copy()
    shift.setflags(write=False)
    return BenchmarkFunction(kind, int(dim), shift)


def evaluate_benchmark(fn: BenchmarkFunction, x) -> float:
    x = _as_point(x, fn.dim)
    return float(fn(x[None, :])[0])
