"""Classical unimodal and multimodal benchmark objectives.

Every function is vectorized over a population: ``fn.batch(X)`` takes an
``(N, D)`` array and returns ``N`` fitness values.  All are minimized.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation, OutOfBoundsWarning

# f(x*) per dimension for Schwefel 2.26 and its per-coordinate minimizer
_SCHWEFEL_X = 420.96874635998205
_SCHWEFEL_F = -418.9828872724337


@dataclass(frozen=True, eq=False)
class ObjectiveFunction:
    """A bounded D-dimensional objective with an optional known minimum."""

    id: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    batch: Callable[..., np.ndarray] = field(repr=False)
    known_optimum: Optional[float] = None
    optimum_location: Optional[np.ndarray] = field(default=None, repr=False)
    modality: str = "unimodal"
    noisy: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ContractViolation(f"dim must be positive, got {self.dim}")
        if self.lower.shape != (self.dim,) or self.upper.shape != (self.dim,):
            raise ContractViolation("bounds must have shape (dim,)")
        if not np.all(self.lower < self.upper):
            raise ContractViolation(f"{self.id}: lower must be < upper")

    def in_bounds(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "dim": self.dim,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "known_optimum": self.known_optimum,
            "modality": self.modality,
        }


def evaluate(fn: ObjectiveFunction, x, rng: np.random.Generator | None = None) -> float:
    """Fitness of a single position.

    Out-of-bounds points are still evaluated; an ``OutOfBoundsWarning`` is
    emitted.  For the noisy quartic the noise term is drawn from ``rng``;
    with ``rng=None`` the noise term is omitted.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != fn.dim:
        raise ContractViolation(f"{fn.id} expects a vector of length {fn.dim}, got shape {x.shape}")
    if not fn.in_bounds(x):
        warnings.warn(f"{fn.id} evaluated outside its bounds", OutOfBoundsWarning, stacklevel=2)
    return float(fn.batch(x[None, :], rng)[0])


# --- function bodies, (N, D) -> (N,) ---------------------------------------

def _sphere(X, rng=None):
    return np.sum(X * X, axis=1)


def _schwefel_2_22(X, rng=None):
    a = np.abs(X)
    with np.errstate(divide="ignore"):
        logprod = np.sum(np.log(a), axis=1)
    # saturate instead of overflowing to inf at high dimension
    prod = np.exp(np.minimum(logprod, 709.0))
    return np.sum(a, axis=1) + prod


def _schwefel_1_2(X, rng=None):
    return np.sum(np.cumsum(X, axis=1) ** 2, axis=1)


def _schwefel_2_21(X, rng=None):
    return np.max(np.abs(X), axis=1)


def _rosenbrock(X, rng=None):
    return np.sum(100.0 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (X[:, :-1] - 1.0) ** 2, axis=1)


def _step(X, rng=None):
    return np.sum(np.floor(X + 0.5) ** 2, axis=1)


def _quartic(X, rng=None):
    i = np.arange(1, X.shape[1] + 1)
    f = np.sum(i * X**4, axis=1)
    if rng is not None:
        f = f + rng.random(X.shape[0])
    return f


def _sum_of_powers(X, rng=None):
    i = np.arange(2, X.shape[1] + 2)
    return np.sum(np.abs(X) ** i, axis=1)


def _zakharov(X, rng=None):
    s = np.sum(0.5 * np.arange(1, X.shape[1] + 1) * X, axis=1)
    return np.sum(X * X, axis=1) + s**2 + s**4


def _schwefel_2_26(X, rng=None):
    return np.sum(-X * np.sin(np.sqrt(np.abs(X))), axis=1)


def _rastrigin(X, rng=None):
    # 10 - 10 cos(2 pi x) == 20 sin^2(pi x); avoids cancellation near 0
    return np.sum(X * X + 20.0 * np.sin(np.pi * X) ** 2, axis=1)


def _ackley(X, rng=None):
    d = X.shape[1]
    r = np.sqrt(np.sum(X * X, axis=1) / d)
    c = np.sum(np.cos(2.0 * np.pi * X), axis=1) / d
    # expm1 forms give an exact 0 at the origin
    return -20.0 * np.expm1(-0.2 * r) - np.e * np.expm1(c - 1.0)


def _griewank(X, rng=None):
    i = np.sqrt(np.arange(1, X.shape[1] + 1))
    return np.sum(X * X, axis=1) / 4000.0 - np.prod(np.cos(X / i), axis=1) + 1.0


def _u(X, a, k, m):
    return np.sum(k * np.where(X > a, (X - a) ** m, 0.0) + k * np.where(X < -a, (-X - a) ** m, 0.0), axis=1)


def _penalized_1(X, rng=None):
    d = X.shape[1]
    y = 1.0 + (X + 1.0) / 4.0
    inner = np.sum((y[:, :-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * y[:, 1:]) ** 2), axis=1)
    f = (np.pi / d) * (10.0 * np.sin(np.pi * y[:, 0]) ** 2 + inner + (y[:, -1] - 1.0) ** 2)
    return f + _u(X, 10.0, 100.0, 4)


def _penalized_2(X, rng=None):
    inner = np.sum((X[:, :-1] - 1.0) ** 2 * (1.0 + np.sin(3.0 * np.pi * X[:, 1:]) ** 2), axis=1)
    last = (X[:, -1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * X[:, -1]) ** 2)
    f = 0.1 * (np.sin(3.0 * np.pi * X[:, 0]) ** 2 + inner + last)
    return f + _u(X, 5.0, 100.0, 4)


def _alpine(X, rng=None):
    return np.sum(np.abs(X * np.sin(X) + 0.1 * X), axis=1)


# id: (body, lower, upper, optimum location per coordinate, optimum per dim or None, modality, noisy)
_TABLE = {
    "sphere": (_sphere, -100.0, 100.0, 0.0, 0.0, "unimodal", False),
    "schwefel_2_22": (_schwefel_2_22, -10.0, 10.0, 0.0, 0.0, "unimodal", False),
    "schwefel_1_2": (_schwefel_1_2, -100.0, 100.0, 0.0, 0.0, "unimodal", False),
    "schwefel_2_21": (_schwefel_2_21, -100.0, 100.0, 0.0, 0.0, "unimodal", False),
    "rosenbrock": (_rosenbrock, -30.0, 30.0, 1.0, 0.0, "unimodal", False),
    "step": (_step, -100.0, 100.0, 0.0, 0.0, "unimodal", False),
    "quartic_noise": (_quartic, -1.28, 1.28, 0.0, 0.0, "unimodal", True),
    "sum_of_powers": (_sum_of_powers, -1.0, 1.0, 0.0, 0.0, "unimodal", False),
    "zakharov": (_zakharov, -5.0, 10.0, 0.0, 0.0, "unimodal", False),
    "schwefel_2_26": (_schwefel_2_26, -500.0, 500.0, _SCHWEFEL_X, None, "multimodal", False),
    "rastrigin": (_rastrigin, -5.12, 5.12, 0.0, 0.0, "multimodal", False),
    "ackley": (_ackley, -32.0, 32.0, 0.0, 0.0, "multimodal", False),
    "griewank": (_griewank, -600.0, 600.0, 0.0, 0.0, "multimodal", False),
    "penalized_1": (_penalized_1, -50.0, 50.0, -1.0, 0.0, "multimodal", False),
    "penalized_2": (_penalized_2, -50.0, 50.0, 1.0, 0.0, "multimodal", False),
    "alpine": (_alpine, -10.0, 10.0, 0.0, 0.0, "multimodal", False),
}

FUNCTION_IDS = tuple(_TABLE)


def get_function(fid: str, dim: int = 30) -> ObjectiveFunction:
    """Build catalogued function ``fid`` at dimension ``dim``."""
    try:
        body, lo, hi, xopt, fopt, modality, noisy = _TABLE[fid]
    except KeyError:
        raise ContractViolation(f"unknown function id {fid!r}; known: {', '.join(FUNCTION_IDS)}") from None
    if dim < 2:
        raise ContractViolation("catalogued functions need dim >= 2")
    if fid == "schwefel_2_26":
        fopt = _SCHWEFEL_F * dim
    return ObjectiveFunction(
        id=fid,
        dim=dim,
        lower=np.full(dim, lo),
        upper=np.full(dim, hi),
        batch=body,
        known_optimum=fopt,
        optimum_location=np.full(dim, xopt),
        modality=modality,
        noisy=noisy,
    )


def suite_catalog(dim: int = 30) -> list[ObjectiveFunction]:
    return [get_function(fid, dim) for fid in FUNCTION_IDS]
