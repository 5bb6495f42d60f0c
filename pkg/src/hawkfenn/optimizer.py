"""Harris hawks optimization (HHO), its improved variant HHO+, and two
simple comparators (random search, grey-wolf style).

HHO+ adds two steps to every HHO iteration: a Gaussian-perturbed
exploration/exploitation move gated by a tanh threshold (IEEA) and a
quasi-oppositional sampling pass (QOBL).  How their candidates are used is
set by ``OptimizerConfig.acceptance``:

``"rabbit"`` (default)
    candidates only compete for the best-so-far position ("rabbit"); the
    hawks themselves keep their HHO positions.
``"greedy"``
    each candidate replaces its parent hawk when it is fitter.

Either way the rabbit fitness never increases.  The greedy rule pulls the
whole flock towards the centre of the box (both operators are
centre-biased), which stalls HHO+ on functions whose optimum sits far
from the centre or inside a curved valley.

All population updates are vectorized over hawks; a run consumes a single
``numpy.random.Generator`` in a fixed order and is therefore reproducible
from its seed.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .benchfns import ObjectiveFunction, get_function
from .errors import ContractViolation, NonFiniteError

ALGORITHMS = ("hho", "hho_plus", "random_search", "gwo_baseline")
ACCEPTANCE_RULES = ("rabbit", "greedy")

LEVY_BETA = 1.5
LEVY_SCALE = 0.01


@dataclass(frozen=True)
class OptimizerConfig:
    population_size: int = 30
    max_iterations: int = 500
    seed: int = 0
    algorithm: str = "hho_plus"
    boundary_policy: str = "clamp"
    acceptance: str = "rabbit"

    def __post_init__(self):
        if self.population_size < 2:
            raise ContractViolation("population_size must be >= 2")
        if self.max_iterations < 1:
            raise ContractViolation("max_iterations must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ContractViolation(f"unknown algorithm {self.algorithm!r}; known: {', '.join(ALGORITHMS)}")
        if self.boundary_policy != "clamp":
            raise ContractViolation("only the 'clamp' boundary policy is supported")
        if self.acceptance not in ACCEPTANCE_RULES:
            raise ContractViolation(f"unknown acceptance rule {self.acceptance!r}; known: {ACCEPTANCE_RULES}")


@dataclass
class HawkPopulation:
    positions: np.ndarray
    fitness: np.ndarray
    rabbit_position: np.ndarray
    rabbit_fitness: float
    iteration: int = 0

    @classmethod
    def from_positions(cls, positions, fitness) -> "HawkPopulation":
        i = int(np.argmin(fitness))
        return cls(positions, fitness, positions[i].copy(), float(fitness[i]))

    def update_rabbit(self) -> None:
        i = int(np.argmin(self.fitness))
        if self.fitness[i] < self.rabbit_fitness:
            self.rabbit_fitness = float(self.fitness[i])
            self.rabbit_position = self.positions[i].copy()

    def accept(self, candidates: np.ndarray, cand_fitness: np.ndarray) -> np.ndarray:
        """Greedy per-hawk replacement; returns the mask of accepted rows."""
        better = cand_fitness < self.fitness
        self.positions[better] = candidates[better]
        self.fitness[better] = cand_fitness[better]
        return better

    def offer(self, candidates: np.ndarray, cand_fitness: np.ndarray) -> bool:
        """Let candidates replace the rabbit only; hawks are untouched."""
        i = int(np.argmin(cand_fitness))
        if cand_fitness[i] < self.rabbit_fitness:
            self.rabbit_fitness = float(cand_fitness[i])
            self.rabbit_position = candidates[i].copy()
            return True
        return False

    def consider(self, candidates, cand_fitness, acceptance: str = "rabbit") -> None:
        if acceptance == "greedy":
            self.accept(candidates, cand_fitness)
            self.update_rabbit()
        else:
            self.offer(candidates, cand_fitness)


@dataclass
class RunRecord:
    algorithm: str
    function: str
    dim: int
    seed: int
    best_trace: np.ndarray
    final_position: np.ndarray
    final_fitness: float
    evaluations: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def stem(self) -> str:
        return run_stem(self.algorithm, self.function, self.dim, self.seed)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "best_fitness"])
        for i, v in enumerate(self.best_trace, start=1):
            w.writerow([i, repr(float(v))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "function": self.function,
            "dim": self.dim,
            "seed": self.seed,
            "final_fitness": float(self.final_fitness),
            "evaluations": int(self.evaluations),
            "wall_time": float(self.wall_time),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def run_stem(algorithm: str, function: str, dim: int, seed: int) -> str:
    return f"{algorithm}__{function}__d{dim}__s{seed}"


# --- elementary operators -------------------------------------------------

def adaptive_threshold(t: float, T: float) -> float:
    """Exploration/exploitation switch ``tanh(-t/T) + 1``, from 1 down to ~0.238."""
    if T <= 0:
        raise ContractViolation("T must be >= 1")
    if not 0 <= t <= T:
        raise ContractViolation(f"t={t} outside [0, {T}]")
    return math.tanh(-t / T) + 1.0


def gaussian_perturbation_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim < 0:
        raise ContractViolation("dim must be >= 0")
    return rng.standard_normal(dim)


def _mantegna_sigma(beta: float) -> float:
    num = math.gamma(1 + beta) * math.sin(math.pi * beta / 2)
    den = math.gamma((1 + beta) / 2) * beta * 2 ** ((beta - 1) / 2)
    return (num / den) ** (1 / beta)


def levy_flight_vector(dim, rng: np.random.Generator, beta: float = LEVY_BETA) -> np.ndarray:
    """Mantegna's algorithm for a symmetric Levy-stable step of index ``beta``.

    ``dim`` may be an int or a shape tuple.
    """
    u = rng.normal(0.0, _mantegna_sigma(beta), dim)
    v = rng.normal(0.0, 1.0, dim)
    return u / np.abs(v) ** (1 / beta)


def opposite(x, lower, upper) -> np.ndarray:
    return np.asarray(lower) + np.asarray(upper) - np.asarray(x)


def quasi_opposite(x, lower, upper, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample between the box centre and the opposite point of ``x``.

    Works on a single vector or a population matrix.
    """
    x = np.asarray(x, dtype=float)
    center = (np.asarray(lower) + np.asarray(upper)) / 2.0
    xo = opposite(x, lower, upper)
    return center + rng.random(x.shape) * (xo - center)


def ieea_candidates(X, rabbit, rand, rg1, rg2, a) -> np.ndarray:
    """Unclamped IEEA move.

    ``rand`` is one uniform per hawk (used both as branch gate against the
    threshold ``a`` and as step multiplier); ``rg1``/``rg2`` are the two
    Gaussian vectors occurring in each branch.
    """
    X = np.atleast_2d(X)
    rand = np.reshape(rand, (-1, 1))
    explore = X + rand * rg1 * (rabbit - rg2 * X)
    exploit = rabbit + rand * rg1 * (rg2 * rabbit - X)
    return np.where(rand < a, explore, exploit)


# --- evaluation bookkeeping ------------------------------------------------

class Evaluator:
    """Counts objective calls, rejects non-finite fitness, forwards to a callback."""

    def __init__(self, objective: ObjectiveFunction, noise_rng=None,
                 callback: Optional[Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]] = None):
        self.objective = objective
        self.noise_rng = noise_rng if objective.noisy else None
        self.callback = callback
        self.count = 0
        self.iteration = 0

    def __call__(self, X: np.ndarray, hawks=None) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[0] == 0:
            return np.empty(0)
        f = np.asarray(self.objective.batch(X, self.noise_rng), dtype=float)
        self.count += X.shape[0]
        bad = ~np.isfinite(f)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise NonFiniteError(
                f"{self.objective.id}: non-finite fitness {f[i]} at position {X[i].tolist()}")
        if self.callback is not None:
            hawks = np.arange(X.shape[0]) if hawks is None else np.asarray(hawks)
            self.callback(self.iteration, hawks, X, f)
        return f


# --- population updates ----------------------------------------------------

def hho_phase_update(pop: HawkPopulation, lower, upper, t, T, rng, evaluate) -> HawkPopulation:
    """One classical HHO iteration, updating ``pop`` in place.

    Branches by escaping energy ``E = 2 E0 (1 - t/T)`` and escape chance
    ``r``: exploration for ``|E| >= 1``, then soft/hard besiege, then soft/
    hard besiege with Levy rapid dives.  Non-dive hawks move unconditionally;
    dive hawks only move when a dive improves their fitness.
    """
    X = pop.positions
    N, D = X.shape
    rabbit = pop.rabbit_position
    xmean = X.mean(axis=0)

    E0 = 2.0 * rng.random(N) - 1.0
    q = rng.random(N)
    r = rng.random(N)
    J = 2.0 * (1.0 - rng.random(N))
    idx = rng.integers(0, N, N)
    r1, r2, r3, r4 = rng.random((4, N))
    S = rng.random((N, D))
    LF = LEVY_SCALE * levy_flight_vector((N, D), rng)

    E = (2.0 * E0 * (1.0 - t / T))[:, None]
    absE = np.abs(E[:, 0])
    col = lambda v: v[:, None]  # noqa: E731

    explore = absE >= 1.0
    soft = ~explore & (r >= 0.5) & (absE >= 0.5)
    hard = ~explore & (r >= 0.5) & (absE < 0.5)
    dive_soft = ~explore & (r < 0.5) & (absE >= 0.5)
    dive_hard = ~explore & (r < 0.5) & (absE < 0.5)
    dive = dive_soft | dive_hard

    Xr = X[idx]
    perch_family = Xr - col(r1) * np.abs(Xr - 2.0 * col(r2) * X)
    perch_tree = (rabbit - xmean) - col(r3) * (lower + col(r4) * (upper - lower))
    new = np.where(col(q < 0.5), perch_family, perch_tree)
    new = np.where(col(soft), (rabbit - X) - E * np.abs(col(J) * rabbit - X), new)
    new = np.where(col(hard), rabbit - E * np.abs(rabbit - X), new)
    new = np.clip(new, lower, upper)

    Y = np.where(col(dive_soft), rabbit - E * np.abs(col(J) * rabbit - X),
                 rabbit - E * np.abs(col(J) * rabbit - xmean))
    Y = np.clip(Y, lower, upper)
    Z = np.clip(Y + S * LF, lower, upper)

    moved = ~dive
    fit_new = pop.fitness.copy()
    mi = np.flatnonzero(moved)
    fit_new[mi] = evaluate(new[mi], mi)

    di = np.flatnonzero(dive)
    if di.size:
        fy = evaluate(Y[di], di)
        take_y = fy < pop.fitness[di]
        new[di[take_y]] = Y[di[take_y]]
        fit_new[di[take_y]] = fy[take_y]
        zi = di[~take_y]
        fz = evaluate(Z[zi], zi)
        take_z = fz < pop.fitness[zi]
        new[zi[take_z]] = Z[zi[take_z]]
        fit_new[zi[take_z]] = fz[take_z]
        keep = zi[~take_z]
        new[keep] = X[keep]

    pop.positions = new
    pop.fitness = fit_new
    pop.update_rabbit()
    return pop


def ieea_update(pop: HawkPopulation, lower, upper, t, T, rng, evaluate,
                acceptance: str = "rabbit") -> HawkPopulation:
    N, D = pop.positions.shape
    a = adaptive_threshold(t, T)
    rand = rng.random(N)
    rg1 = rng.standard_normal((N, D))
    rg2 = rng.standard_normal((N, D))
    cand = np.clip(ieea_candidates(pop.positions, pop.rabbit_position, rand, rg1, rg2, a), lower, upper)
    pop.consider(cand, evaluate(cand), acceptance)
    return pop


def qobl_update(pop: HawkPopulation, lower, upper, rng, evaluate, acceptance: str = "rabbit") -> HawkPopulation:
    cand = np.clip(quasi_opposite(pop.positions, lower, upper, rng), lower, upper)
    pop.consider(cand, evaluate(cand), acceptance)
    return pop


def _gwo_step(pop, leaders, lower, upper, t, T, rng, evaluate):
    X = pop.positions
    N, D = X.shape
    a = 2.0 - 2.0 * t / T
    moves = []
    for L in leaders[0]:
        A = 2.0 * a * rng.random((N, D)) - a
        C = 2.0 * rng.random((N, D))
        moves.append(L - A * np.abs(C * L - X))
    new = np.clip(sum(moves) / 3.0, lower, upper)
    f = evaluate(new)
    pop.positions, pop.fitness = new, f
    allx = np.vstack([leaders[0], new])
    allf = np.concatenate([leaders[1], f])
    order = np.argsort(allf, kind="stable")[:3]
    leaders[0], leaders[1] = allx[order].copy(), allf[order].copy()
    pop.update_rabbit()


def run(objective: ObjectiveFunction, config: OptimizerConfig = OptimizerConfig(),
        callback: Optional[Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]] = None) -> RunRecord:
    """Minimize ``objective`` with ``config.algorithm`` for ``max_iterations``.

    ``callback(iteration, hawk_indices, positions, fitness)`` sees every
    batch of evaluations; iteration 0 is the initial population.
    """
    algo = config.algorithm
    N, T = config.population_size, config.max_iterations
    lower, upper = objective.lower, objective.upper
    opt_ss, noise_ss = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(opt_ss)
    ev = Evaluator(objective, np.random.default_rng(noise_ss), callback)

    start = time.perf_counter()
    X0 = lower + rng.random((N, objective.dim)) * (upper - lower)
    pop = HawkPopulation.from_positions(X0, ev(X0))
    leaders = None
    if algo == "gwo_baseline":
        order = np.argsort(pop.fitness, kind="stable")[:3]
        leaders = [X0[order].copy(), pop.fitness[order].copy()]

    trace = np.empty(T)
    for t in range(T):
        ev.iteration = t + 1
        pop.iteration = t
        if algo in ("hho", "hho_plus"):
            hho_phase_update(pop, lower, upper, t, T, rng, ev)
            if algo == "hho_plus":
                ieea_update(pop, lower, upper, t, T, rng, ev, config.acceptance)
                qobl_update(pop, lower, upper, rng, ev, config.acceptance)
        elif algo == "random_search":
            Xs = lower + rng.random((N, objective.dim)) * (upper - lower)
            pop.positions, pop.fitness = Xs, ev(Xs)
            pop.update_rabbit()
        else:
            _gwo_step(pop, leaders, lower, upper, t, T, rng, ev)
        trace[t] = pop.rabbit_fitness
    pop.iteration = T

    return RunRecord(
        algorithm=algo,
        function=objective.id,
        dim=objective.dim,
        seed=config.seed,
        best_trace=trace,
        final_position=pop.rabbit_position.copy(),
        final_fitness=float(pop.rabbit_fitness),
        evaluations=ev.count,
        wall_time=time.perf_counter() - start,
    )


def scalability_sweep(objective_id: str, dims, config: OptimizerConfig = OptimizerConfig()) -> list[RunRecord]:
    """One run per dimension; every dimension reuses ``config.seed``."""
    dims = list(dims)
    if not dims:
        raise ContractViolation("dims must be non-empty")
    return [run(get_function(objective_id, d), config) for d in dims]


def with_seed(config: OptimizerConfig, seed: int) -> OptimizerConfig:
    return replace(config, seed=seed)
