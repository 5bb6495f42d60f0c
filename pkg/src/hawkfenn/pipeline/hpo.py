"""Hyperparameter search over (learning rate, decay factor, dropout) with
the hawk optimizers.

Each hawk is a point ``(log10 ilr, lrdf, dp)``.  Its fitness is the
validation weighted cross-entropy after training, averaged over ``repeats``
independent splits/initializations.  Repeat ``r`` uses the same split and
initialization seed for every hawk (common random numbers), so hawks are
compared on equal footing and the fitness is a deterministic function of
the position.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np

from ..benchfns import ObjectiveFunction
from ..errors import ContractViolation
from ..neuralnet.network import NetworkSpec
from ..optimizer import OptimizerConfig, RunRecord, run
from .dataset import LabeledDataset
from .training import Standardizer, TrainingHyperparameters, train_network, validation_split

FAILED_FITNESS = 1e6  # assigned to a training run that diverged


@dataclass(frozen=True)
class SearchSpace:
    log10_ilr: tuple = (-5.0, -1.0)
    lrdf: tuple = (0.1, 1.0)
    dp: tuple = (0.0, 0.8)

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.log10_ilr[0], self.lrdf[0], self.dp[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.log10_ilr[1], self.lrdf[1], self.dp[1]])

    def midpoint(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    def decode(self, position, base: TrainingHyperparameters) -> TrainingHyperparameters:
        x = np.clip(np.asarray(position, dtype=float), self.lower, self.upper)
        # dp must stay strictly below one for inverted dropout
        return replace(base, ilr=float(10.0 ** x[0]), lrdf=float(x[1]), dp=float(min(x[2], 0.95)))

    def contains(self, hyper: TrainingHyperparameters) -> bool:
        x = np.array([math.log10(hyper.ilr), hyper.lrdf, hyper.dp])
        return bool(np.all(x >= self.lower - 1e-12) and np.all(x <= self.upper + 1e-12))


@dataclass(frozen=True)
class HPOSettings:
    """Desk-scale defaults: six hawks, five iterations, three repeats, short training."""

    population_size: int = 6
    max_iterations: int = 5
    repeats: int = 3
    algorithm: str = "hho_plus"
    seed: int = 0
    training: TrainingHyperparameters = TrainingHyperparameters(
        max_iterations=60, drop_period=20, eval_every=5, validation_fraction=0.2)

    def __post_init__(self):
        if self.repeats < 1:
            raise ContractViolation("repeats must be >= 1")


def validation_loss(spec: NetworkSpec, data: LabeledDataset, hyper: TrainingHyperparameters,
                    seed_seq: np.random.SeedSequence) -> float:
    """Best validation weighted cross-entropy of one training run, or
    ``nan`` if training diverged."""
    rng = np.random.default_rng(seed_seq)
    split_rng, train_rng = rng.spawn(2)
    fit, val = validation_split(data.labels, hyper.validation_fraction, split_rng)
    std = Standardizer.fit(data.X[fit])
    out = train_network(spec, std(data.X[fit]), data.labels[fit], std(data.X[val]), data.labels[val],
                        hyper, train_rng)
    return math.nan if out.failed or not math.isfinite(out.best_val_loss) else float(out.best_val_loss)


def repeat_seeds(seed: int, repeats: int) -> list:
    return np.random.SeedSequence(seed).spawn(repeats)


def mean_validation_loss(spec, data, hyper, seed: int, repeats: int) -> float:
    losses = [validation_loss(spec, data, hyper, s) for s in repeat_seeds(seed, repeats)]
    return FAILED_FITNESS if any(math.isnan(v) for v in losses) else float(np.mean(losses))


@dataclass
class HPOResult:
    best: TrainingHyperparameters
    best_fitness: float
    trace: list  # (iteration, hawk, ilr, lrdf, dp, fitness)
    record: RunRecord

    def trace_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iteration,hawk,ilr,lrdf,dp,fitness\n")
        for it, hawk, ilr, lrdf, dp, f in self.trace:
            buf.write(f"{it},{hawk},{ilr!r},{lrdf!r},{dp!r},{f!r}\n")
        return buf.getvalue()


def hpo_search(spec: NetworkSpec, data: LabeledDataset, settings: HPOSettings = HPOSettings(),
               space: SearchSpace = SearchSpace()) -> HPOResult:
    """Minimize mean validation loss over ``space`` with a hawk optimizer.

    Raises ``FloatingPointError`` if every training run diverged.
    """
    failures = [0]

    def batch(X, rng=None):
        out = np.empty(len(X))
        for i, x in enumerate(X):
            out[i] = mean_validation_loss(spec, data, space.decode(x, settings.training),
                                          settings.seed, settings.repeats)
            failures[0] += out[i] == FAILED_FITNESS
        return out

    objective = ObjectiveFunction("hpo_validation_loss", 3, space.lower, space.upper, batch)
    trace = []

    def record(iteration, hawks, X, f):
        for h, x, v in zip(hawks, X, f):
            hp = space.decode(x, settings.training)
            trace.append((int(iteration), int(h), hp.ilr, hp.lrdf, hp.dp, float(v)))

    cfg = OptimizerConfig(settings.population_size, settings.max_iterations, settings.seed, settings.algorithm)
    rec = run(objective, cfg, callback=record)
    if failures[0] == rec.evaluations:
        raise FloatingPointError("every hyperparameter evaluation diverged")
    best = space.decode(rec.final_position, settings.training)
    return HPOResult(best, rec.final_fitness, trace, rec)
