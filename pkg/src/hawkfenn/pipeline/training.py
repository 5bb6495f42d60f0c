"""Mini-batch Adam training of a :class:`Network` and k-fold evaluation."""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ContractViolation, NonFiniteError
from ..neuralnet.losses import class_weights, one_hot, weighted_cross_entropy, weighted_cross_entropy_grad
from ..neuralnet.network import Network, NetworkSpec
from ..neuralnet.optim import AdamState, adam_step
from .dataset import LabeledDataset
from .folds import FoldAssignment, stratified_kfold
from .metrics import ConfusionMatrix, Metrics, confusion_metrics

METRIC_NAMES = ("accuracy", "sensitivity", "specificity")


@dataclass(frozen=True)
class TrainingHyperparameters:
    """Optimizer and regularization settings.

    ``ilr`` is the initial learning rate, multiplied by ``lrdf`` every
    ``drop_period`` iterations; ``dp`` is the dropout probability.  One
    iteration is one mini-batch update.  ``batch_size=None`` means a tenth
    of the training set.
    """

    ilr: float = 1e-3
    lrdf: float = 0.5
    dp: float = 0.2
    drop_period: int = 100
    batch_size: int | None = None
    max_iterations: int = 400
    validation_fraction: float = 0.1
    eval_every: int = 10

    def __post_init__(self):
        if not self.ilr > 0:
            raise ContractViolation("ilr must be positive")
        if not 0 < self.lrdf <= 1:
            raise ContractViolation("lrdf must lie in (0, 1]")
        if not 0 <= self.dp < 1:
            raise ContractViolation("dp must lie in [0, 1)")
        if self.drop_period < 1 or self.max_iterations < 1 or self.eval_every < 1:
            raise ContractViolation("drop_period, max_iterations and eval_every must be >= 1")
        if self.batch_size is not None and self.batch_size < 2:
            raise ContractViolation("batch_size must be >= 2 (batch normalization)")
        if not 0 < self.validation_fraction < 1:
            raise ContractViolation("validation_fraction must lie in (0, 1)")

    def learning_rate(self, iteration: int) -> float:
        return self.ilr * self.lrdf ** (iteration // self.drop_period)

    def resolve_batch(self, n_train: int) -> int:
        b = self.batch_size if self.batch_size is not None else n_train // 10
        return int(min(max(b, 2), n_train))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "TrainingHyperparameters":
        return cls(**d)


@dataclass
class TrainingOutcome:
    network: Network
    best_val_loss: float
    best_iteration: int
    history: list  # (iteration, train batch loss, validation loss)
    failed: bool = False
    diagnostic: str = ""


@dataclass
class Standardizer:
    """Scalar z-scoring fitted on training inputs.

    A single mean and scale are used so that absolute flow level, which
    carries class information, survives normalization.
    """

    mean: float
    scale: float

    @classmethod
    def fit(cls, X) -> "Standardizer":
        s = float(np.std(X))
        return cls(float(np.mean(X)), s if s > 0 else 1.0)

    def __call__(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def validation_split(labels, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Stratified (fit, validation) index split with ``fraction`` of each class held out."""
    labels = np.asarray(labels)
    fit, val = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_val = int(round(fraction * idx.size))
        if idx.size >= 2:
            n_val = min(max(n_val, 1), idx.size - 1)
        else:
            n_val = 0
        val.append(idx[:n_val])
        fit.append(idx[n_val:])
    return np.sort(np.concatenate(fit)), np.sort(np.concatenate(val))


def predict_proba(net: Network, X, batch: int = 512) -> np.ndarray:
    return np.concatenate([net.forward(X[i:i + batch], train=False) for i in range(0, len(X), batch)])


def train_network(spec: NetworkSpec, X_fit, y_fit, X_val, y_val, hyper: TrainingHyperparameters,
                  rng: np.random.Generator, weights=None) -> TrainingOutcome:
    """Train on ``(X_fit, y_fit)`` keeping the parameters with the lowest
    validation loss.  Inputs are assumed already standardized.

    Any non-finite loss or activation stops training; the outcome is then
    flagged as failed and carries the best checkpoint reached before it.
    """
    classes = spec.head.classes
    w = class_weights(np.bincount(y_fit, minlength=classes)) if weights is None else np.asarray(weights)
    init_rng, batch_rng, drop_rng = rng.spawn(3)
    net = Network(spec, init_rng, dropout=hyper.dp)
    adam = AdamState()
    T_fit = one_hot(y_fit, classes)
    T_val = one_hot(y_val, classes)
    B = hyper.resolve_batch(len(y_fit))

    best = (math.inf, 0, net.state())
    history = []
    diagnostic = ""
    order, pos = batch_rng.permutation(len(y_fit)), 0
    try:
        for it in range(hyper.max_iterations):
            if pos + B > len(order):
                order, pos = batch_rng.permutation(len(y_fit)), 0
            idx = order[pos:pos + B]
            pos += B
            p = net.forward(X_fit[idx], train=True, rng=drop_rng)
            loss = weighted_cross_entropy(p, T_fit[idx], w)
            if not np.isfinite(loss):
                diagnostic = f"non-finite training loss at iteration {it}"
                break
            grads = net.backward(weighted_cross_entropy_grad(p, T_fit[idx], w))
            adam_step(net.params, grads, adam, hyper.learning_rate(it), frozen=net.frozen)
            if (it + 1) % hyper.eval_every == 0 or it + 1 == hyper.max_iterations:
                vl = weighted_cross_entropy(predict_proba(net, X_val), T_val, w) if len(y_val) else loss
                history.append((it + 1, loss, vl))
                if not np.isfinite(vl):
                    diagnostic = f"non-finite validation loss at iteration {it + 1}"
                    break
                if vl < best[0]:
                    best = (vl, it + 1, net.state())
    except NonFiniteError as exc:
        diagnostic = f"non-finite values at iteration {it}: {exc}"
    net.load_state(best[2])
    return TrainingOutcome(net, best[0], best[1], history, bool(diagnostic), diagnostic)


@dataclass
class FoldResult:
    fold: int
    metrics: Metrics
    confusion: ConfusionMatrix
    predictions: np.ndarray
    labels: np.ndarray
    best_val_loss: float
    best_iteration: int
    failed: bool = False
    diagnostic: str = ""


@dataclass
class CrossValidationResult:
    folds: list
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    @property
    def failed(self) -> list:
        return [f.fold for f in self.folds if f.failed]

    def per_fold_csv(self) -> str:
        buf = io.StringIO()
        buf.write("fold,accuracy,sensitivity,specificity,tp,tn,fp,fn,best_val_loss,failed\n")
        for f in self.folds:
            m, c = f.metrics, f.confusion
            buf.write(f"{f.fold},{m.accuracy!r},{m.sensitivity!r},{m.specificity!r},"
                      f"{c.tp},{c.tn},{c.fp},{c.fn},{f.best_val_loss!r},{int(f.failed)}\n")
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write("metric,mean,std\n")
        for k in METRIC_NAMES:
            buf.write(f"{k},{self.mean[k]!r},{self.std[k]!r}\n")
        return buf.getvalue()


def _fold_task(args):
    spec, data, train_idx, test_idx, hyper, fold, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    split_rng, train_rng = rng.spawn(2)
    y_train = data.labels[train_idx]
    fit_rel, val_rel = validation_split(y_train, hyper.validation_fraction, split_rng)
    fit, val = train_idx[fit_rel], train_idx[val_rel]
    std = Standardizer.fit(data.X[fit])
    out = train_network(spec, std(data.X[fit]), data.labels[fit], std(data.X[val]), data.labels[val],
                        hyper, train_rng)
    pred = np.argmax(predict_proba(out.network, std(data.X[test_idx])), axis=1)
    truth = data.labels[test_idx]
    cm = ConfusionMatrix.from_predictions(pred, truth)
    return FoldResult(fold, confusion_metrics(cm), cm, pred, truth, out.best_val_loss, out.best_iteration,
                      out.failed, out.diagnostic)


def train_and_evaluate(spec: NetworkSpec, data: LabeledDataset, folds: FoldAssignment | None,
                       hyper: TrainingHyperparameters = TrainingHyperparameters(), seed: int = 0,
                       jobs: int = 1) -> CrossValidationResult:
    """k-fold cross-validation: for each fold, train on the rest (minus a
    stratified validation carve-out) and score the held-out fold.

    Every fold draws from its own child of ``SeedSequence(seed)``, so results
    do not depend on ``jobs``.  Failed folds (non-finite loss) keep their
    best checkpoint, are flagged, and are excluded from the mean/std.
    """
    if folds is None:
        folds = stratified_kfold(data.labels, 5, seed)
    if folds.k < 2:
        raise ContractViolation("cross-validation needs at least two folds")
    seqs = np.random.SeedSequence(seed).spawn(folds.k)
    tasks = [(spec, data, *folds.split(i), hyper, i, seqs[i]) for i in range(folds.k)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_fold_task, tasks))
    else:
        results = [_fold_task(t) for t in tasks]
    ok = [r for r in results if not r.failed]
    mean, std = {}, {}
    for k in METRIC_NAMES:
        v = np.array([getattr(r.metrics, k) for r in ok], dtype=float)
        mean[k] = float(np.nanmean(v)) if v.size and not np.all(np.isnan(v)) else math.nan
        std[k] = float(np.nanstd(v, ddof=1)) if np.sum(~np.isnan(v)) > 1 else 0.0
    return CrossValidationResult(results, mean, std)
