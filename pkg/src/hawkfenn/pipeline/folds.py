from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation


@dataclass(frozen=True)
class FoldAssignment:
    folds: tuple  # index arrays, one per fold

    @property
    def k(self) -> int:
        return len(self.folds)

    def split(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(train, test) indices with fold ``i`` held out."""
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i] or [np.empty(0, int)]))
        return train.astype(int), test

    def class_counts(self, labels, classes: int = 2) -> np.ndarray:
        labels = np.asarray(labels)
        return np.array([np.bincount(labels[f], minlength=classes) for f in self.folds])


def stratified_kfold(labels, k: int = 5, seed: int = 0, groups=None) -> FoldAssignment:
    """Stratified k-fold partition.

    Each class is shuffled and dealt round-robin over the folds, the deal
    continuing where the previous class stopped, so per-fold class counts
    differ by at most one.  With ``groups`` (e.g. subject ids) whole groups
    are assigned instead, greedily keeping per-class counts near their
    targets; no group is then split across folds.
    """
    labels = np.asarray(labels, dtype=int)
    if k < 1:
        raise ContractViolation("k must be >= 1")
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    if groups is not None:
        return _grouped(labels, np.asarray(groups), k, rng, classes)
    for c in classes:
        if np.sum(labels == c) < k:
            raise ContractViolation(f"class {c} has fewer than k={k} samples")
    buckets = [[] for _ in range(k)]
    pos = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(labels == c))
        for i in idx:
            buckets[pos % k].append(i)
            pos += 1
    return FoldAssignment(tuple(np.sort(np.array(b, dtype=int)) for b in buckets))


def _grouped(labels, groups, k, rng, classes):
    ug = rng.permutation(np.unique(groups))
    if len(ug) < k:
        raise ContractViolation(f"need at least k={k} groups, got {len(ug)}")
    counts = {g: np.array([np.sum((groups == g) & (labels == c)) for c in classes]) for g in ug}
    target = np.array([np.sum(labels == c) for c in classes]) / k
    ug = sorted(ug, key=lambda g: -counts[g].sum())  # stable: ties keep the shuffled order
    load = np.zeros((k, len(classes)))
    members = [[] for _ in range(k)]
    for g in ug:
        cost = [np.sum(((load[f] + counts[g]) / np.maximum(target, 1)) ** 2) for f in range(k)]
        f = int(np.argmin(cost))
        load[f] += counts[g]
        members[f].append(g)
    return FoldAssignment(tuple(np.flatnonzero(np.isin(groups, m)) for m in members))
