"""Class-frequency weighting and weighted cross-entropy."""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import ContractViolation

# Guards log(0) only.  A larger floor would flatten the loss for confidently
# wrong outputs and leave training stuck there with a zero gradient.
LOG_FLOOR = np.finfo(float).tiny


def class_weights(counts) -> np.ndarray:
    """``w_j = 1 - n_j / N``, renormalized to sum to one.

    For two classes the raw weights already sum to one.  Empty classes are
    allowed but warned about.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1 or counts.size < 2:
        raise ContractViolation("need counts for at least two classes")
    if np.any(counts < 0):
        raise ContractViolation("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ContractViolation("total sample count must be positive")
    if np.any(counts == 0):
        warnings.warn(f"empty classes at indices {np.flatnonzero(counts == 0).tolist()}", stacklevel=2)
    w = 1.0 - counts / total
    return w / w.sum()


def one_hot(labels, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros(labels.shape + (classes,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def weighted_cross_entropy(p, target, w) -> float:
    """``-sum_j w_j T_j log p_j``, averaged over a leading batch axis if present."""
    p = np.asarray(p, dtype=float)
    target = np.asarray(target, dtype=float)
    per = -np.sum(np.asarray(w) * target * np.log(np.maximum(p, LOG_FLOOR)), axis=-1)
    return float(np.mean(per))


def weighted_cross_entropy_grad(p, target, w) -> np.ndarray:
    """Gradient of :func:`weighted_cross_entropy` with respect to ``p``."""
    p = np.asarray(p, dtype=float)
    target = np.asarray(target, dtype=float)
    batch = p.shape[0] if p.ndim == 2 else 1
    g = -np.asarray(w) * target / np.maximum(p, LOG_FLOOR)
    return np.where(p > LOG_FLOOR, g, 0.0) / batch
