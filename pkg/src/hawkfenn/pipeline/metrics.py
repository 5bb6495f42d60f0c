from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .preprocess import ABNORMAL


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with abnormal as the positive class."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_predictions(cls, predicted, actual, positive: int = ABNORMAL) -> "ConfusionMatrix":
        p = np.asarray(predicted) == positive
        a = np.asarray(actual) == positive
        return cls(int(np.sum(p & a)), int(np.sum(~p & ~a)), int(np.sum(p & ~a)), int(np.sum(~p & a)))


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    sensitivity: float
    specificity: float
    undefined: tuple = ()  # names of metrics whose denominator was zero

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "sensitivity": self.sensitivity, "specificity": self.specificity}


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.append(name)
        return math.nan
    return num / den


def confusion_metrics(cm: ConfusionMatrix) -> Metrics:
    undefined: list = []
    acc = _ratio(cm.tp + cm.tn, cm.tp + cm.fn + cm.tn + cm.fp, "accuracy", undefined)
    sen = _ratio(cm.tp, cm.tp + cm.fn, "sensitivity", undefined)
    spe = _ratio(cm.tn, cm.tn + cm.fp, "specificity", undefined)
    return Metrics(acc, sen, spe, tuple(undefined))
