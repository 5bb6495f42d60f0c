from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preprocess import SEGMENT_LENGTH, butterworth_lowpass, label_segment, segment
from .synthetic import SignalRecord


@dataclass
class LabeledDataset:
    """Filtered flow segments with labels derived from the filtered PAWP."""

    X: np.ndarray  # (n, length)
    labels: np.ndarray  # 1 = abnormal, 0 = normal
    mean_pawp: np.ndarray
    subject_ids: np.ndarray
    fallback: np.ndarray  # segments labelled from the whole-segment mean
    intended: np.ndarray | None = None  # generator labels, when known

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.X[idx], self.labels[idx], self.mean_pawp[idx], self.subject_ids[idx],
                              self.fallback[idx], None if self.intended is None else self.intended[idx])

    def class_counts(self, classes: int = 2) -> np.ndarray:
        return np.bincount(self.labels, minlength=classes)

    def label_agreement(self) -> float:
        return float(np.mean(self.labels == self.intended)) if self.intended is not None else float("nan")


def build_dataset(records: list[SignalRecord], length: int = SEGMENT_LENGTH) -> LabeledDataset:
    X, labels, means, subj, fb, intended = [], [], [], [], [], []
    for r in records:
        flow = butterworth_lowpass(r.flow, r.fs)
        pawp = butterworth_lowpass(r.pawp, r.fs)
        for i, (fseg, pseg) in enumerate(zip(segment(flow, length), segment(pawp, length))):
            lab = label_segment(pseg, fs=r.fs)
            X.append(fseg)
            labels.append(lab.label)
            means.append(lab.mean_pawp)
            fb.append(lab.fallback)
            subj.append(r.subject_id)
            intended.append(r.labels[i] if i < len(r.labels) else -1)
    return LabeledDataset(np.array(X), np.array(labels, dtype=int), np.array(means), np.array(subj),
                          np.array(fb, dtype=bool), np.array(intended, dtype=int))
