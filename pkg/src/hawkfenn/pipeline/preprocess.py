"""Filtering, fixed-length segmentation and beat-aligned PAWP labelling."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, find_peaks, sosfiltfilt

from ..errors import ContractViolation

FS = 50.0
SEGMENT_LENGTH = 300
LOW_PAWP = 8.0
HIGH_PAWP = 16.0
MIN_BEAT_SEPARATION = 0.3  # seconds between accepted minima

NORMAL, ABNORMAL = 0, 1


def butterworth_lowpass(signal, fs: float = FS, f_edge: float = 15.0, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth low-pass with its -3 dB point at ``f_edge``.

    Applied forward then backward, so the overall magnitude response is the
    square of the single-pass one (gain 0.5 at ``f_edge``).
    """
    if not 0 < f_edge < fs / 2:
        raise ContractViolation(f"cutoff {f_edge} Hz must lie in (0, {fs / 2}) Hz")
    sos = butter(order, f_edge, btype="low", fs=fs, output="sos")
    return sosfiltfilt(sos, np.asarray(signal, dtype=float))


def segment(signal, length: int = SEGMENT_LENGTH) -> list[np.ndarray]:
    """Consecutive non-overlapping windows; the trailing remainder is dropped."""
    signal = np.asarray(signal)
    n = signal.shape[-1] // length
    if n == 0:
        warnings.warn(f"signal of {signal.shape[-1]} samples is shorter than one {length}-sample window",
                      stacklevel=2)
    return [signal[..., i * length:(i + 1) * length] for i in range(n)]


@dataclass(frozen=True)
class SegmentLabel:
    mean_pawp: float
    label: int
    fallback: bool = False  # fewer than two minima; whole-segment mean used


def beat_minima(pawp, fs: float = FS) -> np.ndarray:
    distance = max(1, int(round(MIN_BEAT_SEPARATION * fs)))
    idx, _ = find_peaks(-np.asarray(pawp, dtype=float), distance=distance)
    return idx


def label_segment(pawp_segment, low: float = LOW_PAWP, high: float = HIGH_PAWP,
                  fs: float = FS) -> SegmentLabel:
    """Mean PAWP over the span between the first and last beat minima.

    Abnormal iff the mean is below ``low`` or above ``high``.
    """
    x = np.asarray(pawp_segment, dtype=float)
    mins = beat_minima(x, fs)
    if mins.size >= 2:
        mean, fallback = float(x[mins[0]:mins[-1] + 1].mean()), False
    else:
        mean, fallback = float(x.mean()), True
    return SegmentLabel(mean, ABNORMAL if (mean < low or mean > high) else NORMAL, fallback)
