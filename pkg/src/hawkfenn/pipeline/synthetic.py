"""Synthetic pump-flow / wedge-pressure recordings.

A stand-in for clinical data: each subject gets a heart rate, breathing
rate and flow-sensor gain; each 6 s segment gets a PAWP baseline drawn
from the normal band or from one of the abnormal tails.  Flow level and
pulsatility rise monotonically with the baseline, which makes the label
recoverable from flow alone.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractViolation
from .preprocess import ABNORMAL, FS, NORMAL, SEGMENT_LENGTH

PAPER_ABNORMAL_FRACTION = 459 / (459 + 1338)


@dataclass
class SignalRecord:
    flow: np.ndarray  # L/min
    pawp: np.ndarray  # mmHg
    fs: float
    subject_id: int
    labels: np.ndarray  # generator's intended label per segment

    def __post_init__(self):
        if len(self.flow) != len(self.pawp):
            raise ContractViolation("flow and pawp must have equal length")
        if self.fs <= 0:
            raise ContractViolation("sampling rate must be positive")


def _cardiac(phase):
    # systolic upstroke plus a smaller second harmonic
    return np.sin(phase) + 0.3 * np.sin(2 * phase + 0.5)


def flow_level(baseline):
    """Mean pump flow (L/min) as a monotone function of PAWP baseline."""
    return 2.0 + 0.25 * baseline


def generate_synthetic(n_subjects: int = 20, segments_per_subject: int = 90,
                       abnormal_fraction: float = PAPER_ABNORMAL_FRACTION, seed: int = 0,
                       fs: float = FS, pressure_noise: float = 0.3, flow_noise: float = 0.1,
                       segment_length: int = SEGMENT_LENGTH) -> list[SignalRecord]:
    if not 0.0 <= abnormal_fraction <= 1.0:
        raise ContractViolation("abnormal_fraction must be within [0, 1]")
    rng = np.random.default_rng(seed)
    total = n_subjects * segments_per_subject
    labels = np.zeros(total, dtype=int)
    labels[rng.permutation(total)[:int(round(abnormal_fraction * total))]] = ABNORMAL
    labels = labels.reshape(n_subjects, segments_per_subject)

    records = []
    t = np.arange(segments_per_subject * segment_length) / fs
    for s in range(n_subjects):
        hr = rng.uniform(1.0, 1.4)
        rr = rng.uniform(0.2, 0.3)
        gain = rng.uniform(0.96, 1.04)
        phase_h, phase_r = rng.uniform(0, 2 * np.pi, 2)

        lab = labels[s]
        high = rng.random(segments_per_subject) < 0.6
        base = np.where(lab == NORMAL, rng.uniform(9.0, 15.0, segments_per_subject),
                        np.where(high, rng.uniform(17.0, 25.0, segments_per_subject),
                                 rng.uniform(3.0, 7.0, segments_per_subject)))
        b = np.repeat(base, segment_length)

        cardiac = _cardiac(2 * np.pi * hr * t + phase_h)
        resp = np.sin(2 * np.pi * rr * t + phase_r)
        pawp = b + (2.0 + 0.1 * b) * cardiac + 1.0 * resp + rng.normal(0, pressure_noise, t.size)
        flow = gain * (flow_level(b) + (0.5 + 0.08 * b) * _cardiac(2 * np.pi * hr * t + phase_h - 0.6)
                       + 0.15 * resp) + rng.normal(0, flow_noise, t.size)
        records.append(SignalRecord(flow, pawp, fs, s, lab.copy()))
    return records


def save_dataset(records: list[SignalRecord], directory, extra: dict | None = None) -> Path:
    """One JSON manifest plus little-endian float64 ``flow``/``pawp`` blobs per subject."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for r in records:
        stem = f"subject_{r.subject_id:03d}"
        (d / f"{stem}.flow.bin").write_bytes(np.asarray(r.flow, "<f8").tobytes())
        (d / f"{stem}.pawp.bin").write_bytes(np.asarray(r.pawp, "<f8").tobytes())
        entries.append({"subject_id": r.subject_id, "fs": r.fs, "samples": len(r.flow),
                        "flow": f"{stem}.flow.bin", "pawp": f"{stem}.pawp.bin",
                        "labels": [int(x) for x in r.labels]})
    manifest = {"format_version": 1, "subjects": entries, **(extra or {})}
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_dataset(directory) -> list[SignalRecord]:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    out = []
    for e in manifest["subjects"]:
        flow = np.frombuffer((d / e["flow"]).read_bytes(), "<f8").copy()
        pawp = np.frombuffer((d / e["pawp"]).read_bytes(), "<f8").copy()
        out.append(SignalRecord(flow, pawp, e["fs"], e["subject_id"], np.array(e["labels"], dtype=int)))
    return out
