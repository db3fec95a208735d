"""Candidate waveform bank: per-bin magnitude and phase series.

Every range bin of a recording yields two real-valued candidates
competing to represent the respiration waveform: the magnitude of the
complex samples and the unwrapped phase. Both run through the same
preprocessing chain (static-clutter removal, polynomial detrend, min-max
normalization); the phase is unwrapped first since clutter removal of a
wrapped angle is meaningless.

Bank order is fixed: bins ascending, magnitude before phase within a bin.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import dsp
from .errors import EmptyBank, InvariantViolation
from .ingest import UwbRecording

MAGNITUDE = "mag"
PHASE = "ph"


@dataclass
class ExtractionConfig:
    # At 50 Hz the baseline tracker must stay far below the respiration
    # band: alpha 0.995 puts the high-pass knee near 0.04 Hz. Faster
    # baselines (e.g. 0.95) visibly deform waveforms at 0.2-0.4 Hz.
    loopback_alpha: float = 0.995
    detrend_order: int = 2


@dataclass
class CandidateSeries:
    """One preprocessed waveform candidate.

    ``samples`` is the min-max normalized series in [0, 1];
    ``raw_samples`` is the same series before normalization (after clutter
    removal and detrending), which is what variance-style selectors need.
    """

    bin_index: int
    channel: str
    samples: np.ndarray
    raw_samples: np.ndarray

    def __post_init__(self):
        if self.channel not in (MAGNITUDE, PHASE):
            raise InvariantViolation(f"unknown channel {self.channel!r}")
        if self.samples.shape != self.raw_samples.shape:
            raise InvariantViolation("samples and raw_samples must have equal length")

    @property
    def key(self) -> str:
        return candidate_key(self)


def candidate_key(c: CandidateSeries) -> str:
    """Stable identifier, e.g. ``bin30:mag``, used in logs and reports."""
    return f"bin{c.bin_index}:{c.channel}"


@dataclass
class CandidateBank:
    """All candidates of one recording plus the source geometry."""

    candidates: list[CandidateSeries]
    num_bins: int
    num_samples: int
    sample_rate_hz: float
    range_start_m: float = 0.0
    bin_size_m: float = 0.0

    def __post_init__(self):
        keys = [c.key for c in self.candidates]
        if len(set(keys)) != len(keys):
            raise InvariantViolation("duplicate (bin, channel) in bank")

    def __len__(self) -> int:
        return len(self.candidates)

    def get(self, bin_index: int, channel: str) -> CandidateSeries:
        for c in self.candidates:
            if c.bin_index == bin_index and c.channel == channel:
                return c
        raise KeyError(f"bin{bin_index}:{channel}")

    def by_key(self, key: str) -> CandidateSeries:
        for c in self.candidates:
            if c.key == key:
                return c
        raise KeyError(key)

    def channel_raw(self, channel: str) -> np.ndarray:
        """Stack of raw_samples for one channel, shape (num_bins, num_samples)."""
        rows = [c.raw_samples for c in self.candidates if c.channel == channel]
        if not rows:
            raise EmptyBank(f"no {channel} candidates")
        return np.stack(rows)

    def subset(self, keep: list[CandidateSeries]) -> "CandidateBank":
        return CandidateBank(
            candidates=keep,
            num_bins=self.num_bins,
            num_samples=self.num_samples,
            sample_rate_hz=self.sample_rate_hz,
            range_start_m=self.range_start_m,
            bin_size_m=self.bin_size_m,
        )


def extract_candidates(rec: UwbRecording, cfg: ExtractionConfig | None = None) -> CandidateBank:
    """Build the candidate bank of a recording (2 candidates per bin).

    Magnitude chain:  |iq| -> loopback -> detrend -> normalize.
    Phase chain:      angle(iq) -> unwrap -> loopback -> detrend -> normalize.
    """
    cfg = cfg or ExtractionConfig()
    rec.validate()
    mag = np.abs(rec.iq)
    phase = np.unwrap(np.angle(rec.iq), axis=-1)

    def chain(rows):
        rows = dsp.loopback_rows(rows, cfg.loopback_alpha)
        return dsp.detrend_rows(rows, cfg.detrend_order)

    mag_raw = chain(mag)
    ph_raw = chain(phase)
    mag_norm = dsp.min_max_normalize_rows(mag_raw)
    ph_norm = dsp.min_max_normalize_rows(ph_raw)

    cands = []
    for d in range(rec.num_bins):
        cands.append(CandidateSeries(d, MAGNITUDE, mag_norm[d], mag_raw[d]))
        cands.append(CandidateSeries(d, PHASE, ph_norm[d], ph_raw[d]))
    return CandidateBank(
        candidates=cands,
        num_bins=rec.num_bins,
        num_samples=rec.num_samples,
        sample_rate_hz=rec.sample_rate_hz,
        range_start_m=rec.range_start_m,
        bin_size_m=rec.bin_size_m,
    )


def bank_to_csv(bank: CandidateBank, path) -> None:
    """Dump the normalized candidates, one column per candidate."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.key for c in bank.candidates])
        matrix = np.stack([c.samples for c in bank.candidates], axis=1)
        for row in matrix:
            writer.writerow([f"{v:.9g}" for v in row])
