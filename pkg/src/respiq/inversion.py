"""Detector for upside-down respiration candidates.

Inhalation takes active muscle effort, so a chest waveform spends less
than half of each cycle near full expansion: genuine candidates show
narrow peaks separated by wide valleys. Comparing the mean half-height
peak width of a smoothed candidate against that of its negation therefore
separates upright from inverted series: width ratio below the threshold
means upright, at or above it means inverted.

A candidate with no detectable peaks on either side yields an
*unconfident* not-inverted verdict rather than an error; wrongly flipping
a good signal costs more than keeping an inverted one, so every
downstream policy treats unconfident verdicts conservatively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import dsp
from .candidates import CandidateBank, CandidateSeries
from .errors import TooShort

__all__ = [
    "InversionConfig",
    "InversionVerdict",
    "detect_inversion",
    "bank_verdicts",
    "prefilter_bank",
    "postflip",
    "verdicts_to_jsonl",
]


@dataclass
class InversionConfig:
    r_th: float = 1.0
    savgol_order: int = 5
    # The natural 2 s window at 50 Hz would be 100 samples, but the
    # smoother needs an odd frame; 101 is the nearest odd length.
    savgol_frame: int = 101
    prominence: float = 0.1
    rel_height: float = 0.5


@dataclass
class InversionVerdict:
    inverted: bool
    ratio: float
    w_pos: float
    w_inv: float
    confident: bool

    def to_dict(self) -> dict:
        def opt(v):
            return None if np.isnan(v) else float(v)

        return {
            "inverted": self.inverted,
            "ratio": opt(self.ratio),
            "w_pos": opt(self.w_pos),
            "w_inv": opt(self.w_inv),
            "confident": self.confident,
        }


def _mean_width(y_s, cfg: InversionConfig) -> float:
    peaks = dsp.find_peaks(y_s, cfg.prominence)
    if len(peaks) == 0:
        return np.nan
    return float(np.mean(dsp.peak_widths(y_s, peaks, cfg.rel_height)))


def detect_inversion(y, r_th: float | None = None, cfg: InversionConfig | None = None) -> InversionVerdict:
    """Classify a candidate as inverted via peak-width asymmetry.

    The candidate is normalized (so the prominence threshold is
    scale-free) and smoothed, then the mean half-height peak width is
    measured on the smoothed signal and on its negation. A ratio
    ``w_pos / w_inv`` at or above ``r_th`` flags the signal as inverted.
    """
    cfg = cfg or InversionConfig()
    if r_th is None:
        r_th = cfg.r_th
    y = np.asarray(y, dtype=np.float64)
    if y.size < cfg.savgol_frame:
        raise TooShort(f"need at least {cfg.savgol_frame} samples, got {y.size}")
    y_s = dsp.savitzky_golay(dsp.min_max_normalize(y), cfg.savgol_order, cfg.savgol_frame)
    w_pos = _mean_width(y_s, cfg)
    w_inv = _mean_width(-y_s, cfg)
    if np.isnan(w_pos) or np.isnan(w_inv):
        return InversionVerdict(False, np.nan, w_pos, w_inv, confident=False)
    ratio = w_pos / w_inv
    return InversionVerdict(not ratio < r_th, ratio, w_pos, w_inv, confident=True)


def bank_verdicts(bank: CandidateBank, r_th: float | None = None, cfg: InversionConfig | None = None) -> list[InversionVerdict]:
    """Verdicts for every candidate, in bank order."""
    return [detect_inversion(c.samples, r_th, cfg) for c in bank.candidates]


def prefilter_bank(
    bank: CandidateBank,
    r_th: float | None = None,
    cfg: InversionConfig | None = None,
    verdicts: list[InversionVerdict] | None = None,
) -> tuple[CandidateBank, list[tuple[CandidateSeries, InversionVerdict]]]:
    """Drop confidently-inverted candidates before selection.

    Returns the surviving bank (may be empty) and the rejected candidates
    with their verdicts for diagnostics. Unconfident verdicts survive.
    """
    if verdicts is None:
        verdicts = bank_verdicts(bank, r_th, cfg)
    kept, rejected = [], []
    for cand, verdict in zip(bank.candidates, verdicts):
        if verdict.inverted and verdict.confident:
            rejected.append((cand, verdict))
        else:
            kept.append(cand)
    return bank.subset(kept), rejected


def postflip(y, r_th: float | None = None, cfg: InversionConfig | None = None) -> np.ndarray:
    """Return the re-normalized negation of ``y`` if it is confidently inverted.

    Unconfident or upright signals come back unchanged.
    """
    verdict = detect_inversion(y, r_th, cfg)
    if verdict.inverted and verdict.confident:
        return dsp.min_max_normalize(-np.asarray(y, dtype=np.float64))
    return np.asarray(y, dtype=np.float64)


def verdicts_to_jsonl(bank: CandidateBank, verdicts: list[InversionVerdict]) -> str:
    """One JSON object per candidate: key plus its verdict fields."""
    lines = []
    for cand, verdict in zip(bank.candidates, verdicts):
        row = {"candidate_key": cand.key}
        row.update(verdict.to_dict())
        lines.append(json.dumps(row))
    return "\n".join(lines) + "\n"
