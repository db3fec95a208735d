"""Quality scoring and candidate selection.

The quality score of a candidate is the mean Pearson correlation between
the autoregressive model's predicted futures and the actual futures over
all sliding windows of the candidate. Scores live in [-1, 1]; windows
whose correlation is undefined (a constant prediction or a constant
actual future) contribute 0, so a model that emits constants scores low.

Selection drops confidently-inverted candidates first and picks the
highest-scoring survivor. If the detector rejected everything, the
highest-scoring candidate of the full bank is taken and flipped back
instead. Ties break deterministically toward the lower bin index, with
magnitude before phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import armodel, dsp
from .armodel import ArModel
from .candidates import CandidateBank, CandidateSeries
from .errors import EmptyBank, ShapeMismatch, TooShort
from .inversion import InversionConfig, InversionVerdict, bank_verdicts, prefilter_bank

__all__ = ["ScoredCandidate", "SelectionResult", "quality_score", "score_many", "select", "argmax_canonical"]

# Cap on windows per predict_batch call; keeps peak memory flat for big banks.
_BATCH_WINDOWS = 32768


@dataclass
class ScoredCandidate:
    candidate_key: str
    score: float
    num_windows: int
    inversion: InversionVerdict


@dataclass
class SelectionResult:
    selected: CandidateSeries
    score: float
    flipped: bool
    diagnostics: list[ScoredCandidate]

    def to_dict(self) -> dict:
        return {
            "selected": self.selected.key,
            "score": self.score,
            "flipped": self.flipped,
            "diagnostics": [
                {
                    "candidate_key": d.candidate_key,
                    "score": d.score,
                    "inverted": d.inversion.inverted,
                    "ratio": None if np.isnan(d.inversion.ratio) else d.inversion.ratio,
                }
                for d in self.diagnostics
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _rowwise_pearson(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ad = a - a.mean(axis=1, keepdims=True)
    bd = b - b.mean(axis=1, keepdims=True)
    denom = np.sqrt((ad * ad).sum(axis=1)) * np.sqrt((bd * bd).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (ad * bd).sum(axis=1) / denom
    return np.clip(r, -1.0, 1.0)


def score_many(model: ArModel, series_list: list[np.ndarray], hp=None) -> tuple[np.ndarray, int]:
    """Quality scores for equal-length series, batching all windows together.

    Returns (scores, windows_per_series). ``hp`` may override the window
    stepping; history/future lengths always come from the model.
    """
    hp = hp or model.hp
    if hp.history_len != model.hp.history_len or hp.future_len != model.hp.future_len:
        raise ShapeMismatch(
            f"window geometry ({hp.history_len}, {hp.future_len}) does not match "
            f"the model ({model.hp.history_len}, {model.hp.future_len})"
        )
    if not series_list:
        return np.empty(0), 0
    histories, futures = [], []
    for samples in series_list:
        hist, fut = armodel.sequence_windows(np.asarray(samples, dtype=np.float64), hp)
        histories.append(hist)
        futures.append(fut)
    n_win = len(histories[0])
    hist_all = np.concatenate(histories)
    fut_all = np.concatenate(futures)
    preds = np.empty_like(fut_all, dtype=np.float64)
    for start in range(0, len(hist_all), _BATCH_WINDOWS):
        stop = start + _BATCH_WINDOWS
        preds[start:stop] = armodel.predict_batch(model, hist_all[start:stop]).astype(np.float64)
    r = _rowwise_pearson(preds, fut_all)
    r = np.nan_to_num(r, nan=0.0)
    return r.reshape(len(series_list), n_win).mean(axis=1), n_win


def quality_score(model: ArModel, y, hp=None) -> tuple[float, int]:
    """Mean predicted-vs-actual correlation across the sliding windows of ``y``.

    ``hp`` defaults to the model's own hyperparameters (which carry the
    window geometry the model was trained with).
    """
    hp = hp or model.hp
    y = np.asarray(y, dtype=np.float64)
    if y.size < hp.window_len:
        raise TooShort(f"need at least {hp.window_len} samples, got {y.size}")
    scores, n_win = score_many(model, [y], hp)
    return float(scores[0]), n_win


def argmax_canonical(scores: np.ndarray) -> int:
    # Strict > keeps the first (lowest bin, magnitude-first) on ties.
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def select(
    bank: CandidateBank,
    model: ArModel,
    r_th: float | None = None,
    inv_cfg: InversionConfig | None = None,
) -> SelectionResult:
    """Full pipeline: prefilter inversions, score survivors, take the best.

    When every candidate is confidently inverted the selection falls back
    to the best-scoring candidate of the whole bank and flips it, which
    is reported via ``flipped=True``.
    """
    if len(bank) == 0:
        raise EmptyBank("cannot select from an empty bank")
    verdicts = bank_verdicts(bank, r_th, inv_cfg)
    kept, _ = prefilter_bank(bank, r_th, inv_cfg, verdicts=verdicts)
    verdict_by_key = {c.key: v for c, v in zip(bank.candidates, verdicts)}
    flipped = len(kept) == 0
    pool = bank if flipped else kept
    scores, n_win = score_many(model, [c.samples for c in pool.candidates])
    diagnostics = [
        ScoredCandidate(c.key, float(s), n_win, verdict_by_key[c.key])
        for c, s in zip(pool.candidates, scores)
    ]
    best = argmax_canonical(scores)
    chosen = pool.candidates[best]
    if flipped:
        chosen = CandidateSeries(
            bin_index=chosen.bin_index,
            channel=chosen.channel,
            samples=dsp.min_max_normalize(-chosen.samples),
            raw_samples=-chosen.raw_samples,
        )
    return SelectionResult(
        selected=chosen,
        score=float(scores[best]),
        flipped=flipped,
        diagnostics=diagnostics,
    )


def waveform_to_csv(samples: np.ndarray, path, header: str = "value") -> None:
    """Single-column CSV dump of a waveform."""
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for v in np.asarray(samples, dtype=np.float64):
            fh.write(f"{v:.9g}\n")
