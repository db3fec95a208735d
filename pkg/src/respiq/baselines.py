"""Literature bin-selection baselines and the ground-truth oracle.

* variance: highest peak of the per-bin variance profile (magnitude only);
* cfar: cell-averaging CFAR over the range-FFT power map (magnitude only);
* snr: in-band vs out-of-band energy ratio, searched over magnitude and
  phase candidates, with inverted candidates filtered out first;
* oracle: highest correlation with the ground truth; upper bound for any
  selector.

Variance and CFAR score the whole range landscape at once, so inverted
candidates cannot be removed beforehand; their selections get flipped
afterwards instead (the evaluation harness owns that step). A degenerate
landscape (no peaks, no detections) falls back to the global maximum: a
baseline must always answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .candidates import MAGNITUDE, CandidateBank
from .errors import EmptyBank, LengthMismatch, TooShort
from .inversion import InversionConfig, prefilter_bank

__all__ = [
    "BaselineChoice",
    "CfarConfig",
    "ca_cfar",
    "select_variance",
    "select_cfar",
    "select_snr",
    "select_oracle",
]

RESPIRATION_BAND_HZ = (0.2, 0.7)


@dataclass
class CfarConfig:
    guard: int = 2  # guard cells per side
    train: int = 8  # training cells per side
    pfa: float = 1e-3
    band_hz: tuple[float, float] = RESPIRATION_BAND_HZ


@dataclass
class BaselineChoice:
    method: str
    selected_key: str
    score_raw: float
    used_fallback: bool = False


def _require_nonempty(bank: CandidateBank):
    if len(bank) == 0:
        raise EmptyBank("candidate bank is empty")


def select_variance(bank: CandidateBank) -> BaselineChoice:
    """Bin with the highest peak of the variance-vs-range profile.

    Works on the magnitude candidates' pre-normalization samples (the
    normalized ones all span [0, 1] and would flatten the profile). If
    the profile has no peaks the global maximum wins.
    """
    _require_nonempty(bank)
    rows = bank.channel_raw(MAGNITUDE)
    variances = rows.var(axis=1)
    bins = [c.bin_index for c in bank.candidates if c.channel == MAGNITUDE]
    chosen = None
    if len(variances) >= 3:
        peaks = dsp.find_peaks(dsp.min_max_normalize(variances), 0.1)
        if len(peaks):
            chosen = peaks.indices[int(np.argmax(variances[peaks.indices]))]
    fallback = chosen is None
    if fallback:
        chosen = int(np.argmax(variances))
    return BaselineChoice(
        method="variance",
        selected_key=f"bin{bins[chosen]}:{MAGNITUDE}",
        score_raw=float(variances[chosen]),
        used_fallback=fallback,
    )


def ca_cfar(cells, guard: int, train: int, pfa: float) -> tuple[np.ndarray, np.ndarray]:
    """Cell-averaging CFAR along a vector of power cells.

    For each cell, the noise level is the mean of up to ``train`` cells
    per side beyond ``guard`` guard cells, and the threshold factor is
    ``N * (pfa**(-1/N) - 1)`` with N the number of cells actually
    averaged (fewer near the edges), which keeps the false-alarm rate at
    ``pfa`` for exponentially distributed noise power everywhere.

    Returns (detected mask, threshold per cell).
    """
    cells = np.asarray(cells, dtype=np.float64)
    n = cells.size
    cums = np.concatenate([[0.0], np.cumsum(cells)])
    idx = np.arange(n)
    # Inclusive training windows on each side, clipped to the vector.
    left_lo = np.maximum(idx - guard - train, 0)
    left_hi = idx - guard - 1
    right_lo = idx + guard + 1
    right_hi = np.minimum(idx + guard + train, n - 1)
    left_n = np.maximum(left_hi - left_lo + 1, 0)
    right_n = np.maximum(right_hi - right_lo + 1, 0)
    left_sum = np.where(left_n > 0, cums[np.clip(left_hi, 0, n - 1) + 1] - cums[left_lo], 0.0)
    right_sum = np.where(right_n > 0, cums[np.clip(right_hi, 0, n - 1) + 1] - cums[np.minimum(right_lo, n - 1)], 0.0)
    n_train = left_n + right_n
    total = left_sum + right_sum
    threshold = np.full(n, np.inf)
    ok = n_train > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = n_train[ok] * (pfa ** (-1.0 / n_train[ok]) - 1.0)
        threshold[ok] = alpha * total[ok] / n_train[ok]
    return cells > threshold, threshold


def select_cfar(bank: CandidateBank, cfg: CfarConfig | None = None) -> BaselineChoice:
    """CFAR detection over the range-FFT power map of the magnitude channel.

    The map holds the Hann-windowed FFT power of each bin's magnitude
    series; CFAR runs along the range axis for every frequency row inside
    the respiration band, and the bin holding the detection with the
    largest excess over its threshold wins. With no detections anywhere,
    the largest map cell wins.
    """
    cfg = cfg or CfarConfig()
    _require_nonempty(bank)
    rows = bank.channel_raw(MAGNITUDE)
    bins = [c.bin_index for c in bank.candidates if c.channel == MAGNITUDE]
    if rows.shape[1] < 64:
        raise TooShort(f"need at least 64 samples for the range-FFT map, got {rows.shape[1]}")
    window = np.hanning(rows.shape[1])
    power = np.abs(np.fft.rfft(rows * window, axis=1)) ** 2  # (num_bins, num_freqs)
    freqs = np.fft.rfftfreq(rows.shape[1], 1.0 / bank.sample_rate_hz)
    in_band = (freqs >= cfg.band_hz[0]) & (freqs <= cfg.band_hz[1])
    if not in_band.any():
        in_band = freqs > 0  # degenerate resolution; search everything but DC
    fmap = power.T[in_band]  # (band rows, num_bins)

    best_excess = -np.inf
    best_bin = None
    for row in fmap:
        detected, threshold = ca_cfar(row, cfg.guard, cfg.train, cfg.pfa)
        if detected.any():
            excess = row - threshold
            excess[~detected] = -np.inf
            j = int(np.argmax(excess))
            if excess[j] > best_excess:
                best_excess = excess[j]
                best_bin = j
    fallback = best_bin is None
    if fallback:
        best_bin = int(np.unravel_index(np.argmax(fmap), fmap.shape)[1])
        best_excess = float(fmap.max())
    return BaselineChoice(
        method="cfar",
        selected_key=f"bin{bins[best_bin]}:{MAGNITUDE}",
        score_raw=float(best_excess),
        used_fallback=fallback,
    )


def band_snr(samples, sample_rate_hz: float, band_hz=RESPIRATION_BAND_HZ) -> float:
    """In-band over out-of-band energy ratio, DC excluded."""
    freqs, power = dsp.power_spectrum(samples, sample_rate_hz)
    nonzero = freqs > 0
    in_band = nonzero & (freqs >= band_hz[0]) & (freqs <= band_hz[1])
    out_band = nonzero & ~in_band
    denom = power[out_band].sum()
    if denom == 0.0:
        return np.inf
    return float(power[in_band].sum() / denom)


def select_snr(
    bank: CandidateBank,
    band_hz=RESPIRATION_BAND_HZ,
    r_th: float | None = None,
    inv_cfg: InversionConfig | None = None,
) -> BaselineChoice:
    """Candidate (either channel) with the highest respiration-band SNR.

    Inverted candidates are filtered out first; if that removes
    everything, the unfiltered bank is searched instead and the caller is
    told via ``used_fallback`` (so it can flip the pick afterwards).
    """
    _require_nonempty(bank)
    kept, _ = prefilter_bank(bank, r_th, inv_cfg)
    fallback = len(kept) == 0
    pool = bank if fallback else kept
    snrs = [band_snr(c.raw_samples, bank.sample_rate_hz, band_hz) for c in pool.candidates]
    best = int(np.argmax(snrs))
    return BaselineChoice(
        method="snr",
        selected_key=pool.candidates[best].key,
        score_raw=float(snrs[best]),
        used_fallback=fallback,
    )


def select_oracle(bank: CandidateBank, truth) -> BaselineChoice:
    """Candidate with the highest correlation to the ground truth."""
    _require_nonempty(bank)
    truth = np.asarray(getattr(truth, "samples", truth), dtype=np.float64)
    if truth.size != bank.num_samples:
        raise LengthMismatch(f"truth has {truth.size} samples, bank has {bank.num_samples}")
    rs = []
    for c in bank.candidates:
        r = dsp.pearson_r(c.samples, truth)
        rs.append(-2.0 if r is None else r)
    best = int(np.argmax(rs))
    return BaselineChoice(
        method="oracle",
        selected_key=bank.candidates[best].key,
        score_raw=float(rs[best]),
    )
