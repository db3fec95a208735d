"""Shared signal-processing primitives.

Everything in here is a pure function of its inputs. Conventions used by
the rest of the package:

* signals are 1-D float64 numpy arrays sampled on the slow-time axis;
* peak prominence thresholds assume the signal was min-max normalized
  first, so ``0.1`` means "10% of the signal span";
* degenerate inputs return well-defined values (constant signals
  normalize to 0.5, correlation of a constant is undefined and reported
  as ``None``) instead of NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _sig

from .errors import (
    BadOrder,
    ConfigError,
    InvariantViolation,
    LengthMismatch,
    TooShort,
    WindowTooLarge,
)

__all__ = [
    "PeakSet",
    "savitzky_golay",
    "detrend_poly",
    "loopback_filter",
    "unwrap_phase",
    "find_peaks",
    "peak_widths",
    "pearson_r",
    "power_spectrum",
    "min_max_normalize",
]


@dataclass
class PeakSet:
    """Detected local maxima with their prominences and half-height widths.

    ``widths`` and ``width_heights`` are measured at the default relative
    height of 0.5; call :func:`peak_widths` for a different evaluation height.
    """

    indices: np.ndarray
    prominences: np.ndarray
    left_bases: np.ndarray
    right_bases: np.ndarray
    widths: np.ndarray
    width_heights: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)
        n = len(self.indices)
        if any(
            len(np.atleast_1d(a)) != n
            for a in (self.prominences, self.left_bases, self.right_bases, self.widths, self.width_heights)
        ):
            raise InvariantViolation("peak arrays must have equal length")
        if n > 1 and not np.all(np.diff(self.indices) > 0):
            raise InvariantViolation("peak indices must be strictly increasing")
        if n and (np.any(self.prominences <= 0) or np.any(self.widths <= 0)):
            raise InvariantViolation("prominences and widths must be positive")

    def __len__(self) -> int:
        return len(self.indices)


def _as_vector(y, min_len=1, name="signal"):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise InvariantViolation(f"{name} must be 1-D, got shape {y.shape}")
    if y.size < min_len:
        raise TooShort(f"{name} has {y.size} samples, need at least {min_len}")
    return y


def savitzky_golay(y, poly_order: int, frame_len: int):
    """Least-squares polynomial smoother.

    Each output sample is the value at the window center of the
    polynomial of degree ``poly_order`` fitted to the ``frame_len``
    samples around it. The first and last half-windows are handled by
    fitting the polynomial once to the first/last full window and
    evaluating it at the edge offsets, so polynomials of degree up to
    ``poly_order`` pass through unchanged everywhere.
    """
    y = _as_vector(y)
    if frame_len % 2 == 0 or frame_len < 1:
        raise BadOrder(f"frame_len must be odd and positive, got {frame_len}")
    if poly_order >= frame_len:
        raise BadOrder(f"poly_order {poly_order} must be < frame_len {frame_len}")
    if y.size < frame_len:
        raise WindowTooLarge(f"signal of {y.size} samples shorter than frame_len {frame_len}")
    return _sig.savgol_filter(y, frame_len, poly_order, mode="interp")


def _poly_design(n: int, order: int):
    # Vandermonde on [-1, 1] keeps the normal equations well conditioned.
    t = np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)
    return np.vander(t, order + 1, increasing=True)


def detrend_rows(rows, order: int):
    """Remove the least-squares polynomial trend from each row of a 2-D array."""
    rows = np.asarray(rows, dtype=np.float64)
    v = _poly_design(rows.shape[-1], order)
    pinv = np.linalg.pinv(v)
    coeffs = rows @ pinv.T
    return rows - coeffs @ v.T


def detrend_poly(y, order: int):
    """Subtract the least-squares polynomial fit of the given order."""
    y = _as_vector(y)
    if y.size <= order:
        raise TooShort(f"need more than {order} samples to remove an order-{order} trend")
    return detrend_rows(y[np.newaxis, :], order)[0]


def loopback_filter(x, alpha: float):
    """Subtract a running exponential baseline (static-clutter remover).

    The baseline follows ``b[0] = x[0]``, ``b[t] = alpha*b[t-1] +
    (1-alpha)*x[t]`` and the output is ``x - b``, so constant inputs map
    to zero and slow drifts are suppressed while respiration-band motion
    passes through.
    """
    x = _as_vector(x)
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"loopback alpha must be in (0, 1), got {alpha}")
    return loopback_rows(x[np.newaxis, :], alpha)[0]


def loopback_rows(rows, alpha: float):
    """Row-wise :func:`loopback_filter` for a 2-D array."""
    rows = np.asarray(rows, dtype=np.float64)
    # IIR baseline; zi chosen so that b[0] == x[0].
    zi = alpha * rows[:, :1]
    baseline, _ = _sig.lfilter([1.0 - alpha], [1.0, -alpha], rows, axis=-1, zi=zi)
    return rows - baseline


def unwrap_phase(theta, jump_threshold: float = np.pi):
    """Remove 2-pi jumps so consecutive phase differences stay within (-pi, pi]."""
    theta = _as_vector(theta)
    return np.unwrap(theta, discont=jump_threshold)


def peak_widths(y, peaks: PeakSet, rel_height: float = 0.5):
    """Peak widths at ``height = peak - rel_height * prominence``.

    Crossings are found by linear interpolation, searching outward from
    each peak no further than its prominence bases. Returns an empty
    array for an empty peak set.
    """
    y = _as_vector(y)
    if len(peaks) == 0:
        return np.empty(0)
    widths, _, _, _ = _sig.peak_widths(
        y,
        peaks.indices,
        rel_height=rel_height,
        prominence_data=(peaks.prominences, peaks.left_bases, peaks.right_bases),
    )
    return widths


def find_peaks(y, min_prominence: float) -> PeakSet:
    """Local maxima with prominence >= ``min_prominence``.

    Plateaus report their midpoint (rounded down). The prominence of a
    peak is its height above the higher of the two minima separating it
    from its nearest higher neighbour (or the signal boundary) on each
    side. Widths at half prominence are included for convenience.
    """
    y = _as_vector(y, min_len=3)
    idx, props = _sig.find_peaks(y, prominence=min_prominence)
    if idx.size == 0:
        e = np.empty(0)
        return PeakSet(np.empty(0, dtype=np.intp), e, e, e, e, e)
    widths, width_heights, _, _ = _sig.peak_widths(
        y,
        idx,
        rel_height=0.5,
        prominence_data=(props["prominences"], props["left_bases"], props["right_bases"]),
    )
    return PeakSet(
        indices=idx,
        prominences=props["prominences"],
        left_bases=props["left_bases"],
        right_bases=props["right_bases"],
        widths=widths,
        width_heights=width_heights,
    )


def pearson_r(x, y):
    """Pearson correlation coefficient, or ``None`` when undefined.

    Undefined means either vector has zero variance; callers decide how
    to treat that case.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape} differ")
    if x.size < 2:
        raise LengthMismatch("need at least 2 samples")
    xd = x - x.mean()
    yd = y - y.mean()
    denom = np.sqrt((xd * xd).sum()) * np.sqrt((yd * yd).sum())
    if denom == 0.0:
        return None
    return float(np.clip((xd * yd).sum() / denom, -1.0, 1.0))


def pearson_rows(rows, y):
    """Correlation of each row of a 2-D array against ``y``; NaN where undefined."""
    rows = np.asarray(rows, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if rows.shape[-1] != y.size:
        raise LengthMismatch(f"row length {rows.shape[-1]} vs {y.size}")
    rd = rows - rows.mean(axis=-1, keepdims=True)
    yd = y - y.mean()
    denom = np.sqrt((rd * rd).sum(axis=-1)) * np.sqrt((yd * yd).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (rd * yd).sum(axis=-1) / denom
    r[~np.isfinite(r)] = np.nan
    return np.clip(r, -1.0, 1.0)


def power_spectrum(y, sample_rate_hz: float):
    """Hann-windowed one-sided power spectrum.

    Returns ``(freqs, power)`` with bin k at ``k * fs / N`` Hz and power
    ``|rfft(hann * y)|**2``.
    """
    y = _as_vector(y, min_len=8)
    if sample_rate_hz <= 0:
        raise ConfigError("sample_rate_hz must be positive")
    window = np.hanning(y.size)
    spectrum = np.fft.rfft(y * window)
    freqs = np.fft.rfftfreq(y.size, 1.0 / sample_rate_hz)
    return freqs, np.abs(spectrum) ** 2


def min_max_normalize(y):
    """Affinely map the signal onto [0, 1]; constants map to all 0.5."""
    y = _as_vector(y)
    lo = y.min()
    hi = y.max()
    if hi == lo:
        return np.full_like(y, 0.5)
    return (y - lo) / (hi - lo)


def min_max_normalize_rows(rows):
    """Row-wise :func:`min_max_normalize`."""
    rows = np.asarray(rows, dtype=np.float64)
    lo = rows.min(axis=-1, keepdims=True)
    hi = rows.max(axis=-1, keepdims=True)
    span = hi - lo
    out = np.full_like(rows, 0.5)
    ok = (span > 0).ravel()
    out[ok] = (rows[ok] - lo[ok]) / span[ok]
    return out
