"""Independent brute-force references used by the test suite.

Everything here is written directly from first principles (O(N^2) scans,
normal equations, closed-form recursions) and deliberately shares no code
with the package implementation.
"""

from __future__ import annotations

import numpy as np


def brute_peaks(y):
    """All local maxima of ``y``; plateaus report their midpoint (rounded down)."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    peaks = []
    i = 1
    while i < n - 1:
        if y[i - 1] < y[i]:
            j = i
            while j < n - 1 and y[j + 1] == y[i]:
                j += 1
            if j < n - 1 and y[j + 1] < y[i]:
                peaks.append((i + j) // 2)
            i = j + 1
        else:
            i += 1
    return np.asarray(peaks, dtype=np.intp)


def brute_prominence(y, peak):
    """Prominence plus the flanking base positions of one peak.

    On each side, walk to the nearest strictly-higher sample (or the
    boundary) and record the lowest point passed; the prominence is the
    peak height above the higher of the two side minima. The returned
    bases are the positions of those minima, matching the search windows
    that the width measurement is allowed to use.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    left_min, left_base = y[peak], peak
    i = peak - 1
    while i >= 0 and y[i] <= y[peak]:
        if y[i] < left_min:
            left_min, left_base = y[i], i
        i -= 1
    right_min, right_base = y[peak], peak
    i = peak + 1
    while i < n and y[i] <= y[peak]:
        if y[i] < right_min:
            right_min, right_base = y[i], i
        i += 1
    return y[peak] - max(left_min, right_min), left_base, right_base


def brute_width(y, peak, prominence, left_base, right_base, rel_height=0.5):
    """Width of one peak at ``height = y[peak] - rel_height*prominence``.

    Crossings are located by linear interpolation, searching outward from
    the peak but no further than the prominence bases.
    """
    y = np.asarray(y, dtype=np.float64)
    height = y[peak] - rel_height * prominence
    i = peak
    while i > left_base and y[i] > height:
        i -= 1
    left = float(i)
    if y[i] < height:
        left += (height - y[i]) / (y[i + 1] - y[i])
    i = peak
    while i < right_base and y[i] > height:
        i += 1
    right = float(i)
    if y[i] < height:
        right -= (height - y[i]) / (y[i - 1] - y[i])
    return right - left, height


def brute_peak_analysis(y, min_prominence, rel_height=0.5):
    """Indices, prominences, and widths of all sufficiently prominent peaks."""
    rows = []
    for peak in brute_peaks(y):
        prom, lb, rb = brute_prominence(y, peak)
        if prom >= min_prominence:
            width, height = brute_width(y, peak, prom, lb, rb, rel_height)
            rows.append((int(peak), float(prom), float(width), float(height)))
    return rows


def savgol_center_coeff(frame_len, poly_order):
    """0th-order coefficient weights of the least-squares fit, by normal equations."""
    half = frame_len // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    design = np.vander(x, poly_order + 1, increasing=True)
    # coefficient vector of the fitted polynomial at x=0 is e0^T (D^T D)^-1 D^T y
    pinv = np.linalg.solve(design.T @ design, design.T)
    return pinv[0]


def linear_resample(samples, source_hz, target_hz):
    """Direct linear interpolation at k * source/target positions."""
    samples = np.asarray(samples, dtype=np.float64)
    n_out = int(np.floor((samples.size - 1) * target_hz / source_hz)) + 1
    out = np.empty(n_out)
    for k in range(n_out):
        pos = k * source_hz / target_hz
        i = int(np.floor(pos))
        frac = pos - i
        if i + 1 < samples.size:
            out[k] = samples[i] * (1 - frac) + samples[i + 1] * frac
        else:
            out[k] = samples[i]
    return out


def pearson_direct(x, y):
    """Correlation coefficient computed exactly from its definition."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xm, ym = x - x.mean(), y - y.mean()
    return float((xm * ym).sum() / np.sqrt((xm * xm).sum()) / np.sqrt((ym * ym).sum()))
