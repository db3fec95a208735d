import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from respiq import dsp
from respiq.errors import BadOrder, ConfigError, LengthMismatch, TooShort, WindowTooLarge

from oracles import brute_peak_analysis, pearson_direct, savgol_center_coeff


class TestSavitzkyGolay:
    def test_polynomial_passthrough(self):
        t = np.linspace(0, 1, 400)
        y = 0.3 - 1.2 * t + 0.8 * t**2 + 2.0 * t**3
        out = dsp.savitzky_golay(y, 5, 101)
        assert np.abs(out[50:-50] - y[50:-50]).max() < 1e-6

    def test_constant(self):
        out = dsp.savitzky_golay(np.full(200, 3.7), 5, 101)
        assert np.allclose(out, 3.7)

    def test_impulse_center_value(self):
        # independent oracle: solve the 5x3 normal equations directly
        weights = savgol_center_coeff(5, 2)
        y = np.zeros(11)
        y[5] = 1.0
        out = dsp.savitzky_golay(y, 2, 5)
        assert out[5] == pytest.approx(weights[2], abs=1e-12)
        assert out[5] == pytest.approx(0.4857, abs=5e-5)

    def test_even_frame_rejected(self):
        with pytest.raises(BadOrder):
            dsp.savitzky_golay(np.zeros(200), 5, 100)

    def test_order_must_be_below_frame(self):
        with pytest.raises(BadOrder):
            dsp.savitzky_golay(np.zeros(200), 7, 7)

    def test_window_longer_than_signal(self):
        with pytest.raises(WindowTooLarge):
            dsp.savitzky_golay(np.zeros(50), 5, 101)


class TestDetrend:
    def test_removes_linear_trend_exactly(self):
        t = np.arange(300, dtype=float)
        out = dsp.detrend_poly(2.0 * t + 3.0, 1)
        assert np.abs(out).max() < 1e-9

    def test_preserves_oscillation_on_top_of_trend(self):
        t = np.linspace(0, 30, 1500)
        clean = np.sin(2 * np.pi * 0.25 * t)
        out = dsp.detrend_poly(clean + 0.4 * t - 2.0, 1)
        assert dsp.pearson_r(out, clean) > 0.999

    def test_order_zero_is_mean_removal(self):
        y = np.array([1.0, 2.0, 7.0, -4.0])
        out = dsp.detrend_poly(y, 0)
        assert abs(out.mean()) < 1e-12
        assert np.allclose(out, y - y.mean())

    def test_too_short(self):
        with pytest.raises(TooShort):
            dsp.detrend_poly(np.zeros(2), 2)


class TestLoopback:
    def test_constant_maps_to_zero(self):
        assert np.abs(dsp.loopback_filter(np.full(100, 5.0), 0.95)).max() < 1e-12

    def test_step_decays_geometrically(self):
        x = np.concatenate([np.zeros(10), np.ones(90)])
        out = dsp.loopback_filter(x, 0.95)
        # closed form after the step: y[k] = alpha^(k+1) relative to the step index
        tail = out[10:20]
        ratios = tail[1:] / tail[:-1]
        assert np.allclose(ratios, 0.95, atol=1e-9)

    def test_tiny_alpha_tracks_input(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(50)
        out = dsp.loopback_filter(x, 1e-9)
        assert np.abs(out).max() < 1e-6

    def test_first_output_zero(self):
        out = dsp.loopback_filter(np.array([4.2, 1.0, 2.0]), 0.5)
        assert out[0] == 0.0

    def test_linearity(self):
        rng = np.random.default_rng(1)
        x, y = rng.standard_normal(64), rng.standard_normal(64)
        lhs = dsp.loopback_filter(2.0 * x + 3.0 * y, 0.9)
        rhs = 2.0 * dsp.loopback_filter(x, 0.9) + 3.0 * dsp.loopback_filter(y, 0.9)
        assert np.allclose(lhs, rhs, atol=1e-10)

    def test_alpha_out_of_range(self):
        with pytest.raises(ConfigError):
            dsp.loopback_filter(np.zeros(4), 1.0)


class TestUnwrap:
    def test_known_jump(self):
        out = dsp.unwrap_phase(np.array([0.0, 3.0, -3.0]))
        assert np.allclose(out, [0.0, 3.0, -3.0 + 2 * np.pi])

    def test_smooth_unchanged(self):
        theta = np.linspace(0, 2.0, 100)
        assert np.allclose(dsp.unwrap_phase(theta), theta)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_unwrap_of_wrap_restores_up_to_constant(self, seed):
        rng = np.random.default_rng(seed)
        theta = np.cumsum(rng.uniform(-2.0, 2.0, 200))
        wrapped = np.angle(np.exp(1j * theta))
        out = dsp.unwrap_phase(wrapped)
        diff = out - theta
        ks = diff / (2 * np.pi)
        assert np.allclose(ks, np.round(ks[0]), atol=1e-9)
        jumps = np.diff(out)
        assert np.all(jumps > -np.pi - 1e-12) and np.all(jumps <= np.pi + 1e-12)


class TestPeaks:
    def test_simple_two_peaks(self):
        peaks = dsp.find_peaks(np.array([0.0, 1.0, 0.0, 2.0, 0.0]), 0.5)
        assert list(peaks.indices) == [1, 3]
        assert np.allclose(peaks.prominences, [1.0, 2.0])

    def test_monotone_ramp_has_no_peaks(self):
        assert len(dsp.find_peaks(np.arange(10.0), 0.1)) == 0

    def test_plateau_midpoint(self):
        peaks = dsp.find_peaks(np.array([0.0, 1.0, 1.0, 0.0]), 0.5)
        assert list(peaks.indices) == [1]

    def test_triangle_width(self):
        y = np.concatenate([np.linspace(0, 1, 11), np.linspace(1, 0, 11)[1:]])
        peaks = dsp.find_peaks(y, 0.5)
        widths = dsp.peak_widths(y, peaks, rel_height=0.5)
        assert widths == pytest.approx([10.0])

    def test_rel_height_zero_gives_zero_width(self):
        y = np.array([0.0, 0.5, 1.0, 0.5, 0.0])
        peaks = dsp.find_peaks(y, 0.5)
        assert dsp.peak_widths(y, peaks, rel_height=0.0) == pytest.approx([0.0])

    def test_empty_peaks_empty_widths(self):
        y = np.arange(5.0)
        peaks = dsp.find_peaks(y, 0.1)
        assert dsp.peak_widths(y, peaks).size == 0

    def test_agrees_with_bruteforce_on_random_vectors(self):
        rng = np.random.default_rng(1234)
        for _ in range(300):
            n = int(rng.integers(3, 64))
            y = rng.standard_normal(n)
            min_prom = float(rng.uniform(0.05, 1.0))
            expected = brute_peak_analysis(y, min_prom)
            peaks = dsp.find_peaks(y, min_prom)
            widths = dsp.peak_widths(y, peaks, 0.5)
            assert list(peaks.indices) == [row[0] for row in expected]
            assert np.allclose(peaks.prominences, [row[1] for row in expected], atol=1e-9)
            assert np.allclose(widths, [row[2] for row in expected], atol=1e-9)


class TestPearson:
    def test_affine_invariance(self):
        x = np.array([0.4, 1.0, -2.0, 3.0])
        assert dsp.pearson_r(x, 2.5 * x + 1.0) == pytest.approx(1.0)

    def test_antiperfect(self):
        assert dsp.pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_direct_value(self):
        assert dsp.pearson_r([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)
        assert dsp.pearson_r([1, 2, 3], [1, 3, 2]) == pytest.approx(pearson_direct([1, 2, 3], [1, 3, 2]))

    def test_constant_is_undefined(self):
        assert dsp.pearson_r([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            dsp.pearson_r([1, 2], [1, 2, 3])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_symmetry_bound_and_sign_flip(self, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal(30), rng.standard_normal(30)
        r = dsp.pearson_r(x, y)
        assert -1.0 <= r <= 1.0
        assert r == pytest.approx(dsp.pearson_r(y, x))
        assert dsp.pearson_r(x, -y) == pytest.approx(-r)


class TestPowerSpectrum:
    def test_tone_bin(self):
        fs, n = 50.0, 1500
        t = np.arange(n) / fs
        freqs, power = dsp.power_spectrum(np.sin(2 * np.pi * 0.3 * t), fs)
        assert abs(freqs[np.argmax(power)] - 0.3) <= fs / n + 1e-9

    def test_dc_only(self):
        freqs, power = dsp.power_spectrum(np.full(64, 2.0), 50.0)
        assert np.argmax(power) == 0
        assert power[1:].max() < power[0] * 1e-20

    def test_white_noise_band_energy_ratio(self):
        rng = np.random.default_rng(7)
        y = rng.standard_normal(8192)
        freqs, power = dsp.power_spectrum(y, 50.0)
        band = (freqs > 0) & (freqs <= 10.0)
        rest = freqs > 0
        ratio = power[band].sum() / power[rest].sum()
        assert ratio == pytest.approx(10.0 / 25.0, rel=0.2)

    def test_too_short(self):
        with pytest.raises(TooShort):
            dsp.power_spectrum(np.zeros(4), 50.0)


class TestMinMaxNormalize:
    def test_basic(self):
        assert np.allclose(dsp.min_max_normalize([2.0, 4.0, 6.0]), [0.0, 0.5, 1.0])

    def test_constant_maps_to_half(self):
        assert np.allclose(dsp.min_max_normalize(np.full(5, 9.0)), 0.5)

    def test_idempotent_on_unit_span(self):
        y = np.array([0.0, 0.25, 1.0])
        assert np.allclose(dsp.min_max_normalize(y), y)
