"""Feature oracles: direct arithmetic, brute-force DFT, and algebraic identities."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nilmevents.errors import DataError
from nilmevents.features import (
    FeatureKind,
    admittance,
    cusum,
    delta,
    delta_cusum,
    extract_feature,
    periodize,
    rms_per_period,
    spectral_flatness,
    spectral_flatness_of_spectrum,
)
from nilmevents.io import WaveformSegment


def _sine_segment(fs=12000, f0=60, seconds=10.0, amp=np.sqrt(2.0)):
    n = int(fs * seconds)
    t = np.arange(n) / fs
    wave = (amp * np.sin(2 * np.pi * f0 * t)).astype(np.float64)
    return WaveformSegment(voltage=wave * 230.0, current=wave, fs=fs, F0=f0)


finite_series = arrays(
    np.float64, st.integers(min_value=2, max_value=64),
    elements=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
)


class TestPeriodize:
    def test_blued_rates(self):
        seg = _sine_segment(fs=12000, f0=60)
        assert periodize(seg).shape == (600, 200)

    def test_blond_rates(self):
        seg = _sine_segment(fs=6400, f0=50)
        assert periodize(seg).shape == (500, 128)

    def test_single_period(self):
        seg = _sine_segment(fs=1000, f0=50, seconds=0.02)
        assert periodize(seg).shape == (1, 20)

    def test_non_divisible_length(self):
        seg = WaveformSegment(voltage=np.zeros(30), current=np.zeros(30), fs=1000, F0=50)
        seg = WaveformSegment(voltage=seg.voltage[:15], current=seg.current[:15], fs=1000, F0=50)
        with pytest.raises(DataError, match="not divisible"):
            periodize(seg)


class TestRms:
    def test_unit_sine(self):
        # RMS of a sine with amplitude sqrt(2) is exactly 1
        values = rms_per_period(periodize(_sine_segment()))
        assert np.all(np.abs(values - 1.0) <= 1e-9)

    def test_zeros(self):
        assert np.all(rms_per_period(np.zeros((5, 8))) == 0.0)

    def test_dc_level(self):
        assert np.allclose(rms_per_period(np.full((3, 8), -2.5)), 2.5)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            rms_per_period(np.empty((0, 8)))

    @given(finite_series.map(lambda x: np.tile(x, (3, 1))), st.floats(-100, 100))
    @settings(max_examples=50, deadline=None)
    def test_scale_equivariance(self, periods, c):
        scaled = rms_per_period(c * periods)
        ref = abs(c) * rms_per_period(periods)
        assert np.allclose(scaled, ref, rtol=1e-9, atol=1e-12)


class TestDelta:
    def test_direct_arithmetic(self):
        assert np.array_equal(delta(np.array([3.0, 1.0, 4.0])), np.array([2.0, -3.0]))

    def test_constant_series(self):
        assert np.all(delta(np.full(10, 7.0)) == 0.0)

    def test_length_contract(self):
        assert len(delta(np.arange(500.0))) == 499

    def test_too_short(self):
        with pytest.raises(DataError):
            delta(np.array([1.0]))


class TestAdmittance:
    def test_direct_division(self):
        out = admittance(np.array([2.0, 2.0]), np.array([230.0, 115.0]))
        assert np.allclose(out, [2.0 / 230.0, 2.0 / 115.0], rtol=1e-12)

    def test_zero_current(self):
        assert np.all(admittance(np.zeros(4), np.full(4, 230.0)) == 0.0)

    def test_dead_voltage_rejected(self):
        with pytest.raises(DataError, match="dead"):
            admittance(np.ones(3), np.array([230.0, 0.0, 230.0]))

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="mismatch"):
            admittance(np.ones(3), np.ones(4) * 230.0)


class TestSpectralFlatness:
    def test_flat_spectrum_exactly_one(self):
        assert spectral_flatness_of_spectrum(np.full(16, 3.7)) == 1.0

    def test_single_bin_exactly_zero(self):
        spectrum = np.zeros(16)
        spectrum[3] = 5.0
        assert spectral_flatness_of_spectrum(spectrum) == 0.0

    def test_impulse_period_is_flat(self):
        # DFT of a unit impulse is exactly flat, so SPF is exactly 1
        periods = np.zeros((1, 32))
        periods[0, 0] = 1.0
        assert spectral_flatness(periods)[0] == 1.0

    def test_all_zero_period(self):
        assert spectral_flatness(np.zeros((2, 16)))[0] == 0.0

    def test_pure_sine_near_zero_vs_dft_oracle(self):
        n = 64
        period = np.sin(2 * np.pi * np.arange(n) / n)[None, :]
        # brute-force O(N^2) DFT as the independent oracle
        k = np.arange(n)
        dft = np.array([np.sum(period[0] * np.exp(-2j * np.pi * f * k / n)) for f in range(n // 2 + 1)])
        energy = np.abs(dft) ** 2
        oracle = np.exp(np.mean(np.log(energy[1:] + 1e-30))) / np.mean(energy[1:])
        got = spectral_flatness(period)[0]
        assert got == pytest.approx(oracle, abs=1e-12)
        assert got < 1e-3

    def test_range_and_scale_invariance(self):
        rng = np.random.default_rng(5)
        periods = rng.normal(size=(20, 32))
        spf = spectral_flatness(periods)
        assert np.all((spf >= 0.0) & (spf <= 1.0))
        assert np.allclose(spectral_flatness(3.0 * periods), spf, rtol=1e-9)

    def test_short_period_rejected(self):
        with pytest.raises(DataError):
            spectral_flatness(np.ones((1, 3)))


class TestCusum:
    def test_direct_arithmetic(self):
        assert np.allclose(cusum(np.array([1.0, 2.0, 3.0])), [-1.0, -1.0, 0.0])

    def test_constant_series(self):
        assert np.allclose(cusum(np.full(10, 4.2)), 0.0, atol=1e-12)

    def test_endpoint_zero_on_random_series(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            x = rng.uniform(-1e3, 1e3, size=rng.integers(2, 200))
            endpoint = cusum(x)[-1]
            assert abs(endpoint) <= 1e-9 * len(x) * np.max(np.abs(x))

    @given(finite_series, st.floats(-1e3, 1e3))
    @settings(max_examples=50, deadline=None)
    def test_shift_invariance(self, x, c):
        scale = max(1.0, np.max(np.abs(x)), abs(c))
        assert np.allclose(cusum(x + c), cusum(x), atol=1e-9 * len(x) * scale)


class TestDeltaCusum:
    def test_direct_arithmetic(self):
        assert np.allclose(delta_cusum(np.array([1.0, 2.0, 3.0])), [0.0, -1.0])

    def test_constant_series(self):
        assert np.allclose(delta_cusum(np.full(8, 2.0)), 0.0, atol=1e-12)

    def test_mean_identity_on_random_series(self):
        # algebraic expansion: delta_cusum[k] = mean(x) - x[k+1]
        rng = np.random.default_rng(13)
        for _ in range(200):
            x = rng.uniform(-100, 100, size=rng.integers(2, 300))
            expected = np.mean(x) - x[1:]
            assert np.allclose(delta_cusum(x), expected, atol=1e-9 * len(x) * np.max(np.abs(x)))


class TestExtractFeature:
    def test_dimensions_fixed_per_kind(self):
        seg = _sine_segment()
        for kind in FeatureKind:
            assert len(extract_feature(seg, kind).values) == 600

    def test_delta_kinds_padded(self):
        seg = _sine_segment()
        fv = extract_feature(seg, FeatureKind.DELTA_CUSUM)
        assert fv.values[-1] == 0.0

    def test_purity(self, small_dataset):
        rec, _ = small_dataset
        from nilmevents.io import slice_segment

        seg = slice_segment(rec, 60.0)
        a = extract_feature(seg, FeatureKind.CUSUM).values
        b = extract_feature(seg, FeatureKind.CUSUM).values
        assert np.array_equal(a, b)

    def test_thread_pool_equality(self, small_dataset):
        rec, _ = small_dataset
        from nilmevents.io import slice_segment

        segs = [slice_segment(rec, 20.0 + 5 * i) for i in range(16)]
        serial = [extract_feature(s, FeatureKind.CUSUM).values for s in segs]
        with ThreadPoolExecutor(max_workers=4) as pool:
            parallel = list(pool.map(lambda s: extract_feature(s, FeatureKind.CUSUM).values, segs))
        for a, b in zip(serial, parallel):
            assert np.array_equal(a, b)
