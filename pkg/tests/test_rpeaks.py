import numpy as np
import pytest

from vitalstream.errors import NoPeaksFound, SignalTooShort, WrongChannel
from vitalstream.rpeaks import detect_r_peaks
from vitalstream.signal_model import Channel, make_sample_series

from conftest import gaussian_bump_ecg, rr_train_ecg


def brute_force_peaks(values, min_gap):
    """Local maxima above half the global max, greedy forward gap filter."""
    limit = 0.5 * values.max()
    kept = []
    for i in range(1, len(values) - 1):
        if values[i] > values[i - 1] and values[i] > values[i + 1] \
                and values[i] >= limit:
            if not kept or i - kept[-1] >= min_gap:
                kept.append(i)
    return kept


class TestDetectRPeaks:
    def test_regular_train_hits_bump_centers(self):
        series, centers = gaussian_bump_ecg(
            [0.5 + k for k in range(10)], 10.5, 250.0)
        peaks = detect_r_peaks(series)
        assert len(peaks) == 10
        assert np.max(np.abs(peaks - centers)) <= 1

    def test_all_zero_signal(self):
        series = make_sample_series(Channel.ECG, 250, 0, np.zeros(2500))
        with pytest.raises(NoPeaksFound):
            detect_r_peaks(series)

    def test_refractory_suppresses_close_bump(self):
        # two bumps 100 ms apart, plus anchors to keep themes comparable
        series, _ = gaussian_bump_ecg([1.0, 2.0, 3.0, 3.1, 4.2], 5.0, 250.0)
        peaks = detect_r_peaks(series)
        gap = int(250 * 0.2)
        expected = brute_force_peaks(series.values, gap)
        assert len(peaks) == len(expected) == 4

    def test_spacing_invariant(self, rng):
        rr = rng.uniform(350, 1200, size=20)
        series, _ = rr_train_ecg(rr.tolist(), rate_hz=360.0,
                                 noise=0.03, rng=rng)
        peaks = detect_r_peaks(series)
        assert np.all(np.diff(peaks) >= int(360.0 * 0.2))

    def test_noisy_train_recovers_rr(self, rng):
        rr = [820.0, 780.0, 900.0, 860.0, 810.0, 840.0, 790.0, 880.0]
        series, centers = rr_train_ecg(rr, rate_hz=250.0, noise=0.02, rng=rng)
        peaks = detect_r_peaks(series)
        assert len(peaks) == len(centers)
        rr_detected = np.diff(peaks) * 1000.0 / 250.0
        np.testing.assert_allclose(rr_detected, rr, atol=12.0)

    def test_too_short(self):
        series = make_sample_series(Channel.ECG, 250, 0, np.ones(250))
        with pytest.raises(SignalTooShort):
            detect_r_peaks(series)

    def test_wrong_channel(self):
        series = make_sample_series(Channel.EMG_BICEP, 250, 0, np.ones(2500))
        with pytest.raises(WrongChannel):
            detect_r_peaks(series)

    def test_indices_strictly_increasing(self, rng):
        series, _ = rr_train_ecg([800] * 12, rate_hz=125.0, noise=0.05,
                                 rng=rng)
        peaks = detect_r_peaks(series)
        assert np.all(np.diff(peaks) > 0)
