import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitalstream.errors import (
    NegativeScore,
    NonPositiveInterval,
    TooFewIntervals,
    TooFewPeaks,
)
from vitalstream.hrv import (
    heart_rate_bpm,
    poincare,
    rr_series,
    stress_level,
    time_domain_metrics,
)
from vitalstream.signal_model import RrSeries, StressLevel


# Plain-loop re-derivations of the metric definitions, kept independent of
# the numpy implementations they check.

def oracle_time_domain(intervals, xx_ms=50.0):
    n = len(intervals)
    mean_rr = sum(intervals) / n
    sdnn = math.sqrt(sum((r - mean_rr) ** 2 for r in intervals) / n)
    diffs = [intervals[i + 1] - intervals[i] for i in range(n - 1)]
    rmssd = math.sqrt(sum(d * d for d in diffs) / (n - 1))
    nnxx = sum(1 for d in diffs if abs(d) > xx_ms)
    pnnxx = 100.0 * nnxx / (n - 1)
    hrs = [60000.0 / r for r in intervals]
    mean_hr = sum(hrs) / n
    std_hr = math.sqrt(sum((h - mean_hr) ** 2 for h in hrs) / n)
    return {"mean_rr": mean_rr, "sdnn": sdnn, "rmssd": rmssd, "nnxx": nnxx,
            "pnnxx": pnnxx, "mean_hr": mean_hr, "std_hr": std_hr,
            "min_hr": min(hrs), "max_hr": max(hrs)}


def oracle_poincare(intervals):
    first = intervals[:-1]
    second = intervals[1:]
    across = [(b - a) / math.sqrt(2) for a, b in zip(first, second)]
    along = [(b + a) / math.sqrt(2) for a, b in zip(first, second)]

    def pop_std(xs):
        m = sum(xs) / len(xs)
        return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))

    return pop_std(across), pop_std(along)


def make_rr(intervals):
    peaks = np.concatenate([[0], np.cumsum(intervals)]).astype(np.int64)
    return RrSeries(intervals_ms=np.asarray(intervals, dtype=float),
                    source_peaks=peaks)


class TestHeartRate:
    def test_one_beat_per_second(self):
        assert heart_rate_bpm(1000) == 60.0

    def test_800ms(self):
        assert heart_rate_bpm(800) == 75.0

    def test_zero_rejected(self):
        with pytest.raises(NonPositiveInterval):
            heart_rate_bpm(0)

    def test_negative_rejected(self):
        with pytest.raises(NonPositiveInterval):
            heart_rate_bpm(-100)

    @given(b=st.floats(min_value=24.0, max_value=240.0,
                       allow_nan=False, allow_infinity=False))
    @settings(max_examples=200, deadline=None)
    def test_inverse_of_interval(self, b):
        assert heart_rate_bpm(60000.0 / b) == pytest.approx(b, rel=1e-12)

    def test_strictly_decreasing_in_interval(self):
        rates = [heart_rate_bpm(rr) for rr in np.linspace(300, 2000, 50)]
        assert all(a > b for a, b in zip(rates, rates[1:]))


class TestRrSeriesOp:
    def test_uniform_spacing(self):
        rr = rr_series([0, 125, 250], 125)
        np.testing.assert_allclose(rr.intervals_ms, [1000.0, 1000.0])

    def test_hand_computed(self):
        rr = rr_series([0, 100], 125)
        np.testing.assert_allclose(rr.intervals_ms, [800.0])

    def test_single_peak_rejected(self):
        with pytest.raises(TooFewPeaks):
            rr_series([0], 125)


class TestTimeDomain:
    def test_constant_series(self):
        td = time_domain_metrics(make_rr([1000, 1000, 1000]))
        assert td.mean_rr_ms == 1000.0
        assert td.sdnn_ms == 0.0
        assert td.rmssd_ms == 0.0
        assert td.nnxx_count == 0

    def test_two_intervals_hand_computed(self):
        td = time_domain_metrics(make_rr([800, 1000]))
        assert td.mean_rr_ms == pytest.approx(900.0)
        assert td.rmssd_ms == pytest.approx(200.0)
        assert td.mean_hr_bpm == pytest.approx((75.0 + 60.0) / 2)
        assert td.min_hr_bpm == pytest.approx(60.0)
        assert td.max_hr_bpm == pytest.approx(75.0)
        assert td.nnxx_count == 1
        assert td.pnnxx_pct == pytest.approx(100.0)

    def test_against_oracle_300_random(self, rng):
        intervals = rng.uniform(300, 2400, size=300)
        td = time_domain_metrics(make_rr(intervals))
        o = oracle_time_domain(list(intervals))
        assert abs(td.mean_rr_ms - o["mean_rr"]) <= 1e-9
        assert abs(td.sdnn_ms - o["sdnn"]) <= 1e-9
        assert abs(td.rmssd_ms - o["rmssd"]) <= 1e-9
        assert td.nnxx_count == o["nnxx"]
        assert abs(td.pnnxx_pct - o["pnnxx"]) <= 1e-9
        assert abs(td.mean_hr_bpm - o["mean_hr"]) <= 1e-9
        assert abs(td.std_hr_bpm - o["std_hr"]) <= 1e-9

    def test_too_few_intervals(self):
        with pytest.raises(TooFewIntervals):
            time_domain_metrics(make_rr([800]))

    def test_flagged_edges_do_not_change_metrics(self):
        core = [820, 900, 780, 860]
        plain = time_domain_metrics(make_rr(core))
        padded = time_domain_metrics(make_rr([100] + core + [3000, 90]))
        assert padded.mean_rr_ms == pytest.approx(plain.mean_rr_ms)
        assert padded.sdnn_ms == pytest.approx(plain.sdnn_ms)
        assert padded.rmssd_ms == pytest.approx(plain.rmssd_ms)
        assert padded.nnxx_count == plain.nnxx_count

    def test_sdnn_algebraic_identity(self, rng):
        for _ in range(20):
            intervals = rng.uniform(300, 2400, size=int(rng.integers(2, 200)))
            td = time_domain_metrics(make_rr(intervals))
            alt = math.sqrt(np.mean(intervals ** 2) - np.mean(intervals) ** 2)
            assert abs(td.sdnn_ms ** 2 - alt ** 2) <= 1e-9 * max(1, alt ** 2)

    def test_xx_parameterized(self):
        td = time_domain_metrics(make_rr([800, 830, 920]), xx_ms=40)
        # diffs 30, 90 -> one exceeds 40 ms
        assert td.nnxx_count == 1
        assert td.xx_ms == 40


class TestPoincare:
    def test_constant_intervals(self):
        pc = poincare(make_rr([900, 900, 900, 900]))
        assert pc.sd1_ms == 0.0
        assert pc.sd2_ms == 0.0

    def test_alternating_closed_form(self):
        # odd interval count -> balanced +-200 differences, zero mean
        pc = poincare(make_rr([800, 1000] * 10 + [800]))
        assert pc.sd1_ms == pytest.approx(100 * math.sqrt(2), abs=1e-9)
        assert pc.sd2_ms == pytest.approx(0.0, abs=1e-9)

    def test_against_oracle_random(self, rng):
        intervals = rng.uniform(300, 2400, size=250)
        pc = poincare(make_rr(intervals))
        sd1, sd2 = oracle_poincare(list(intervals))
        assert abs(pc.sd1_ms - sd1) <= 1e-9
        assert abs(pc.sd2_ms - sd2) <= 1e-9
        assert len(pc.points) == len(intervals) - 1

    def test_rotation_preserves_total_variance(self, rng):
        intervals = rng.uniform(300, 2400, size=100)
        pc = poincare(make_rr(intervals))
        first, second = pc.points[:, 0], pc.points[:, 1]
        total = first.var() + second.var()
        assert abs(pc.sd1_ms ** 2 + pc.sd2_ms ** 2 - total) <= 1e-9 * max(1, total)

    def test_too_few(self):
        with pytest.raises(TooFewIntervals):
            poincare(make_rr([800, 820]))


class TestStressLevel:
    @pytest.mark.parametrize("score,expected", [
        (71.87, StressLevel.MODERATE),
        (95.0, StressLevel.VERY_LOW),
        (59.999, StressLevel.HIGH),
        (0.0, StressLevel.HIGH),
        (60.0, StressLevel.AVERAGE),
        (70.99, StressLevel.AVERAGE),
        (71.0, StressLevel.MODERATE),
        (80.99, StressLevel.MODERATE),
        (81.0, StressLevel.LOW),
        (89.99, StressLevel.LOW),
        (90.0, StressLevel.VERY_LOW),
    ])
    def test_banding(self, score, expected):
        assert stress_level(score).level is expected

    def test_negative_rejected(self):
        with pytest.raises(NegativeScore):
            stress_level(-0.001)

    @given(score=st.floats(min_value=0.0, max_value=500.0,
                           allow_nan=False, allow_infinity=False))
    @settings(max_examples=300, deadline=None)
    def test_total_function(self, score):
        report = stress_level(score)
        assert isinstance(report.level, StressLevel)
        assert report.hrv_score_ms == score
