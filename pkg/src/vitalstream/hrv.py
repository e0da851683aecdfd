"""Heart rate and heart-rate-variability metrics over RR intervals.

Conventions pinned here so independent checks agree bit-for-bit:

* SDNN uses the population denominator ``n``.
* RMSSD divides the squared successive differences by ``n - 1`` (the
  number of differences for ``n`` intervals).
* Lag-1 scatter spreads SD1/SD2 are population standard deviations of the
  rotated coordinates ``(RR[i+1] -+ RR[i]) / sqrt(2)``.
* Intervals outside the physiological gate are skipped by every metric but
  kept in the raw record (see :class:`~vitalstream.signal_model.RrSeries`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NegativeScore,
    NonPositiveInterval,
    TooFewIntervals,
    TooFewPeaks,
)
from .signal_model import RrSeries, StressLevel, StressReport

DEFAULT_NN_THRESHOLD_MS = 50.0

# Half-open stress bands over the RMSSD-based HRV score (ms). The two
# ambiguous integer boundaries of the source banding are resolved
# downward-exclusive, making the mapping total and contiguous.
_STRESS_BANDS = (
    (60.0, StressLevel.HIGH),      # [0, 60)
    (71.0, StressLevel.AVERAGE),   # [60, 71)
    (81.0, StressLevel.MODERATE),  # [71, 81)
    (90.0, StressLevel.LOW),       # [81, 90)
)


def heart_rate_bpm(rr_interval_ms: float) -> float:
    """Instantaneous heart rate for one RR interval: 60000 / RR(ms)."""
    if not rr_interval_ms > 0:
        raise NonPositiveInterval(f"RR interval must be > 0 ms, got {rr_interval_ms!r}")
    return 60000.0 / float(rr_interval_ms)


def rr_series(peaks, rate_hz: float) -> RrSeries:
    """Convert detected peak sample indices into RR intervals in ms."""
    peaks = np.asarray(peaks, dtype=np.int64)
    if peaks.size < 2:
        raise TooFewPeaks(f"need >= 2 peaks, got {peaks.size}")
    intervals = np.diff(peaks) * 1000.0 / float(rate_hz)
    return RrSeries(intervals_ms=intervals, source_peaks=peaks)


@dataclass(frozen=True)
class HrvTimeDomain:
    mean_rr_ms: float
    sdnn_ms: float
    rmssd_ms: float
    mean_hr_bpm: float
    std_hr_bpm: float
    min_hr_bpm: float
    max_hr_bpm: float
    nnxx_count: int
    pnnxx_pct: float
    xx_ms: float


@dataclass(frozen=True)
class PoincareMetrics:
    sd1_ms: float
    sd2_ms: float
    points: np.ndarray  # (m, 2) array of (RR[i], RR[i+1]) pairs


def time_domain_metrics(rr: RrSeries, xx_ms: float = DEFAULT_NN_THRESHOLD_MS) -> HrvTimeDomain:
    """Time-domain HRV statistics over the gated intervals.

    NNxx counts successive differences strictly greater than ``xx_ms``;
    pNNxx normalizes by the number of differences. HR statistics are taken
    over the per-interval instantaneous heart rates.
    """
    intervals = rr.unflagged()
    n = intervals.size
    if n < 2:
        raise TooFewIntervals(f"need >= 2 gated intervals, got {n}")

    mean_rr = float(np.mean(intervals))
    sdnn = float(np.sqrt(np.mean((intervals - mean_rr) ** 2)))
    diffs = np.diff(intervals)
    rmssd = float(np.sqrt(np.sum(diffs ** 2) / (n - 1)))
    nnxx = int(np.count_nonzero(np.abs(diffs) > xx_ms))
    pnnxx = 100.0 * nnxx / (n - 1)

    hr = 60000.0 / intervals
    return HrvTimeDomain(
        mean_rr_ms=mean_rr,
        sdnn_ms=sdnn,
        rmssd_ms=rmssd,
        mean_hr_bpm=float(np.mean(hr)),
        std_hr_bpm=float(np.sqrt(np.mean((hr - np.mean(hr)) ** 2))),
        min_hr_bpm=float(np.min(hr)),
        max_hr_bpm=float(np.max(hr)),
        nnxx_count=nnxx,
        pnnxx_pct=pnnxx,
        xx_ms=float(xx_ms),
    )


def poincare(rr: RrSeries) -> PoincareMetrics:
    """Lag-1 scatter of the RR series and its rotated-axes spreads.

    Points pair intervals adjacent in time; a pair is dropped if either
    member is gated out. SD1 is the spread across the identity line
    (short-term variability), SD2 the spread along it.
    """
    if len(rr) < 3:
        raise TooFewIntervals(f"need >= 3 intervals, got {len(rr)}")
    ok = ~rr.flagged
    keep = ok[:-1] & ok[1:]
    first = rr.intervals_ms[:-1][keep]
    second = rr.intervals_ms[1:][keep]
    if first.size < 2:
        raise TooFewIntervals("fewer than 2 usable lag-1 pairs after gating")

    across = (second - first) / np.sqrt(2.0)
    along = (second + first) / np.sqrt(2.0)
    sd1 = float(np.sqrt(np.mean((across - across.mean()) ** 2)))
    sd2 = float(np.sqrt(np.mean((along - along.mean()) ** 2)))
    return PoincareMetrics(sd1_ms=sd1, sd2_ms=sd2,
                           points=np.column_stack([first, second]))


def stress_level(hrv_score_ms: float) -> StressReport:
    """Band an RMSSD-based HRV score (ms) into a stress level.

    Total over all non-negative scores: [0,60) High, [60,71) Average,
    [71,81) Moderate, [81,90) Low, [90,inf) VeryLow.
    """
    score = float(hrv_score_ms)
    if not score >= 0:
        raise NegativeScore(f"HRV score must be >= 0, got {hrv_score_ms!r}")
    for upper, level in _STRESS_BANDS:
        if score < upper:
            return StressReport(hrv_score_ms=score, level=level)
    return StressReport(hrv_score_ms=score, level=StressLevel.VERY_LOW)
