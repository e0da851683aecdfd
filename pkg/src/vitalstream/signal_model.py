"""Shared domain types for every signal the pipeline touches.

All types are immutable after construction and validated on the way in:
downstream code may assume finite values, positive rates and consistent
lengths without re-checking.

Time is integer milliseconds throughout; a series stores its start time
``t0_ms`` and sampling rate, never a redundant duration.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptySignal,
    MalformedRow,
    NonFiniteSample,
    NonPositiveRate,
    OutOfRange,
    UnknownLabel,
)

# RR intervals outside this physiological band (24-240 bpm) are flagged as
# detector glitches: excluded from metrics, retained for audit.
RR_GATE_MS = (250.0, 2500.0)

BEAT_WINDOW_LEN = 187
BEAT_RATE_HZ = 125.0


class Channel(enum.Enum):
    ECG = "ECG"
    EMG_BICEP = "EMG_BICEP"
    EMG_CHEST = "EMG_CHEST"
    TEMPERATURE = "TEMPERATURE"


class BeatClass(enum.Enum):
    """Five-class beat taxonomy: normal, supraventricular, ventricular,
    fusion, unknown."""

    N = 0
    S = 1
    V = 2
    F = 3
    Q = 4


class StressLevel(enum.Enum):
    VERY_LOW = "VeryLow"
    LOW = "Low"
    MODERATE = "Moderate"
    AVERAGE = "Average"
    HIGH = "High"


def _as_finite_array(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise MalformedRow(f"{what} must be one-dimensional")
    if arr.size == 0:
        raise EmptySignal(f"{what} is empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteSample(f"{what} contains NaN/Inf")
    return arr


@dataclass(frozen=True)
class SampleSeries:
    """Uniformly sampled scalar signal with channel tag.

    ``values`` is a read-only float64 array; duration is derived, never
    stored.
    """

    channel: Channel
    rate_hz: float
    t0_ms: int
    values: np.ndarray

    def __post_init__(self):
        if not (isinstance(self.rate_hz, (int, float)) and math.isfinite(self.rate_hz)
                and self.rate_hz > 0):
            raise NonPositiveRate(f"rate_hz must be positive, got {self.rate_hz!r}")
        arr = _as_finite_array(self.values, "values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "t0_ms", int(self.t0_ms))
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def duration_ms(self) -> float:
        return 1000.0 * len(self) / self.rate_hz

    def sample_times_ms(self) -> np.ndarray:
        """Timestamp of every sample, in ms."""
        return self.t0_ms + np.arange(len(self)) * (1000.0 / self.rate_hz)


def make_sample_series(channel: Channel, rate_hz: float, t0_ms: int,
                       values) -> SampleSeries:
    """Validated constructor; rejects empty/non-finite input and rate <= 0."""
    return SampleSeries(channel=channel, rate_hz=rate_hz, t0_ms=t0_ms,
                        values=values)


def slice_window(series: SampleSeries, start_ms: float, len_ms: float) -> SampleSeries:
    """Return the sub-series covering ``[start_ms, start_ms + len_ms)``
    relative to the series start.

    The window must lie fully inside the series. The returned series keeps
    the rate and gets a shifted ``t0_ms``.
    """
    if len_ms <= 0:
        raise OutOfRange(f"window length must be positive, got {len_ms}")
    start_idx = int(round(start_ms * series.rate_hz / 1000.0))
    n = int(round(len_ms * series.rate_hz / 1000.0))
    if start_ms < 0 or start_idx + n > len(series):
        raise OutOfRange(
            f"window [{start_ms}, {start_ms + len_ms}) ms outside series of "
            f"{series.duration_ms:.1f} ms")
    return SampleSeries(
        channel=series.channel,
        rate_hz=series.rate_hz,
        t0_ms=series.t0_ms + int(round(start_idx * 1000.0 / series.rate_hz)),
        values=series.values[start_idx:start_idx + n].copy(),
    )


@dataclass(frozen=True)
class RrSeries:
    """RR intervals in ms plus the peak indices they came from.

    Intervals outside the physiological gate are flagged, not dropped:
    ``flagged[k]`` is True for glitch-suspect intervals, which HRV metrics
    skip but the raw record keeps.
    """

    intervals_ms: np.ndarray
    source_peaks: np.ndarray
    flagged: np.ndarray = field(default=None)

    def __post_init__(self):
        intervals = _as_finite_array(self.intervals_ms, "intervals_ms")
        peaks = np.asarray(self.source_peaks, dtype=np.int64)
        if np.any(intervals <= 0):
            raise NonFiniteSample("RR intervals must be strictly positive")
        if len(intervals) != len(peaks) - 1:
            raise MalformedRow(
                f"{len(intervals)} intervals inconsistent with {len(peaks)} peaks")
        lo, hi = RR_GATE_MS
        flagged = (intervals < lo) | (intervals > hi)
        intervals.setflags(write=False)
        peaks.setflags(write=False)
        flagged.setflags(write=False)
        object.__setattr__(self, "intervals_ms", intervals)
        object.__setattr__(self, "source_peaks", peaks)
        object.__setattr__(self, "flagged", flagged)

    def __len__(self) -> int:
        return int(self.intervals_ms.size)

    def unflagged(self) -> np.ndarray:
        """Intervals that passed the physiological gate, in time order."""
        return self.intervals_ms[~self.flagged]


@dataclass(frozen=True)
class BeatSegment:
    """One fixed-length, [0,1]-normalized ECG window around a beat."""

    window: np.ndarray
    label: BeatClass | None = None

    def __post_init__(self):
        arr = _as_finite_array(self.window, "window")
        if arr.size != BEAT_WINDOW_LEN:
            raise MalformedRow(
                f"beat window must have {BEAT_WINDOW_LEN} samples, got {arr.size}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise MalformedRow("beat window values must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "window", arr)
        if self.label is not None and not isinstance(self.label, BeatClass):
            raise UnknownLabel(f"unknown beat label {self.label!r}")


@dataclass(frozen=True)
class ImuSample:
    """Timestamped accelerometer triple in units of g."""

    t_ms: int
    ax: float
    ay: float
    az: float

    def __post_init__(self):
        for name in ("ax", "ay", "az"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise NonFiniteSample(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "t_ms", int(self.t_ms))

    def magnitude(self) -> float:
        return math.sqrt(self.ax ** 2 + self.ay ** 2 + self.az ** 2)


@dataclass(frozen=True)
class StressReport:
    """HRV score (ms) and its deterministic stress band."""

    hrv_score_ms: float
    level: StressLevel


# --- CSV ingest ---------------------------------------------------------------
#
# Scalar channels:  header "t_ms,value", one sample per row.
# IMU:              header "t_ms,ax,ay,az".
#
# Samples must be uniformly spaced; the rate is inferred from the first two
# timestamps and verified over the whole file (+-1 ms jitter tolerated).


def _read_rows(path, expected_header: Sequence[str]) -> list[list[float]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySignal(f"{path} is empty") from None
        if [h.strip() for h in header] != list(expected_header):
            raise MalformedRow(
                f"{path}: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise MalformedRow(f"{path}:{lineno}: expected "
                                   f"{len(expected_header)} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise EmptySignal(f"{path} has no data rows")
    return rows


def _infer_rate_hz(t_ms: np.ndarray, path) -> float:
    if len(t_ms) < 2:
        return 1.0
    dt = np.diff(t_ms)
    step = float(np.median(dt))
    if step <= 0:
        raise MalformedRow(f"{path}: timestamps must be strictly increasing")
    if np.any(np.abs(dt - step) > 1.0):
        raise MalformedRow(f"{path}: samples are not uniformly spaced")
    return 1000.0 / step


def series_from_samples(channel: Channel, t_ms, values,
                        rate_hz: float | None = None,
                        what: str = "sample stream") -> SampleSeries:
    """Build a series from explicit (t_ms, value) columns.

    Shared by the CSV loader and the network ingest path so both
    reconstruct identical series from the same samples. The rate is
    inferred from the timestamp spacing unless given.
    """
    t_ms = np.asarray(t_ms, dtype=np.float64)
    rate = float(rate_hz) if rate_hz else _infer_rate_hz(t_ms, what)
    return SampleSeries(channel=channel, rate_hz=rate, t0_ms=int(t_ms[0]),
                        values=np.asarray(values, dtype=np.float64))


def read_signal_csv(path, channel: Channel, rate_hz: float | None = None) -> SampleSeries:
    """Load a scalar-channel CSV (``t_ms,value``) into a SampleSeries.

    The sampling rate is inferred from the timestamp spacing unless given
    explicitly.
    """
    rows = _read_rows(path, ("t_ms", "value"))
    arr = np.asarray(rows, dtype=np.float64)
    return series_from_samples(channel, arr[:, 0], arr[:, 1],
                               rate_hz=rate_hz, what=str(path))


def read_imu_csv(path) -> list[ImuSample]:
    """Load an IMU CSV (``t_ms,ax,ay,az``) into ImuSamples."""
    rows = _read_rows(path, ("t_ms", "ax", "ay", "az"))
    return [ImuSample(t_ms=int(r[0]), ax=r[1], ay=r[2], az=r[3]) for r in rows]


def write_signal_csv(path, series: SampleSeries) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms", "value"])
        for t, v in zip(series.sample_times_ms(), series.values):
            writer.writerow([int(round(t)), repr(float(v))])


def write_imu_csv(path, samples: Iterable[ImuSample]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms", "ax", "ay", "az"])
        for s in samples:
            writer.writerow([s.t_ms, repr(s.ax), repr(s.ay), repr(s.az)])
