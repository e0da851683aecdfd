"""Surface-EMG activity extraction: envelope, burst peaks, intensity.

The envelope is full-wave rectification of the mean-removed signal
followed by a 100 ms RMS moving window, so a zero-mean sine of amplitude A
settles at A/sqrt(2) and any DC offset is rejected. Burst peaks are local
envelope maxima clearing the rest level by ``k`` rest standard deviations;
intensity grades the tallest peak against a per-user calibration maximum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import NonPositiveCalibration, WrongChannel
from .signal_model import Channel, SampleSeries

RMS_WINDOW_MS = 100.0
PEAK_SIGMA_FACTOR = 3.0
PEAK_SEPARATION_MS = 250.0

EMG_CHANNELS = (Channel.EMG_BICEP, Channel.EMG_CHEST)


class Intensity(enum.Enum):
    REST = "Rest"
    LIGHT = "Light"
    MODERATE = "Moderate"
    HIGH = "High"


# Fraction of the calibration maximum at which each grade starts.
_INTENSITY_BINS = ((0.7, Intensity.HIGH), (0.4, Intensity.MODERATE),
                   (0.1, Intensity.LIGHT))


@dataclass(frozen=True)
class MuscleActivity:
    channel: Channel
    envelope: SampleSeries
    peaks: list[tuple[int, float]]   # (t_ms, envelope amplitude)
    intensity: Intensity


def emg_envelope(raw: SampleSeries, window_ms: float = RMS_WINDOW_MS) -> SampleSeries:
    """Rectified RMS envelope; same rate and timestamps as the input."""
    if raw.channel not in EMG_CHANNELS:
        raise WrongChannel(f"EMG envelope needs an EMG channel, got {raw.channel.value}")
    x = raw.values - raw.values.mean()
    n = max(1, int(round(raw.rate_hz * window_ms / 1000.0)))
    kernel = np.full(n, 1.0 / n)
    rms = np.sqrt(np.convolve(x * x, kernel, mode="same"))
    return SampleSeries(channel=raw.channel, rate_hz=raw.rate_hz,
                        t0_ms=raw.t0_ms, values=rms)


def detect_activity_peaks(envelope: SampleSeries, rest_baseline: float,
                          rest_std: float = 0.0, *,
                          k: float = PEAK_SIGMA_FACTOR,
                          min_separation_ms: float = PEAK_SEPARATION_MS) -> list[tuple[int, float]]:
    """Activity bursts: envelope maxima above baseline + k*sigma_rest.

    Peaks closer than the separation are merged, keeping the taller one.
    """
    threshold = rest_baseline + k * rest_std
    distance = max(1, int(round(envelope.rate_hz * min_separation_ms / 1000.0)))
    idx, _ = find_peaks(envelope.values, height=threshold, distance=distance)
    times = envelope.sample_times_ms()
    return [(int(round(times[i])), float(envelope.values[i])) for i in idx]


def grade_intensity(peaks, calibration_max: float) -> Intensity:
    """Grade the tallest peak against the calibration maximum (MVC proxy)."""
    if not calibration_max > 0:
        raise NonPositiveCalibration(
            f"calibration_max must be > 0, got {calibration_max!r}")
    if not peaks:
        return Intensity.REST
    ratio = max(amp for _, amp in peaks) / calibration_max
    for lower, grade in _INTENSITY_BINS:
        if ratio >= lower:
            return grade
    return Intensity.REST


def analyze_emg(raw: SampleSeries, calibration_max: float, *,
                rest_baseline: float | None = None,
                rest_std: float | None = None) -> MuscleActivity:
    """Envelope -> peaks -> intensity for one EMG channel.

    When rest statistics are not supplied they are estimated from the
    quietest half of the envelope (samples at or below the median).
    """
    env = emg_envelope(raw)
    if rest_baseline is None or rest_std is None:
        quiet = env.values[env.values <= np.median(env.values)]
        rest_baseline = float(quiet.mean()) if rest_baseline is None else rest_baseline
        rest_std = float(quiet.std()) if rest_std is None else rest_std
    peaks = detect_activity_peaks(env, rest_baseline, rest_std)
    return MuscleActivity(channel=raw.channel, envelope=env, peaks=peaks,
                          intensity=grade_intensity(peaks, calibration_max))
