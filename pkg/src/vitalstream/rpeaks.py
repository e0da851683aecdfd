"""R-peak detection on a single ECG channel.

Energy-based QRS detector: band-pass -> derivative -> squaring -> moving
window integration -> adaptive threshold with a refractory gap, then peak
refinement back on the band-passed signal. All stages are zero-phase
(centered windows), so detected indices line up with the underlying QRS.

The band-pass is a difference of two centered moving averages (pass band
roughly 5-15 Hz at any sampling rate); window lengths scale with the rate.
"""

from __future__ import annotations

import numpy as np

from .errors import NoPeaksFound, SignalTooShort, WrongChannel
from .signal_model import Channel, SampleSeries

MIN_DURATION_MS = 2000.0
REFRACTORY_MS = 200.0
INTEGRATION_MS = 150.0
REFINE_MS = 100.0

# Peak-estimate smoothing and threshold fraction for the adaptive gate.
_PEAK_SMOOTH = 0.125
_THRESHOLD_FRACTION = 0.5


def _moving_average(x: np.ndarray, n: int) -> np.ndarray:
    n = max(1, int(n))
    return np.convolve(x, np.full(n, 1.0 / n), mode="same")


def _bandpass(x: np.ndarray, rate_hz: float) -> np.ndarray:
    # Short window smooths above ~15 Hz, long window tracks the <5 Hz
    # baseline; their difference is the QRS-band component.
    short = _moving_average(x, round(rate_hz / 15.0))
    long = _moving_average(x, round(rate_hz / 5.0))
    return short - long


def _local_maxima(x: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima (first sample of any plateau)."""
    if x.size < 3:
        return np.empty(0, dtype=np.int64)
    left = x[1:-1] > x[:-2]
    right = x[1:-1] > x[2:]
    return np.flatnonzero(left & right) + 1


def detect_r_peaks(ecg: SampleSeries) -> np.ndarray:
    """Detect R peaks; returns strictly increasing sample indices.

    Adjacent detections are always at least the 200 ms refractory gap
    apart. Raises :class:`NoPeaksFound` when the signal carries no QRS
    energy (the caller maps this to an electrode-contact prompt).
    """
    if ecg.channel is not Channel.ECG:
        raise WrongChannel(f"R-peak detection needs ECG, got {ecg.channel.value}")
    if ecg.duration_ms < MIN_DURATION_MS:
        raise SignalTooShort(
            f"need >= {MIN_DURATION_MS:.0f} ms of ECG, got {ecg.duration_ms:.0f} ms")

    rate = ecg.rate_hz
    bp = _bandpass(ecg.values, rate)
    deriv = np.gradient(bp)
    energy = _moving_average(deriv ** 2, round(rate * INTEGRATION_MS / 1000.0))

    refractory = int(round(rate * REFRACTORY_MS / 1000.0))
    candidates = _local_maxima(energy)
    if candidates.size == 0:
        raise NoPeaksFound("no QRS energy in signal")

    # Rolling signal-peak estimate seeds from the first two seconds.
    head = energy[:max(1, int(round(2.0 * rate)))]
    peak_estimate = float(head.max())
    if peak_estimate <= 0.0:
        raise NoPeaksFound("no QRS energy in signal")

    accepted = []
    last = -10 * refractory
    for c in candidates:
        if energy[c] < _THRESHOLD_FRACTION * peak_estimate:
            continue
        if c - last < refractory:
            continue
        accepted.append(int(c))
        last = int(c)
        peak_estimate = (_PEAK_SMOOTH * float(energy[c])
                         + (1.0 - _PEAK_SMOOTH) * peak_estimate)
    if not accepted:
        raise NoPeaksFound("no peak exceeded the adaptive threshold")

    # Refine each detection to the band-passed extremum nearby, then
    # re-enforce ordering and the refractory gap (refinement can move
    # neighbours toward each other).
    half = int(round(rate * REFINE_MS / 1000.0))
    refined = []
    for c in accepted:
        lo = max(0, c - half)
        hi = min(len(ecg), c + half + 1)
        refined.append(lo + int(np.argmax(np.abs(bp[lo:hi]))))
    peaks = []
    for p in sorted(set(refined)):
        if not peaks or p - peaks[-1] >= refractory:
            peaks.append(p)
    return np.asarray(peaks, dtype=np.int64)
