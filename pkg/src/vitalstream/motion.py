"""IMU orientation, resultant acceleration, and fall prediction/detection.

Accelerometer triples are in units of g, so the resultant acceleration is
the plain vector magnitude: ~1 at rest, toward 0 in free fall, above 1 on
impact. Detection walks the magnitude trace with a small state machine:
a fall is a dip below 0.90 g followed by a rise above 1.0 g within 300 ms
of the dip's minimum.

Yaw is computed for completeness but never drives orientation labels: with
gravity as the only reference it is degenerate under rotation about the
vertical axis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NonMonotonicTime,
    NotStill,
    WindowLengthMismatch,
    ZeroVector,
)
from .nnet import Conv1D, Dense, Flatten, MaxPool1D, Network, ReLU
from .signal_model import ImuSample

DIP_THRESHOLD_G = 0.90
IMPACT_THRESHOLD_G = 1.0
RECOVERY_WINDOW_MS = 300.0

BEND_THRESHOLD_DEG = 20.0
STILL_STD_GATE_G = 0.05
MIN_CALIBRATION_MS = 1000.0

PREDICT_WINDOW_SAMPLES = 50
PREDICT_RATE_HZ = 50.0
PREDICT_SLOPE_G_PER_S = -2.0


class OrientationLabel(enum.Enum):
    UPRIGHT = "Upright"
    BEND_RIGHT = "BendRight"
    BEND_LEFT = "BendLeft"
    BEND_FORWARD = "BendForward"
    BEND_BACK = "BendBack"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ImuCalibration:
    """Per-axis offsets captured standing straight and still."""

    offset_x: float
    offset_y: float
    offset_z: float


@dataclass(frozen=True)
class Orientation:
    roll_deg: float
    pitch_deg: float
    yaw_deg: float
    label: OrientationLabel


@dataclass(frozen=True)
class FallEvent:
    t_predicted_ms: int   # first sample below the dip threshold
    t_detected_ms: int    # impact sample above 1 g
    min_g: float
    peak_g: float


@dataclass(frozen=True)
class FallPrediction:
    flagged: bool
    score: float          # P(fall) from the CNN head, or 0/1 from thresholds
    method: str           # "threshold" or "cnn"
    t_flag_ms: int | None = None


def calibrate(samples: list[ImuSample],
              still_std_gate_g: float = STILL_STD_GATE_G) -> ImuCalibration:
    """Offsets = per-axis mean minus the rest vector (0, 0, 1 g).

    Needs at least one second of data; any axis moving more than the
    stillness gate raises :class:`NotStill`.
    """
    if len(samples) < 2 or samples[-1].t_ms - samples[0].t_ms < MIN_CALIBRATION_MS:
        raise NotStill("need >= 1 s of still samples to calibrate")
    arr = np.array([[s.ax, s.ay, s.az] for s in samples])
    stds = arr.std(axis=0)
    if np.any(stds > still_std_gate_g):
        raise NotStill(
            f"per-axis std {stds.round(4).tolist()} exceeds the "
            f"{still_std_gate_g} g stillness gate")
    mean = arr.mean(axis=0)
    return ImuCalibration(offset_x=float(mean[0]), offset_y=float(mean[1]),
                          offset_z=float(mean[2] - 1.0))


def euler_angles(sample: ImuSample, cal: ImuCalibration | None = None) -> Orientation:
    """Roll/pitch/yaw in degrees from a (calibrated) gravity vector.

    roll = atan2(y, sqrt(x^2+z^2)), pitch = atan2(x, sqrt(y^2+z^2)),
    yaw = atan2(sqrt(x^2+y^2), z); the two-argument arctangent keeps the
    quadrants stable near the axes.
    """
    x, y, z = sample.ax, sample.ay, sample.az
    if cal is not None:
        x, y, z = x - cal.offset_x, y - cal.offset_y, z - cal.offset_z
    if x == 0.0 and y == 0.0 and z == 0.0:
        raise ZeroVector("orientation undefined for a zero acceleration vector")
    roll = math.degrees(math.atan2(y, math.hypot(x, z)))
    pitch = math.degrees(math.atan2(x, math.hypot(y, z)))
    yaw = math.degrees(math.atan2(math.hypot(x, y), z))
    return Orientation(roll_deg=roll, pitch_deg=pitch, yaw_deg=yaw,
                       label=orientation_label(roll, pitch))


def orientation_label(roll_deg: float, pitch_deg: float,
                      threshold_deg: float = BEND_THRESHOLD_DEG) -> OrientationLabel:
    """Total, deterministic bend labeling; pitch wins ties by magnitude."""
    roll_bend = abs(roll_deg) >= threshold_deg
    pitch_bend = abs(pitch_deg) >= threshold_deg
    if not roll_bend and not pitch_bend:
        return OrientationLabel.UPRIGHT
    if pitch_bend and (not roll_bend or abs(pitch_deg) >= abs(roll_deg)):
        return (OrientationLabel.BEND_FORWARD if pitch_deg > 0
                else OrientationLabel.BEND_BACK)
    return (OrientationLabel.BEND_RIGHT if roll_deg > 0
            else OrientationLabel.BEND_LEFT)


def resultant_acceleration(sample: ImuSample) -> float:
    """Vector magnitude in g (inputs are already gravity-normalized)."""
    return sample.magnitude()


def magnitude_trace(samples: list[ImuSample]) -> list[tuple[int, float]]:
    """(t_ms, resultant g) pairs for a sample stream."""
    return [(s.t_ms, resultant_acceleration(s)) for s in samples]


def detect_fall(stream, *, dip_g: float = DIP_THRESHOLD_G,
                impact_g: float = IMPACT_THRESHOLD_G,
                recovery_ms: float = RECOVERY_WINDOW_MS) -> list[FallEvent]:
    """Walk a (t_ms, g) trace and emit non-overlapping fall events.

    One dip episode can produce at most one event: a dip below ``dip_g``
    arms the detector; the first rise above ``impact_g`` within
    ``recovery_ms`` of the episode's minimum fires. An impact outside the
    window, or the window expiring at or above the dip threshold, disarms.
    """
    events: list[FallEvent] = []
    armed = False
    t_start = t_min = 0
    min_g = math.inf
    last_t = None
    for t, g in stream:
        t = int(t)
        if last_t is not None and t <= last_t:
            raise NonMonotonicTime(f"timestamp {t} after {last_t}")
        last_t = t
        if not armed:
            if g < dip_g:
                armed = True
                t_start, t_min, min_g = t, t, g
            continue
        if g < dip_g:
            if g < min_g:
                min_g, t_min = g, t
            continue
        # armed and at/above the dip threshold
        if g > impact_g:
            if t - t_min <= recovery_ms:
                events.append(FallEvent(t_predicted_ms=t_start,
                                        t_detected_ms=t, min_g=min_g,
                                        peak_g=g))
            armed = False
        elif t - t_min > recovery_ms:
            armed = False
    return events


def threshold_predict(window, *, dip_g: float = DIP_THRESHOLD_G,
                      slope_g_per_s: float = PREDICT_SLOPE_G_PER_S) -> FallPrediction:
    """Baseline rule: flag the first sample below the dip threshold whose
    local slope is steeper (more negative) than the configured rate."""
    ts = np.array([t for t, _ in window], dtype=np.float64)
    gs = np.array([g for _, g in window], dtype=np.float64)
    slopes = np.diff(gs) / (np.diff(ts) / 1000.0)
    for i in range(1, len(gs)):
        if gs[i] < dip_g and slopes[i - 1] <= slope_g_per_s:
            return FallPrediction(flagged=True, score=1.0, method="threshold",
                                  t_flag_ms=int(ts[i]))
    return FallPrediction(flagged=False, score=0.0, method="threshold")


def build_fall_network(rng: np.random.Generator | None = None,
                       window_len: int = PREDICT_WINDOW_SAMPLES) -> Network:
    """Compact fall-prediction head: three convolutions with two
    interleaved max-pools into a two-way softmax."""
    rng = rng or np.random.default_rng()
    c1 = Conv1D(1, 16, 5, 1, rng=rng)
    p1 = MaxPool1D(2, 2)
    c2 = Conv1D(16, 32, 5, 1, rng=rng)
    p2 = MaxPool1D(2, 2)
    c3 = Conv1D(32, 32, 3, 1, rng=rng)
    length = window_len
    for lyr in (c1, p1, c2, p2, c3):
        length = lyr.out_length(length)
    layers = [c1, ReLU(), p1, c2, ReLU(), p2, c3, ReLU(), Flatten(),
              Dense(32 * length, 2, rng=rng)]
    return Network(layers, extra={"task": "fall-prediction",
                                  "window_len": window_len})


def predict_fall(window, net: Network | None = None, *,
                 dip_g: float = DIP_THRESHOLD_G,
                 slope_g_per_s: float = PREDICT_SLOPE_G_PER_S) -> FallPrediction:
    """Score one fixed-length (t_ms, g) window for an impending fall.

    Uses the trained CNN head when given one, otherwise the threshold
    baseline. The window length must match the model/default (50 samples).
    """
    expected = (net.extra.get("window_len", PREDICT_WINDOW_SAMPLES)
                if net is not None else PREDICT_WINDOW_SAMPLES)
    window = list(window)
    if len(window) != expected:
        raise WindowLengthMismatch(
            f"expected {expected} samples, got {len(window)}")
    if net is None:
        return threshold_predict(window, dip_g=dip_g,
                                 slope_g_per_s=slope_g_per_s)
    gs = np.array([g for _, g in window], dtype=np.float64)
    probs = net.predict_proba((gs - 1.0)[None, None, :])[0]
    flag_pred = threshold_predict(window, dip_g=dip_g,
                                  slope_g_per_s=slope_g_per_s)
    return FallPrediction(flagged=bool(probs[1] >= 0.5), score=float(probs[1]),
                          method="cnn", t_flag_ms=flag_pred.t_flag_ms)


# --- synthetic fall corpus ---------------------------------------------------
#
# Parameterized dips/impacts plus rest noise, labeled by the threshold
# rule, for training and scoring the CNN head.

def synthetic_fall_window(fall: bool, rng: np.random.Generator,
                          n: int = PREDICT_WINDOW_SAMPLES,
                          rate_hz: float = PREDICT_RATE_HZ) -> tuple[list[tuple[int, float]], bool]:
    """One labeled (t_ms, g) window; label comes from the threshold rule."""
    dt = 1000.0 / rate_hz
    g = np.full(n, 1.0) + rng.normal(0.0, 0.01, size=n)
    if fall:
        start = int(rng.integers(5, n - 15))
        depth = rng.uniform(0.2, 0.7)          # dip bottom, well below 0.90
        dur = int(rng.integers(4, 10))         # fast drop: >= 2 g/s
        for i in range(dur):
            j = start + i
            if j < n:
                g[j] = 1.0 - (1.0 - depth) * (i + 1) / dur
        for j in range(start + dur, min(start + dur + 5, n)):
            g[j] = depth + rng.normal(0.0, 0.02)
    else:
        kind = rng.integers(0, 3)
        if kind == 1:                          # slow sag, slope too shallow
            g += np.linspace(0.0, -rng.uniform(0.02, 0.06), n)
        elif kind == 2:                        # activity bounce above the dip line
            g += 0.06 * np.sin(2 * np.pi * np.arange(n) / rng.uniform(8, 20))
    window = [(int(round(i * dt)), float(v)) for i, v in enumerate(g)]
    label = threshold_predict(window).flagged
    return window, label


def synthetic_fall_corpus(n: int, rng: np.random.Generator,
                          fall_fraction: float = 0.5):
    """Labeled windows as (inputs (N,1,50), labels (N,), windows)."""
    windows, labels = [], []
    for _ in range(n):
        w, lab = synthetic_fall_window(bool(rng.random() < fall_fraction), rng)
        windows.append(w)
        labels.append(int(lab))
    x = np.stack([[g for _, g in w] for w in windows])[:, None, :] - 1.0
    return np.ascontiguousarray(x), np.array(labels, dtype=np.int64), windows
