"""Five-class heartbeat classification.

The classifier is a small 1-D CNN over fixed 187-sample beat windows
(125 Hz, [0,1]-normalized): six stride-2 convolutions with 64 filters and
ReLU, each followed by a 2/2 max-pool, then three fully connected layers
and a softmax. Spatial lengths with "same" padding and right-truncated
pooling:

    187 -conv-> 94 -pool-> 47 -conv-> 24 -pool-> 12 -conv-> 6 -pool-> 3
        -conv->  2 -pool->  1 -conv->  1 -pool->  1 -conv-> 1 -pool-> 1

leaving 64 flattened features feeding 128 -> 32 -> 5.

Dataset rows are 188 comma-separated numbers: 187 window values in [0,1]
plus an integer label 0-4 (N, S, V, F, Q). A synthetic corpus generator
with class-dependent morphologies is provided for desk-scale training
where the real beat corpus is not on disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyEvalSet,
    MalformedRow,
    TooFewPeaks,
    UnknownLabel,
)
from .nnet import Conv1D, Dense, Flatten, MaxPool1D, Network, ReLU
from .signal_model import BEAT_RATE_HZ, BEAT_WINDOW_LEN, BeatClass, BeatSegment, SampleSeries

CLASS_NAMES = tuple(c.name for c in BeatClass)

ABNORMAL_CLASSES = frozenset({BeatClass.S, BeatClass.V, BeatClass.F, BeatClass.Q})


@dataclass(frozen=True)
class NetworkConfig:
    """Beat-classifier architecture and optimizer settings."""

    conv_layers: int = 6
    filters_per_layer: int = 64
    conv_stride: int = 2
    kernel_size: int = 5
    pool_size: int = 2
    pool_stride: int = 2
    fc_widths: tuple[int, ...] = (128, 32)
    classes: int = 5
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 64
    class_weighting: bool = False
    input_len: int = BEAT_WINDOW_LEN

    def to_dict(self) -> dict:
        return {"conv_layers": self.conv_layers,
                "filters_per_layer": self.filters_per_layer,
                "conv_stride": self.conv_stride,
                "kernel_size": self.kernel_size,
                "pool_size": self.pool_size,
                "pool_stride": self.pool_stride,
                "fc_widths": list(self.fc_widths),
                "classes": self.classes,
                "learning_rate": self.learning_rate,
                "momentum": self.momentum,
                "batch_size": self.batch_size,
                "class_weighting": self.class_weighting,
                "input_len": self.input_len}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        d["fc_widths"] = tuple(d.get("fc_widths", (128, 32)))
        return cls(**d)


def build_network(config: NetworkConfig = NetworkConfig(),
                  rng: np.random.Generator | None = None) -> Network:
    rng = rng or np.random.default_rng()
    layers = []
    chans, length = 1, config.input_len
    for _ in range(config.conv_layers):
        conv = Conv1D(chans, config.filters_per_layer, config.kernel_size,
                      config.conv_stride, rng=rng)
        pool = MaxPool1D(config.pool_size, config.pool_stride)
        layers += [conv, ReLU(), pool]
        length = pool.out_length(conv.out_length(length))
        chans = config.filters_per_layer
    layers.append(Flatten())
    feat = chans * length
    for width in config.fc_widths:
        layers += [Dense(feat, width, rng=rng), ReLU()]
        feat = width
    layers.append(Dense(feat, config.classes, rng=rng))
    return Network(layers, extra={"task": "beat-classifier",
                                  "classes": list(CLASS_NAMES),
                                  "config": config.to_dict()})


# --- dataset -----------------------------------------------------------------

def load_mitbih_segments(path) -> list[BeatSegment]:
    """Load a beat-corpus CSV (187 floats in [0,1] + label 0-4 per row)."""
    path = Path(path)
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise MalformedRow(f"{path}: {exc}") from None
    if arr.shape[1] != BEAT_WINDOW_LEN + 1:
        raise MalformedRow(
            f"{path}: rows must have {BEAT_WINDOW_LEN + 1} fields, "
            f"got {arr.shape[1]}")
    windows = arr[:, :BEAT_WINDOW_LEN]
    labels = arr[:, BEAT_WINDOW_LEN]
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(arr), axis=1))[0])
        raise MalformedRow(f"{path}: non-finite value in row {bad + 1}")
    if windows.min() < 0.0 or windows.max() > 1.0:
        bad = int(np.flatnonzero((windows.min(axis=1) < 0)
                                 | (windows.max(axis=1) > 1))[0])
        raise MalformedRow(f"{path}: window values outside [0,1] in row {bad + 1}")
    rounded = np.rint(labels)
    if np.any(np.abs(labels - rounded) > 1e-9) or np.any(rounded < 0) or np.any(rounded > 4):
        bad = int(np.flatnonzero((np.abs(labels - rounded) > 1e-9)
                                 | (rounded < 0) | (rounded > 4))[0])
        raise UnknownLabel(f"{path}: label {labels[bad]!r} in row {bad + 1} "
                           "is not one of 0-4")
    return [BeatSegment(window=w, label=BeatClass(int(l)))
            for w, l in zip(windows, rounded)]


def segments_to_arrays(segments) -> tuple[np.ndarray, np.ndarray]:
    """Stack segments into (N, 1, 187) inputs and (N,) integer labels."""
    x = np.stack([s.window for s in segments])[:, None, :]
    y = np.array([-1 if s.label is None else s.label.value for s in segments],
                 dtype=np.int64)
    return np.ascontiguousarray(x), y


def save_segments_csv(path, segments) -> None:
    rows = np.column_stack([
        np.stack([s.window for s in segments]),
        np.array([s.label.value for s in segments], dtype=np.float64),
    ])
    np.savetxt(path, rows, delimiter=",", fmt="%.6g")


def stratified_split(segments, test_fraction: float,
                     rng: np.random.Generator) -> tuple[list, list]:
    """Per-class shuffle/split preserving label proportions."""
    by_class: dict[BeatClass, list] = {}
    for s in segments:
        by_class.setdefault(s.label, []).append(s)
    train_set, test_set = [], []
    for members in by_class.values():
        order = rng.permutation(len(members))
        n_test = int(round(test_fraction * len(members)))
        test_set += [members[i] for i in order[:n_test]]
        train_set += [members[i] for i in order[n_test:]]
    rng.shuffle(train_set)
    rng.shuffle(test_set)
    return train_set, test_set


# --- synthetic corpus -----------------------------------------------------------
#
# Class-dependent beat morphologies on the corpus window convention: the
# window starts at the R peak and runs one RR interval, zero-padded to 187
# samples at 125 Hz. Shapes are caricatures (wide ectopic QRS, absent P
# wave on premature beats, ...) sufficient to train and exercise the
# classifier end to end; they make no claim of clinical realism.

def _bump(n: int, center: float, width: float, amp: float) -> np.ndarray:
    i = np.arange(n)
    return amp * np.exp(-0.5 * ((i - center) / max(width, 1e-9)) ** 2)


def synthetic_beat(label: BeatClass, rng: np.random.Generator) -> BeatSegment:
    if label is BeatClass.N:
        rr = int(rng.integers(75, 110))
    elif label is BeatClass.S:
        rr = int(rng.integers(45, 70))
    elif label is BeatClass.V:
        rr = int(rng.integers(85, 125))
    elif label is BeatClass.F:
        rr = int(rng.integers(70, 100))
    else:
        rr = int(rng.integers(55, 115))
    n = min(rr, BEAT_WINDOW_LEN)
    i = np.arange(n)

    def narrow_beat():
        y = np.exp(-i / 3.0)                              # sharp R decay
        y += _bump(n, 4, 2.0, -0.15)                      # S dip
        y += _bump(n, 0.30 * n, 0.07 * n, 0.35)           # T wave
        return y

    def wide_beat():
        y = np.exp(-i / 10.0)                             # broad R decay
        y += _bump(n, 10, 5.0, -0.40)                     # deep wide S
        y += _bump(n, 0.35 * n, 0.10 * n, 0.50)           # tall T
        return y

    if label is BeatClass.N:
        y = narrow_beat() + _bump(n, 0.85 * n, 0.04 * n, 0.18)   # P of next beat
    elif label is BeatClass.S:
        y = narrow_beat()                                 # premature, no P
    elif label is BeatClass.V:
        y = wide_beat()
    elif label is BeatClass.F:
        y = 0.5 * narrow_beat() + 0.5 * wide_beat()
        y += _bump(n, 0.85 * n, 0.04 * n, 0.09)
    else:
        y = _bump(n, 0.15 * n, 0.05 * n, rng.uniform(0.5, 1.0))
        y += _bump(n, rng.uniform(0.4, 0.8) * n, 0.08 * n, rng.uniform(0.3, 0.8))

    y *= rng.uniform(0.85, 1.15)
    y += 0.03 * np.sin(2 * np.pi * i / n + rng.uniform(0, 2 * np.pi))
    y += rng.normal(0.0, 0.02, size=n)

    window = np.zeros(BEAT_WINDOW_LEN)
    span = y.max() - y.min()
    window[:n] = (y - y.min()) / span if span > 0 else 0.0
    return BeatSegment(window=window, label=label)


DEFAULT_CLASS_MIX = {BeatClass.N: 0.828, BeatClass.S: 0.025, BeatClass.V: 0.066,
                     BeatClass.F: 0.008, BeatClass.Q: 0.073}


def synthetic_beat_corpus(n: int, rng: np.random.Generator,
                          class_mix: dict[BeatClass, float] | None = None) -> list[BeatSegment]:
    """Draw ``n`` labeled synthetic beats with the given class mix."""
    mix = class_mix or DEFAULT_CLASS_MIX
    classes = list(mix.keys())
    probs = np.array([mix[c] for c in classes], dtype=np.float64)
    probs /= probs.sum()
    labels = rng.choice(len(classes), size=n, p=probs)
    return [synthetic_beat(classes[k], rng) for k in labels]


# --- evaluation ------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    accuracy_pct: float
    precision_pct: float
    recall_pct: float
    confusion: np.ndarray  # (5, 5) int64, rows = truth, cols = predicted
    per_class_precision_pct: dict = field(default_factory=dict)
    per_class_recall_pct: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"accuracy_pct": self.accuracy_pct,
                "precision_pct": self.precision_pct,
                "recall_pct": self.recall_pct,
                "confusion": self.confusion.tolist(),
                "per_class_precision_pct": self.per_class_precision_pct,
                "per_class_recall_pct": self.per_class_recall_pct}


def report_from_confusion(confusion: np.ndarray) -> EvalReport:
    """Metrics from a truth-by-predicted count matrix.

    Precision/recall are computed one-vs-rest per class and macro-averaged
    over the classes where the ratio is defined (non-zero denominator).
    """
    confusion = np.asarray(confusion, dtype=np.int64)
    total = confusion.sum()
    if total == 0:
        raise EmptyEvalSet("confusion matrix is empty")
    accuracy = 100.0 * np.trace(confusion) / total

    precisions, recalls = {}, {}
    for k, name in enumerate(CLASS_NAMES):
        tp = confusion[k, k]
        col = confusion[:, k].sum()
        row = confusion[k, :].sum()
        precisions[name] = 100.0 * tp / col if col else None
        recalls[name] = 100.0 * tp / row if row else None
    defined_p = [v for v in precisions.values() if v is not None]
    defined_r = [v for v in recalls.values() if v is not None]
    return EvalReport(
        accuracy_pct=float(accuracy),
        precision_pct=float(np.mean(defined_p)),
        recall_pct=float(np.mean(defined_r)),
        confusion=confusion,
        per_class_precision_pct=precisions,
        per_class_recall_pct=recalls,
    )


def evaluate(net: Network, segments, batch_size: int = 256) -> EvalReport:
    """Run the classifier over labeled segments and report metrics."""
    if not segments:
        raise EmptyEvalSet("no segments to evaluate")
    x, y = segments_to_arrays(segments)
    if np.any(y < 0):
        raise EmptyEvalSet("evaluation needs labeled segments")
    n_classes = len(CLASS_NAMES)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for lo in range(0, len(x), batch_size):
        pred = net.predict(x[lo:lo + batch_size])
        truth = y[lo:lo + batch_size]
        np.add.at(confusion, (truth, pred), 1)
    return report_from_confusion(confusion)


# --- stream classification -----------------------------------------------------

@dataclass(frozen=True)
class BeatCall:
    beat_index: int
    peak_index: int
    label: BeatClass
    probability: float


def beat_window(ecg: SampleSeries, start: int, stop: int) -> np.ndarray | None:
    """Cut one beat (R peak to next R peak) into the 187-sample window.

    Resamples to the 125 Hz window timebase when the source rate differs,
    min-max normalizes to [0,1] and zero-pads. Returns None when the beat
    cannot fill a usable window (degenerate length or flat segment).
    """
    raw = ecg.values[start:stop]
    n_target = int(round(len(raw) * BEAT_RATE_HZ / ecg.rate_hz))
    if n_target < 2:
        return None
    if n_target != len(raw):
        raw = np.interp(np.linspace(0.0, len(raw) - 1.0, num=n_target),
                        np.arange(len(raw)), raw)
    raw = raw[:BEAT_WINDOW_LEN]
    span = raw.max() - raw.min()
    if span <= 0:
        return None
    window = np.zeros(BEAT_WINDOW_LEN)
    window[:len(raw)] = (raw - raw.min()) / span
    return window


def classify_stream(net: Network, ecg: SampleSeries, peaks) -> tuple[list[BeatCall], list[tuple[int, str]]]:
    """One class call per detected beat; returns (calls, skipped).

    A beat needs a following peak to bound its window; trailing/degenerate
    beats are skipped and reported as ``(beat_index, reason)`` pairs.
    """
    peaks = np.asarray(peaks, dtype=np.int64)
    if peaks.size == 0:
        return [], []
    if peaks.size < 2:
        return [], [(0, "no following peak bounds the beat")]

    windows, kept, skipped = [], [], []
    for k in range(len(peaks) - 1):
        w = beat_window(ecg, int(peaks[k]), int(peaks[k + 1]))
        if w is None:
            skipped.append((k, "window degenerate (too short or flat)"))
        else:
            windows.append(w)
            kept.append(k)
    skipped.append((len(peaks) - 1, "no following peak bounds the beat"))
    if not windows:
        return [], skipped

    probs = net.predict_proba(np.stack(windows)[:, None, :])
    calls = []
    for row, k in zip(probs, kept):
        cls = int(np.argmax(row))
        calls.append(BeatCall(beat_index=k, peak_index=int(peaks[k]),
                              label=BeatClass(cls), probability=float(row[cls])))
    return calls, skipped
