"""Per-device analysis shared by offline replay and the ingest service.

Both entry points funnel into :func:`analyze_device`, which is a pure
function of the input samples plus config (and the loaded model), so a
decrypted network stream and a CSV replay of the same samples produce the
same report and plot series byte for byte.

The ECG is cut into consecutive windows of the configured length (the
capture schedule matters on the garment, not when replaying a recording);
a trailing partial window is analyzed when it still clears the analysis
floor. Window reports never abort the run: a window that defeats a stage
records why and moves on.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import emg as emg_mod
from .. import hrv as hrv_mod
from ..beats import ABNORMAL_CLASSES, CLASS_NAMES, classify_stream
from ..errors import NoPeaksFound, SignalTooShort, TooFewIntervals, TooFewPeaks
from ..motion import detect_fall, magnitude_trace
from ..rpeaks import detect_r_peaks
from ..signal_model import Channel, ImuSample, SampleSeries, slice_window
from .config import PipelineConfig

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


@dataclass
class WindowSummary:
    index: int
    t_start_ms: int
    t_end_ms: int
    n_peaks: int = 0
    time_domain: dict | None = None
    sd1_ms: float | None = None
    sd2_ms: float | None = None
    stress: dict | None = None
    beat_counts: dict = field(default_factory=dict)
    abnormal_beats: int = 0
    skipped_beats: int = 0
    n_flagged_intervals: int = 0
    constant_rr: bool = False
    skipped_reason: str | None = None

    def to_dict(self) -> dict:
        return {"index": self.index, "t_start_ms": self.t_start_ms,
                "t_end_ms": self.t_end_ms, "n_peaks": self.n_peaks,
                "time_domain": self.time_domain, "sd1_ms": self.sd1_ms,
                "sd2_ms": self.sd2_ms, "stress": self.stress,
                "beat_counts": self.beat_counts,
                "abnormal_beats": self.abnormal_beats,
                "skipped_beats": self.skipped_beats,
                "n_flagged_intervals": self.n_flagged_intervals,
                "constant_rr": self.constant_rr,
                "skipped_reason": self.skipped_reason}


@dataclass
class DeviceInputs:
    ecg: SampleSeries | None = None
    imu: list[ImuSample] | None = None
    emg_bicep: SampleSeries | None = None
    emg_chest: SampleSeries | None = None
    temperature: SampleSeries | None = None

    def channels_present(self) -> list[str]:
        names = []
        if self.ecg is not None:
            names.append(Channel.ECG.value)
        if self.emg_bicep is not None:
            names.append(Channel.EMG_BICEP.value)
        if self.emg_chest is not None:
            names.append(Channel.EMG_CHEST.value)
        if self.temperature is not None:
            names.append(Channel.TEMPERATURE.value)
        if self.imu:
            names.append("IMU")
        return names


@dataclass
class PlotData:
    """Per-channel series the reports reference, ready for CSV dumps."""

    ecg_peaks: list[tuple[int, float, int]] = field(default_factory=list)
    poincare: list[tuple[float, float]] = field(default_factory=list)
    g_trace: list[tuple[int, float]] = field(default_factory=list)
    envelopes: dict = field(default_factory=dict)  # channel -> [(t_ms, v)]


def analyze_ecg_window(window: SampleSeries, index: int, net,
                       config: PipelineConfig, plots: PlotData) -> WindowSummary:
    summary = WindowSummary(index=index, t_start_ms=window.t0_ms,
                            t_end_ms=int(round(window.t0_ms + window.duration_ms)))
    try:
        peaks = detect_r_peaks(window)
    except NoPeaksFound:
        summary.skipped_reason = "no_peaks"
        return summary
    except SignalTooShort:
        summary.skipped_reason = "too_short"
        return summary

    summary.n_peaks = int(len(peaks))
    times = window.sample_times_ms()
    peak_set = set(int(p) for p in peaks)
    plots.ecg_peaks.extend(
        (int(round(times[i])), float(window.values[i]), int(i in peak_set))
        for i in range(len(window)))

    try:
        rr = hrv_mod.rr_series(peaks, window.rate_hz)
    except TooFewPeaks:
        summary.skipped_reason = "too_few_peaks"
        return summary
    summary.n_flagged_intervals = int(np.count_nonzero(rr.flagged))

    try:
        td = hrv_mod.time_domain_metrics(rr, xx_ms=config.nn_threshold_ms)
        summary.time_domain = {
            "mean_rr_ms": td.mean_rr_ms, "sdnn_ms": td.sdnn_ms,
            "rmssd_ms": td.rmssd_ms, "mean_hr_bpm": td.mean_hr_bpm,
            "std_hr_bpm": td.std_hr_bpm, "min_hr_bpm": td.min_hr_bpm,
            "max_hr_bpm": td.max_hr_bpm, "nnxx_count": td.nnxx_count,
            "pnnxx_pct": td.pnnxx_pct, "xx_ms": td.xx_ms}
        summary.constant_rr = td.rmssd_ms == 0.0
        stress = hrv_mod.stress_level(td.rmssd_ms)
        summary.stress = {"hrv_score_ms": stress.hrv_score_ms,
                          "level": stress.level.value}
    except TooFewIntervals:
        summary.skipped_reason = "too_few_intervals"

    try:
        pc = hrv_mod.poincare(rr)
        summary.sd1_ms = pc.sd1_ms
        summary.sd2_ms = pc.sd2_ms
        plots.poincare.extend((float(a), float(b)) for a, b in pc.points)
    except TooFewIntervals:
        pass

    if net is not None:
        calls, skipped = classify_stream(net, window, peaks)
        counts = {name: 0 for name in CLASS_NAMES}
        for call in calls:
            counts[call.label.name] += 1
        summary.beat_counts = counts
        summary.skipped_beats = len(skipped)
        summary.abnormal_beats = sum(
            counts[c.name] for c in ABNORMAL_CLASSES)
    return summary


def ecg_windows(ecg: SampleSeries, config: PipelineConfig):
    """Consecutive analysis windows; trailing partial kept above the floor."""
    window_ms = config.ecg_window_ms
    n_full = int(ecg.duration_ms // window_ms)
    spans = [(i * window_ms, window_ms) for i in range(n_full)]
    tail = ecg.duration_ms - n_full * window_ms
    if tail >= config.min_window_ms:
        spans.append((n_full * window_ms, tail))
    for start, length in spans:
        yield slice_window(ecg, start, length)


@dataclass
class AnalysisResult:
    report: dict
    plots: PlotData
    windows: list[WindowSummary]
    fall_events: list


def analyze_device(inputs: DeviceInputs, config: PipelineConfig,
                   net=None) -> AnalysisResult:
    """Full per-device analysis.

    The report is deterministic given inputs+config+model; wall-clock
    enters only via the caller-added ``generated_at_ms``.
    """
    plots = PlotData()
    report: dict = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "device_id": config.device_id_hex,
        "config_hash": config.analysis_hash(),
        "model_hash": None,
        "channels_present": inputs.channels_present(),
    }

    windows: list[WindowSummary] = []
    if inputs.ecg is not None:
        for i, window in enumerate(ecg_windows(inputs.ecg, config)):
            windows.append(analyze_ecg_window(window, i, net, config, plots))
        report["ecg"] = {
            "rate_hz": inputs.ecg.rate_hz,
            "t0_ms": inputs.ecg.t0_ms,
            "n_samples": len(inputs.ecg),
            "windows": [w.to_dict() for w in windows],
        }
    else:
        report["ecg"] = None

    events = []
    if inputs.imu:
        trace = magnitude_trace(inputs.imu)
        plots.g_trace = [(t, float(g)) for t, g in trace]
        events = detect_fall(trace, dip_g=config.fall_dip_g,
                             impact_g=config.fall_impact_g,
                             recovery_ms=config.fall_recovery_ms)
        report["falls"] = {
            "n_samples": len(inputs.imu),
            "events": [{"t_predicted_ms": e.t_predicted_ms,
                        "t_detected_ms": e.t_detected_ms,
                        "min_g": e.min_g, "peak_g": e.peak_g}
                       for e in events],
        }
    else:
        report["falls"] = {"skipped": "no IMU samples"}

    emg_report = {}
    for series in (inputs.emg_bicep, inputs.emg_chest):
        if series is None:
            continue
        activity = emg_mod.analyze_emg(series, config.emg_calibration_max)
        plots.envelopes[series.channel.value] = [
            (int(round(t)), float(v))
            for t, v in zip(activity.envelope.sample_times_ms(),
                            activity.envelope.values)]
        emg_report[series.channel.value] = {
            "intensity": activity.intensity.value,
            "peaks": [{"t_ms": t, "amplitude": a} for t, a in activity.peaks],
            "envelope_max": float(activity.envelope.values.max()),
            "envelope_mean": float(activity.envelope.values.mean()),
        }
    report["emg"] = emg_report or None

    if inputs.temperature is not None:
        vals = inputs.temperature.values
        report["temperature"] = {"mean_c": float(vals.mean()),
                                 "min_c": float(vals.min()),
                                 "max_c": float(vals.max()),
                                 "n_samples": int(vals.size)}
    else:
        report["temperature"] = None

    return AnalysisResult(report=report, plots=plots, windows=windows,
                          fall_events=events)


def write_plot_csvs(plots: PlotData, plot_dir: Path) -> list[str]:
    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(name: str, header: list[str], rows) -> None:
        rows = list(rows)
        if not rows:
            return
        with (plot_dir / name).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        written.append(name)

    dump("ecg_peaks.csv", ["t_ms", "value", "is_peak"],
         ((t, repr(v), p) for t, v, p in plots.ecg_peaks))
    dump("poincare.csv", ["rr_ms", "rr_next_ms"],
         ((repr(a), repr(b)) for a, b in plots.poincare))
    dump("g_trace.csv", ["t_ms", "g"],
         ((t, repr(g)) for t, g in plots.g_trace))
    for channel, rows in sorted(plots.envelopes.items()):
        dump(f"envelope_{channel.lower()}.csv", ["t_ms", "value"],
             ((t, repr(v)) for t, v in rows))
    return written
