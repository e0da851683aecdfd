"""Offline replay of recorded channel CSVs through the analysis chain.

Replay stands in for the garment's live sensors: it loads per-channel
files, runs the shared per-device analysis, generates and dispatches
alerts, and writes the report bundle:

    <output_dir>/<device_id>/report.json     full analysis report
    <output_dir>/<device_id>/alerts.jsonl    one alert JSON per line
    <output_dir>/<device_id>/plots/*.csv     series for plotting

The bundle is append-free and deterministic apart from the report's
``generated_at_ms`` stamp.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

from ..nnet import Network
from ..signal_model import Channel, read_imu_csv, read_signal_csv
from .alerts import Alert, AlertKind, abnormality_rule, dispatch_alert
from .analysis import AnalysisResult, DeviceInputs, analyze_device, write_plot_csvs
from .config import PipelineConfig

log = logging.getLogger(__name__)


@dataclass
class ReportBundle:
    report: dict
    alerts: list[Alert]
    bundle_dir: Path


def load_model(config: PipelineConfig) -> tuple[Network | None, str | None]:
    if not config.model_path:
        return None, None
    net = Network.load(config.model_path)
    digest = hashlib.sha256(Path(config.model_path).read_bytes()).hexdigest()[:16]
    return net, digest


def load_inputs(ecg=None, imu=None, emg_bicep=None, emg_chest=None,
                temperature=None) -> DeviceInputs:
    """Build DeviceInputs from CSV paths (any subset may be present)."""
    return DeviceInputs(
        ecg=read_signal_csv(ecg, Channel.ECG) if ecg else None,
        imu=read_imu_csv(imu) if imu else None,
        emg_bicep=read_signal_csv(emg_bicep, Channel.EMG_BICEP) if emg_bicep else None,
        emg_chest=read_signal_csv(emg_chest, Channel.EMG_CHEST) if emg_chest else None,
        temperature=read_signal_csv(temperature, Channel.TEMPERATURE)
        if temperature else None,
    )


def build_alerts(result: AnalysisResult, config: PipelineConfig) -> list[Alert]:
    alerts = abnormality_rule(
        result.windows, config.device_id_hex,
        consecutive_abnormal=config.consecutive_abnormal,
        beats_per_window=config.abnormal_beats_per_window)
    for event in result.fall_events:
        alerts.append(Alert(
            t_ms=event.t_detected_ms, device_id=config.device_id_hex,
            kind=AlertKind.FALL_DETECTED,
            detail=f"fall: dip to {event.min_g:.3f} g at "
                   f"{event.t_predicted_ms} ms, impact {event.peak_g:.3f} g"))
    alerts.sort(key=lambda a: a.t_ms)
    return alerts


def finalize_bundle(inputs: DeviceInputs, config: PipelineConfig, *,
                    net: Network | None = None, model_hash: str | None = None,
                    sinks=()) -> ReportBundle:
    """Analyze, alert, and write one device's bundle under the output dir."""
    result = analyze_device(inputs, config, net)
    result.report["model_hash"] = model_hash

    alerts = build_alerts(result, config)
    for alert in alerts:
        dispatch_alert(alert, sinks)
    result.report["alerts"] = [a.to_dict() for a in alerts]
    result.report["generated_at_ms"] = int(time.time() * 1000)

    bundle_dir = Path(config.output_dir) / config.device_id_hex
    bundle_dir.mkdir(parents=True, exist_ok=True)
    (bundle_dir / "report.json").write_text(
        json.dumps(result.report, indent=2, sort_keys=True) + "\n")
    with (bundle_dir / "alerts.jsonl").open("w") as fh:
        for alert in alerts:
            fh.write(json.dumps(alert.to_dict(), sort_keys=True) + "\n")
    write_plot_csvs(result.plots, bundle_dir / "plots")
    log.info("wrote bundle for device %s: %d window(s), %d alert(s)",
             config.device_id_hex, len(result.windows), len(alerts))
    return ReportBundle(report=result.report, alerts=alerts,
                        bundle_dir=bundle_dir)


def replay(config: PipelineConfig, *, ecg=None, imu=None, emg_bicep=None,
           emg_chest=None, temperature=None, sinks=()) -> ReportBundle:
    """Run the full offline pipeline over recorded CSVs."""
    inputs = load_inputs(ecg=ecg, imu=imu, emg_bicep=emg_bicep,
                         emg_chest=emg_chest, temperature=temperature)
    net, model_hash = load_model(config)
    return finalize_bundle(inputs, config, net=net, model_hash=model_hash,
                           sinks=sinks)
