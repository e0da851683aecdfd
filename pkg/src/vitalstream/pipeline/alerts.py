"""Alert engine: abnormality escalation rule and sink dispatch.

A window is abnormal when it carries at least the configured number of
non-normal beat calls. Every abnormal window raises an AbnormalBeat alert;
hitting the configured run of *consecutive* abnormal windows escalates to
PotentialHeartFailure, after which the run counter resets.

Dispatch is at-least-once per sink: a failing sink is retried with capped
backoff and finally recorded as failed; the pipeline never stops on a dead
sink.
"""

from __future__ import annotations

import enum
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from ..errors import SinkUnavailable

log = logging.getLogger(__name__)


class AlertKind(enum.Enum):
    ABNORMAL_BEAT = "AbnormalBeat"
    POTENTIAL_HEART_FAILURE = "PotentialHeartFailure"
    FALL_DETECTED = "FallDetected"
    NO_SIGNAL = "NoSignal"


@dataclass
class Alert:
    t_ms: int
    device_id: str
    kind: AlertKind
    detail: str
    delivery_status: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"t_ms": self.t_ms, "device_id": self.device_id,
                "kind": self.kind.value, "detail": self.detail,
                "delivery_status": self.delivery_status}


def abnormality_rule(window_summaries, device_id: str, *,
                     consecutive_abnormal: int = 2,
                     beats_per_window: int = 1) -> list[Alert]:
    """Run the escalation rule over per-window summaries in time order.

    Each summary needs ``t_end_ms``, ``abnormal_beats`` and
    ``skipped_reason`` attributes (see analysis.WindowSummary).
    """
    alerts: list[Alert] = []
    run = 0
    for s in window_summaries:
        if s.skipped_reason == "no_peaks":
            alerts.append(Alert(t_ms=s.t_end_ms, device_id=device_id,
                                kind=AlertKind.NO_SIGNAL,
                                detail="no heartbeat detected; check whether "
                                       "the electrodes are in contact"))
            continue
        if s.abnormal_beats >= beats_per_window:
            run += 1
            counts = {k: v for k, v in sorted(s.beat_counts.items())
                      if k != "N" and v}
            alerts.append(Alert(t_ms=s.t_end_ms, device_id=device_id,
                                kind=AlertKind.ABNORMAL_BEAT,
                                detail=f"window {s.index}: abnormal beats "
                                       f"{counts}"))
            if run >= consecutive_abnormal:
                alerts.append(Alert(
                    t_ms=s.t_end_ms, device_id=device_id,
                    kind=AlertKind.POTENTIAL_HEART_FAILURE,
                    detail=f"{run} consecutive abnormal windows"))
                run = 0
        else:
            run = 0
    return alerts


# --- sinks -----------------------------------------------------------------

class StdoutSink:
    name = "stdout"

    def deliver(self, alert_doc: dict) -> int:
        sys.stdout.write(json.dumps(alert_doc, sort_keys=True) + "\n")
        return 1


class FileSink:
    name = "file"

    def __init__(self, path):
        self.path = Path(path)

    def deliver(self, alert_doc: dict) -> int:
        with self.path.open("a") as fh:
            fh.write(json.dumps(alert_doc, sort_keys=True) + "\n")
        return 1


class WebhookSink:
    """HTTP POST of the alert JSON, with a capped-backoff retry budget."""

    name = "webhook"

    def __init__(self, url: str, *, attempts: int = 3, backoff_s: float = 0.5,
                 timeout_s: float = 5.0):
        self.url = url
        self.attempts = attempts
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s

    def deliver(self, alert_doc: dict) -> int:
        last_error = None
        for attempt in range(1, self.attempts + 1):
            try:
                resp = requests.post(self.url, json=alert_doc,
                                     timeout=self.timeout_s)
                if resp.status_code < 300:
                    return attempt
                last_error = f"HTTP {resp.status_code}"
            except requests.RequestException as exc:
                last_error = str(exc)
            if attempt < self.attempts:
                time.sleep(min(self.backoff_s * 2 ** (attempt - 1), 5.0))
        raise SinkUnavailable(f"{self.url}: {last_error} "
                              f"after {self.attempts} attempts")


def dispatch_alert(alert: Alert, sinks) -> dict:
    """Deliver one alert to every sink; never raises on sink failure.

    Returns (and stores on the alert) a per-sink delivery record such as
    ``{"webhook": {"status": "failed", "attempts": 3}}``.
    """
    record = {}
    doc = alert.to_dict()
    for sink in sinks:
        try:
            used = sink.deliver(doc)
            record[sink.name] = {"status": "delivered", "attempts": used}
        except SinkUnavailable as exc:
            log.warning("alert sink %s unavailable: %s", sink.name, exc)
            record[sink.name] = {"status": "failed",
                                 "attempts": getattr(sink, "attempts", 1)}
        except Exception as exc:  # a broken sink must not kill the pipeline
            log.error("alert sink %s raised: %r", sink.name, exc)
            record[sink.name] = {"status": "failed", "attempts": 1}
    alert.delivery_status = record
    return record
