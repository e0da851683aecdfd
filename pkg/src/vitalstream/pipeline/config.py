"""Pipeline configuration: one flat key/value record, loadable from JSON.

``config_hash`` covers only the keys that change analysis output, so an
offline replay and a network ingest of the same data hash identically even
though their transport settings differ.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

_ANALYSIS_KEYS = (
    "ecg_window_ms", "schedule_ms", "min_window_ms", "nn_threshold_ms",
    "fall_dip_g", "fall_impact_g", "fall_recovery_ms",
    "consecutive_abnormal", "abnormal_beats_per_window",
    "emg_calibration_max",
)


@dataclass(frozen=True)
class PipelineConfig:
    # analysis windowing: 4-minute ECG windows on a 20-minute capture schedule
    ecg_window_ms: int = 240_000
    schedule_ms: int = 1_200_000
    min_window_ms: int = 2_000          # trailing partial windows below this are dropped
    nn_threshold_ms: float = 50.0       # xx for the NNxx/pNNxx statistics

    # fall rule
    fall_dip_g: float = 0.90
    fall_impact_g: float = 1.0
    fall_recovery_ms: float = 300.0

    # alert rule
    consecutive_abnormal: int = 2
    abnormal_beats_per_window: int = 1

    # EMG grading
    emg_calibration_max: float = 1.0

    # artifacts and transport
    model_path: str | None = None
    device_id_hex: str = "0000000000000001"
    output_dir: str = "out"
    listen_host: str = "127.0.0.1"
    listen_port: int = 7380
    webhook_url: str | None = None
    keystore_path: str | None = None
    seed: int = 0

    def __post_init__(self):
        positive = ("ecg_window_ms", "schedule_ms", "min_window_ms",
                    "nn_threshold_ms", "fall_dip_g", "fall_impact_g",
                    "fall_recovery_ms", "consecutive_abnormal",
                    "abnormal_beats_per_window", "emg_calibration_max")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.schedule_ms < self.ecg_window_ms:
            raise ValueError("schedule_ms must be >= ecg_window_ms")

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def analysis_hash(self) -> str:
        doc = {k: getattr(self, k) for k in _ANALYSIS_KEYS}
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        doc = json.loads(Path(path).read_text())
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2,
                                         sort_keys=True) + "\n")
