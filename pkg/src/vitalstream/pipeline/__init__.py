"""End-to-end orchestration: replay, ingest service, alerts, reports."""

from .alerts import Alert, AlertKind, abnormality_rule, dispatch_alert  # noqa: F401
from .analysis import AnalysisResult, DeviceInputs, WindowSummary, analyze_device  # noqa: F401
from .config import PipelineConfig  # noqa: F401
from .emulator import stream_inputs  # noqa: F401
from .replay import ReportBundle, finalize_bundle, replay  # noqa: F401
from .server import IngestServer  # noqa: F401
