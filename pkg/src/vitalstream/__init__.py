"""Body-vitals analytics for wearable sensor streams.

Subsystems: ECG R-peak detection and HRV/stress scoring, five-class
heartbeat classification with a from-scratch 1-D convolutional network,
IMU orientation and fall prediction/detection, surface-EMG activity
grading, AES-128 authenticated telemetry framing, and a replay/ingest
pipeline with an alert engine.
"""

__version__ = "0.1.0"
