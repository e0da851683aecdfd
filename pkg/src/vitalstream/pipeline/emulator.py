"""Sensor emulator: streams recorded CSVs to the ingest service as
encrypted frames, standing in for a live garment."""

from __future__ import annotations

import logging
import socket

from ..signal_model import read_imu_csv, read_signal_csv, Channel
from ..telemetry import CHANNEL_IDS, IMU_AXIS_IDS, DeviceKey, FrameEncryptor, encode_samples
from .server import send_frame

log = logging.getLogger(__name__)

DEFAULT_BATCH_SAMPLES = 250


def stream_inputs(host: str, port: int, device_key: DeviceKey, *,
                  ecg=None, imu=None, emg_bicep=None, emg_chest=None,
                  temperature=None, batch_samples: int = DEFAULT_BATCH_SAMPLES,
                  start_seq: int = 1) -> int:
    """Encrypt and send every channel file; returns the number of frames.

    Channels are streamed one after another, each chopped into
    ``batch_samples``-sized frames under a single per-device sequence.
    """
    channels: list[tuple[int, list[tuple[int, float]]]] = []

    def add_scalar(path, channel: Channel):
        series = read_signal_csv(path, channel)
        pairs = [(int(round(t)), float(v))
                 for t, v in zip(series.sample_times_ms(), series.values)]
        channels.append((CHANNEL_IDS[channel], pairs))

    if ecg:
        add_scalar(ecg, Channel.ECG)
    if emg_bicep:
        add_scalar(emg_bicep, Channel.EMG_BICEP)
    if emg_chest:
        add_scalar(emg_chest, Channel.EMG_CHEST)
    if temperature:
        add_scalar(temperature, Channel.TEMPERATURE)
    if imu:
        samples = read_imu_csv(imu)
        for axis, channel_id in IMU_AXIS_IDS.items():
            channels.append((channel_id,
                             [(s.t_ms, getattr(s, axis)) for s in samples]))

    encryptor = FrameEncryptor(device_key, start_seq=start_seq)
    sent = 0
    with socket.create_connection((host, port)) as sock:
        for channel_id, pairs in channels:
            for lo in range(0, len(pairs), batch_samples):
                payload = encode_samples(pairs[lo:lo + batch_samples])
                send_frame(sock, encryptor.encrypt(channel_id, payload))
                sent += 1
        sock.shutdown(socket.SHUT_WR)
        # wait for the server to finish reading before tearing down
        sock.recv(1)
    log.info("streamed %d frame(s) for device %s", sent,
             device_key.device_id.hex())
    return sent
