"""Stream-ingest service: length-prefixed telemetry frames over TCP.

Each message is a 4-byte big-endian length followed by one encrypted
telemetry frame. Frames from unpaired devices are rejected by closing the
connection; an authentication failure (tampering, wrong key) also closes
the session. Replay protection is per device across the server lifetime.

Per-device sample buffers accumulate until the device's connection
closes, then the buffered channels run through exactly the same analysis
chain as an offline replay and the report bundle is written. One logical
worker per connected stream (thread-per-connection); per-device state is
lock-guarded so a reconnecting or concurrent device stays consistent.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import struct
import threading

from ..errors import AuthenticationFailure, MalformedFrame, ReplayedSequence
from ..signal_model import Channel, ImuSample, series_from_samples
from ..telemetry import (
    CHANNEL_IDS,
    IMU_AXIS_IDS,
    FrameDecryptor,
    KeyStore,
    TelemetryFrame,
    decode_samples,
)
from .config import PipelineConfig
from .replay import finalize_bundle
from .analysis import DeviceInputs

log = logging.getLogger(__name__)

_LEN = struct.Struct(">I")
MAX_FRAME_BYTES = 1 << 20

_SCALAR_BY_ID = {v: k for k, v in CHANNEL_IDS.items()}
_IMU_BY_ID = {v: k for k, v in IMU_AXIS_IDS.items()}


def recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def send_frame(sock: socket.socket, frame: TelemetryFrame) -> None:
    blob = frame.pack()
    sock.sendall(_LEN.pack(len(blob)) + blob)


class _DeviceState:
    def __init__(self, decryptor: FrameDecryptor):
        self.decryptor = decryptor
        self.lock = threading.Lock()
        self.buffers: dict[int, list[tuple[int, float]]] = {}

    def append(self, channel_id: int, samples) -> None:
        self.buffers.setdefault(channel_id, []).extend(samples)

    def to_inputs(self) -> DeviceInputs:
        kwargs = {}
        for channel_id, samples in self.buffers.items():
            if channel_id in _SCALAR_BY_ID and samples:
                channel = _SCALAR_BY_ID[channel_id]
                series = series_from_samples(
                    channel, [t for t, _ in samples], [v for _, v in samples],
                    what=f"stream channel {channel.value}")
                key = {Channel.ECG: "ecg", Channel.EMG_BICEP: "emg_bicep",
                       Channel.EMG_CHEST: "emg_chest",
                       Channel.TEMPERATURE: "temperature"}[channel]
                kwargs[key] = series
        imu = self._imu_samples()
        if imu:
            kwargs["imu"] = imu
        return DeviceInputs(**kwargs)

    def _imu_samples(self) -> list[ImuSample]:
        by_t: dict[int, dict[str, float]] = {}
        for channel_id, axis in _IMU_BY_ID.items():
            for t, v in self.buffers.get(channel_id, []):
                by_t.setdefault(t, {})[axis] = v
        samples = []
        for t in sorted(by_t):
            triple = by_t[t]
            if len(triple) == 3:
                samples.append(ImuSample(t_ms=t, ax=triple["ax"],
                                         ay=triple["ay"], az=triple["az"]))
            else:
                log.warning("incomplete IMU triple at t=%d dropped", t)
        return samples


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server: IngestServer = self.server.ingest  # type: ignore[attr-defined]
        touched: set[bytes] = set()
        try:
            while True:
                head = recv_exact(self.request, _LEN.size)
                if head is None:
                    break
                (length,) = _LEN.unpack(head)
                if length > MAX_FRAME_BYTES:
                    log.warning("oversize message (%d bytes); closing", length)
                    return
                blob = recv_exact(self.request, length)
                if blob is None:
                    break
                try:
                    frame = TelemetryFrame.parse(blob)
                except MalformedFrame as exc:
                    log.warning("malformed frame: %s; closing session", exc)
                    return
                state = server.device_state(frame.device_id)
                if state is None:
                    log.warning("frame from unpaired device %s; closing",
                                frame.device_id.hex())
                    return
                with state.lock:
                    try:
                        channel_id, payload = state.decryptor.decrypt(frame)
                    except AuthenticationFailure as exc:
                        log.warning("auth failure from %s: %s; closing session",
                                    frame.device_id.hex(), exc)
                        return
                    except ReplayedSequence as exc:
                        log.warning("replayed frame from %s: %s; closing",
                                    frame.device_id.hex(), exc)
                        return
                    state.append(channel_id, decode_samples(payload))
                touched.add(frame.device_id)
        finally:
            for device_id in touched:
                server.finalize_device(device_id)


class IngestServer:
    """Threaded TCP listener feeding the shared analysis chain."""

    def __init__(self, config: PipelineConfig, keystore: KeyStore, *,
                 net=None, model_hash: str | None = None, sinks=()):
        self.config = config
        self.keystore = keystore
        self.net = net
        self.model_hash = model_hash
        self.sinks = tuple(sinks)
        self._devices: dict[bytes, _DeviceState] = {}
        self._registry_lock = threading.Lock()
        self._tcp = socketserver.ThreadingTCPServer(
            (config.listen_host, config.listen_port), _Handler,
            bind_and_activate=False)
        self._tcp.allow_reuse_address = True
        self._tcp.daemon_threads = True
        self._tcp.ingest = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def bound_port(self) -> int:
        return self._tcp.server_address[1]

    def device_state(self, device_id: bytes) -> _DeviceState | None:
        with self._registry_lock:
            state = self._devices.get(device_id)
            if state is None:
                key = self.keystore.get(device_id)
                if key is None:
                    return None
                state = _DeviceState(FrameDecryptor(key))
                self._devices[device_id] = state
            return state

    def finalize_device(self, device_id: bytes) -> None:
        state = self._devices.get(device_id)
        if state is None:
            return
        with state.lock:
            inputs = state.to_inputs()
            if not inputs.channels_present():
                return
            config = self.config.with_overrides(device_id_hex=device_id.hex())
            finalize_bundle(inputs, config, net=self.net,
                            model_hash=self.model_hash, sinks=self.sinks)

    def start(self) -> None:
        self._tcp.server_bind()
        self._tcp.server_activate()
        self._thread = threading.Thread(target=self._tcp.serve_forever,
                                        name="ingest-server", daemon=True)
        self._thread.start()
        log.info("listening on %s:%d", self.config.listen_host, self.bound_port)

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        """Blocking variant for the CLI."""
        self._tcp.server_bind()
        self._tcp.server_activate()
        log.info("listening on %s:%d", self.config.listen_host, self.bound_port)
        try:
            self._tcp.serve_forever()
        finally:
            self._tcp.server_close()
