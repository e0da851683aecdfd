"""Authenticated telemetry framing for sensor batches.

Wire frame (all header integers big-endian):

    offset  size  field
    0       1     version        (currently 1)
    1       8     device_id
    9       8     seq            strictly increasing per device
    17      12    nonce          device_id[:4] || seq, never reused per key
    29      1     channel id
    30      4     payload_len    ciphertext length
    34      n     ciphertext
    34+n    16    auth tag

Encryption is AES-128 in GCM mode with the whole header bound as
associated data, so any bit flip -- header or body -- fails verification.
Payloads are little-endian arrays of ``(t_ms: int64, value: float32)``
pairs for one channel.

Keys are 128-bit, one per device, issued at pairing time and held in a
single-writer :class:`KeyStore`.
"""

from __future__ import annotations

import json
import secrets
import struct
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import (
    AuthenticationFailure,
    DuplicateDevice,
    MalformedFrame,
    NonceReuse,
    OversizePayload,
    ReplayedSequence,
    RngFailure,
)
from .signal_model import Channel

FRAME_VERSION = 1
KEY_BYTES = 16
DEVICE_ID_BYTES = 8
NONCE_BYTES = 12
TAG_BYTES = 16
HEADER_LEN = 1 + DEVICE_ID_BYTES + 8 + NONCE_BYTES + 1 + 4
MAX_PAYLOAD_BYTES = 64 * 1024

_HEADER = struct.Struct(">B8sQ12sBI")
_SAMPLE = struct.Struct("<qf")

# Channel ids on the wire; IMU axes travel as three scalar channels and
# are reassembled by timestamp on the receiving side.
CHANNEL_IDS = {
    Channel.ECG: 1,
    Channel.EMG_BICEP: 2,
    Channel.EMG_CHEST: 3,
    Channel.TEMPERATURE: 4,
}
IMU_AXIS_IDS = {"ax": 5, "ay": 6, "az": 7}
_ID_TO_NAME = {v: k.value for k, v in CHANNEL_IDS.items()}
_ID_TO_NAME.update({v: f"IMU_{k.upper()}" for k, v in IMU_AXIS_IDS.items()})


@dataclass(frozen=True)
class DeviceKey:
    key: bytes
    device_id: bytes
    issued_at_ms: int

    def __post_init__(self):
        if len(self.key) != KEY_BYTES:
            raise RngFailure(f"key must be {KEY_BYTES} bytes, got {len(self.key)}")
        if len(self.device_id) != DEVICE_ID_BYTES:
            raise MalformedFrame(
                f"device_id must be {DEVICE_ID_BYTES} bytes, got {len(self.device_id)}")


@dataclass(frozen=True)
class TelemetryFrame:
    version: int
    device_id: bytes
    seq: int
    nonce: bytes
    channel_id: int
    ciphertext: bytes
    auth_tag: bytes

    def header(self) -> bytes:
        return _HEADER.pack(self.version, self.device_id, self.seq,
                            self.nonce, self.channel_id, len(self.ciphertext))

    def pack(self) -> bytes:
        return self.header() + self.ciphertext + self.auth_tag

    @classmethod
    def parse(cls, data: bytes) -> "TelemetryFrame":
        if len(data) < HEADER_LEN + TAG_BYTES:
            raise MalformedFrame(f"frame truncated at {len(data)} bytes")
        version, device_id, seq, nonce, channel_id, payload_len = \
            _HEADER.unpack_from(data)
        if version != FRAME_VERSION:
            raise MalformedFrame(f"unsupported frame version {version}")
        if len(data) != HEADER_LEN + payload_len + TAG_BYTES:
            raise MalformedFrame(
                f"length field {payload_len} inconsistent with "
                f"{len(data)} frame bytes")
        return cls(version=version, device_id=device_id, seq=seq, nonce=nonce,
                   channel_id=channel_id,
                   ciphertext=data[HEADER_LEN:HEADER_LEN + payload_len],
                   auth_tag=data[HEADER_LEN + payload_len:])


def derive_nonce(device_id: bytes, seq: int) -> bytes:
    """96-bit nonce: 4 device-id bytes + the 64-bit sequence counter.

    Under one key (= one device) uniqueness reduces to seq uniqueness,
    which the strictly-increasing counter guarantees.
    """
    return device_id[:4] + struct.pack(">Q", seq)


def encode_samples(samples) -> bytes:
    """Pack (t_ms, value) pairs as little-endian int64/float32."""
    return b"".join(_SAMPLE.pack(int(t), float(v)) for t, v in samples)


def decode_samples(payload: bytes) -> list[tuple[int, float]]:
    if len(payload) % _SAMPLE.size:
        raise MalformedFrame(
            f"payload length {len(payload)} is not a multiple of "
            f"{_SAMPLE.size}")
    return [(t, v) for t, v in _SAMPLE.iter_unpack(payload)]


def channel_name(channel_id: int) -> str:
    try:
        return _ID_TO_NAME[channel_id]
    except KeyError:
        raise MalformedFrame(f"unknown channel id {channel_id}") from None


def encrypt_frame(device_key: DeviceKey, seq: int, channel_id: int,
                  plaintext: bytes) -> TelemetryFrame:
    """Seal one payload; the header doubles as GCM associated data."""
    if len(plaintext) > MAX_PAYLOAD_BYTES:
        raise OversizePayload(
            f"payload of {len(plaintext)} bytes exceeds {MAX_PAYLOAD_BYTES}")
    nonce = derive_nonce(device_key.device_id, seq)
    header = _HEADER.pack(FRAME_VERSION, device_key.device_id, seq, nonce,
                          channel_id, len(plaintext))
    sealed = AESGCM(device_key.key).encrypt(nonce, plaintext, header)
    return TelemetryFrame(version=FRAME_VERSION,
                          device_id=device_key.device_id, seq=seq,
                          nonce=nonce, channel_id=channel_id,
                          ciphertext=sealed[:-TAG_BYTES],
                          auth_tag=sealed[-TAG_BYTES:])


def decrypt_frame(device_key: DeviceKey, frame: TelemetryFrame) -> tuple[int, bytes]:
    """Verify and open one frame; returns (channel_id, plaintext).

    Fails closed: wrong key, any bit flip, or a nonce not matching the
    frame's own (device_id, seq) yields an error, never garbled plaintext.
    """
    if frame.nonce != derive_nonce(frame.device_id, frame.seq):
        raise MalformedFrame("nonce does not match device_id/seq")
    try:
        plaintext = AESGCM(device_key.key).decrypt(
            frame.nonce, frame.ciphertext + frame.auth_tag, frame.header())
    except InvalidTag:
        raise AuthenticationFailure("frame failed tag verification") from None
    return frame.channel_id, plaintext


class FrameEncryptor:
    """Per-device sealing with sequence bookkeeping (nonce-reuse guard)."""

    def __init__(self, device_key: DeviceKey, start_seq: int = 1):
        self._key = device_key
        self._next_seq = start_seq

    def encrypt(self, channel_id: int, plaintext: bytes,
                seq: int | None = None) -> TelemetryFrame:
        if seq is None:
            seq = self._next_seq
        if seq < self._next_seq:
            raise NonceReuse(
                f"seq {seq} regresses below {self._next_seq}; nonce would repeat")
        frame = encrypt_frame(self._key, seq, channel_id, plaintext)
        self._next_seq = seq + 1
        return frame


class FrameDecryptor:
    """Per-device verification with replay rejection."""

    def __init__(self, device_key: DeviceKey):
        self._key = device_key
        self.last_seq = 0

    def decrypt(self, frame: TelemetryFrame) -> tuple[int, bytes]:
        if frame.seq <= self.last_seq:
            raise ReplayedSequence(
                f"seq {frame.seq} not beyond last accepted {self.last_seq}")
        channel_id, plaintext = decrypt_frame(self._key, frame)
        self.last_seq = frame.seq
        return channel_id, plaintext


class KeyStore:
    """Pairing registry: one 128-bit key per device id."""

    def __init__(self):
        self._keys: dict[bytes, DeviceKey] = {}

    def pair(self, device_id: bytes, rng=None, issued_at_ms: int = 0) -> DeviceKey:
        """Issue a fresh key for a device; re-pairing requires a revoke."""
        if device_id in self._keys:
            raise DuplicateDevice(f"device {device_id.hex()} already paired")
        draw = rng if rng is not None else secrets.token_bytes
        key = draw(KEY_BYTES)
        if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_BYTES:
            raise RngFailure(
                f"randomness source returned {len(key) if key else 0} bytes, "
                f"need {KEY_BYTES}")
        device_key = DeviceKey(key=bytes(key), device_id=device_id,
                               issued_at_ms=issued_at_ms)
        self._keys[device_id] = device_key
        return device_key

    def revoke(self, device_id: bytes) -> None:
        self._keys.pop(device_id, None)

    def get(self, device_id: bytes) -> DeviceKey | None:
        return self._keys.get(device_id)

    def __contains__(self, device_id: bytes) -> bool:
        return device_id in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    # JSON persistence stands in for a secrets vault; keys are hex-encoded
    # and the file should be protected accordingly.
    def save(self, path) -> None:
        doc = {dk.device_id.hex(): {"key": dk.key.hex(),
                                    "issued_at_ms": dk.issued_at_ms}
               for dk in self._keys.values()}
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "KeyStore":
        doc = json.loads(Path(path).read_text())
        store = cls()
        for device_hex, entry in doc.items():
            device_id = bytes.fromhex(device_hex)
            store._keys[device_id] = DeviceKey(
                key=bytes.fromhex(entry["key"]), device_id=device_id,
                issued_at_ms=int(entry.get("issued_at_ms", 0)))
        return store
