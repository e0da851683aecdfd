"""Command-line entry points.

One subcommand per workflow step: offline analysis (hrv, fall, orient,
emg, replay), classifier lifecycle (train, eval, classify), key handling
and offline frame tools (keygen, encrypt, decrypt), and the network pair
(serve, emulate). ``--config`` points at a JSON file with
:class:`~vitalstream.pipeline.PipelineConfig` keys; explicit flags win
over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import struct
import sys
from pathlib import Path

import numpy as np

from . import beats, emg as emg_mod, hrv as hrv_mod, motion, telemetry
from .nnet import Network, train as train_net, inverse_frequency_weights
from .pipeline import PipelineConfig, IngestServer, replay as run_replay, stream_inputs
from .pipeline.alerts import StdoutSink, WebhookSink
from .pipeline.replay import load_model
from .rpeaks import detect_r_peaks
from .signal_model import (
    Channel,
    read_imu_csv,
    read_signal_csv,
)

log = logging.getLogger(__name__)

_EMG_CHANNELS = {"bicep": Channel.EMG_BICEP, "chest": Channel.EMG_CHEST}


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_config(args) -> PipelineConfig:
    config = (PipelineConfig.from_json(args.config)
              if getattr(args, "config", None) else PipelineConfig())
    overrides = {}
    for field in ("model_path", "output_dir", "webhook_url", "keystore_path",
                  "seed"):
        if getattr(args, field, None) is not None:
            overrides[field] = getattr(args, field)
    return config.with_overrides(**overrides)


def cmd_hrv(args) -> int:
    series = read_signal_csv(args.ecg, Channel.ECG, rate_hz=args.rate)
    peaks = detect_r_peaks(series)
    rr = hrv_mod.rr_series(peaks, series.rate_hz)
    td = hrv_mod.time_domain_metrics(rr, xx_ms=args.xx_ms)
    pc = hrv_mod.poincare(rr)
    stress = hrv_mod.stress_level(td.rmssd_ms)
    _emit({
        "n_peaks": int(len(peaks)),
        "n_flagged_intervals": int(np.count_nonzero(rr.flagged)),
        "time_domain": {
            "mean_rr_ms": td.mean_rr_ms, "sdnn_ms": td.sdnn_ms,
            "rmssd_ms": td.rmssd_ms, "mean_hr_bpm": td.mean_hr_bpm,
            "std_hr_bpm": td.std_hr_bpm, "min_hr_bpm": td.min_hr_bpm,
            "max_hr_bpm": td.max_hr_bpm, "nnxx_count": td.nnxx_count,
            "pnnxx_pct": td.pnnxx_pct, "xx_ms": td.xx_ms},
        "poincare": {"sd1_ms": pc.sd1_ms, "sd2_ms": pc.sd2_ms,
                     "points": pc.points.tolist()},
        "stress": {"hrv_score_ms": stress.hrv_score_ms,
                   "level": stress.level.value},
    }, args.out)
    return 0


def _training_segments(args, rng):
    if args.data:
        return beats.load_mitbih_segments(args.data)
    mix = ({c: 0.2 for c in beats.BeatClass} if args.balanced_mix else None)
    return beats.synthetic_beat_corpus(args.synthetic, rng, class_mix=mix)


def cmd_train(args) -> int:
    rng = np.random.default_rng(args.seed)
    segments = _training_segments(args, rng)
    config = beats.NetworkConfig(learning_rate=args.lr,
                                 batch_size=args.batch_size,
                                 class_weighting=args.class_weighting)
    net = beats.build_network(config, rng=rng)
    x, y = beats.segments_to_arrays(segments)
    weights = (inverse_frequency_weights(y, config.classes)
               if config.class_weighting else None)
    history = train_net(net, x, y, epochs=args.epochs,
                        batch_size=config.batch_size,
                        learning_rate=config.learning_rate,
                        momentum=config.momentum, rng=rng,
                        sample_weights=weights, log_every=1)
    net.save(args.out)
    _emit({"segments": len(segments), "epochs": args.epochs,
           "final_loss": history.loss[-1],
           "final_train_accuracy": history.accuracy[-1],
           "loss_curve": history.loss, "accuracy_curve": history.accuracy,
           "model": str(args.out)}, None)
    return 0


def cmd_eval(args) -> int:
    net = Network.load(args.model)
    if args.data:
        segments = beats.load_mitbih_segments(args.data)
    else:
        segments = beats.synthetic_beat_corpus(
            args.synthetic, np.random.default_rng(args.seed))
    report = beats.evaluate(net, segments)
    _emit(report.to_dict(), args.out)
    return 0


def cmd_classify(args) -> int:
    net = Network.load(args.model)
    series = read_signal_csv(args.ecg, Channel.ECG, rate_hz=args.rate)
    peaks = detect_r_peaks(series)
    calls, skipped = beats.classify_stream(net, series, peaks)
    _emit({
        "n_peaks": int(len(peaks)),
        "beats": [{"beat_index": c.beat_index, "peak_index": c.peak_index,
                   "label": c.label.name, "probability": c.probability}
                  for c in calls],
        "skipped": [{"beat_index": i, "reason": r} for i, r in skipped],
    }, args.out)
    return 0


def cmd_fall(args) -> int:
    samples = read_imu_csv(args.imu)
    events = motion.detect_fall(motion.magnitude_trace(samples))
    _emit({"events": [{"t_predicted_ms": e.t_predicted_ms,
                       "t_detected_ms": e.t_detected_ms,
                       "min_g": e.min_g, "peak_g": e.peak_g}
                      for e in events]}, args.out)
    return 0


def cmd_orient(args) -> int:
    samples = read_imu_csv(args.imu)
    cal = motion.calibrate(read_imu_csv(args.calib)) if args.calib else None
    rows = []
    for s in samples:
        o = motion.euler_angles(s, cal)
        rows.append({"t_ms": s.t_ms, "roll_deg": o.roll_deg,
                     "pitch_deg": o.pitch_deg, "yaw_deg": o.yaw_deg,
                     "label": o.label.value})
    _emit({"calibrated": cal is not None, "samples": rows}, args.out)
    return 0


def cmd_emg(args) -> int:
    series = read_signal_csv(args.signal, _EMG_CHANNELS[args.channel])
    activity = emg_mod.analyze_emg(series, args.calib_max)
    _emit({
        "channel": activity.channel.value,
        "intensity": activity.intensity.value,
        "peaks": [{"t_ms": t, "amplitude": a} for t, a in activity.peaks],
        "envelope": {"t_ms": [int(round(t)) for t in
                              activity.envelope.sample_times_ms()],
                     "value": activity.envelope.values.tolist()},
    }, args.out)
    return 0


def _load_keystore(path) -> telemetry.KeyStore:
    path = Path(path)
    return telemetry.KeyStore.load(path) if path.exists() else telemetry.KeyStore()


def cmd_keygen(args) -> int:
    store = _load_keystore(args.keystore)
    device_id = bytes.fromhex(args.device_id)
    store.pair(device_id)
    store.save(args.keystore)
    _emit({"device_id": device_id.hex(), "keystore": str(args.keystore)}, None)
    return 0


_WIRE_CHANNELS = {"ecg": Channel.ECG, "bicep": Channel.EMG_BICEP,
                  "chest": Channel.EMG_CHEST, "temperature": Channel.TEMPERATURE}


def cmd_encrypt(args) -> int:
    store = telemetry.KeyStore.load(args.keystore)
    device_key = store.get(bytes.fromhex(args.device_id))
    if device_key is None:
        sys.stderr.write("device is not paired in this keystore\n")
        return 2
    channel = _WIRE_CHANNELS[args.channel]
    series = read_signal_csv(args.infile, channel)
    pairs = [(int(round(t)), float(v))
             for t, v in zip(series.sample_times_ms(), series.values)]
    encryptor = telemetry.FrameEncryptor(device_key, start_seq=args.start_seq)
    n = 0
    with Path(args.out).open("wb") as fh:
        for lo in range(0, len(pairs), args.batch_samples):
            frame = encryptor.encrypt(
                telemetry.CHANNEL_IDS[channel],
                telemetry.encode_samples(pairs[lo:lo + args.batch_samples]))
            blob = frame.pack()
            fh.write(struct.pack(">I", len(blob)) + blob)
            n += 1
    _emit({"frames": n, "out": str(args.out)}, None)
    return 0


def cmd_decrypt(args) -> int:
    store = telemetry.KeyStore.load(args.keystore)
    data = Path(args.infile).read_bytes()
    offset = 0
    decryptors: dict[bytes, telemetry.FrameDecryptor] = {}
    out = []
    while offset < len(data):
        (length,) = struct.unpack_from(">I", data, offset)
        offset += 4
        frame = telemetry.TelemetryFrame.parse(data[offset:offset + length])
        offset += length
        device_key = store.get(frame.device_id)
        if device_key is None:
            sys.stderr.write(f"skipping unpaired device {frame.device_id.hex()}\n")
            continue
        dec = decryptors.setdefault(frame.device_id,
                                    telemetry.FrameDecryptor(device_key))
        channel_id, payload = dec.decrypt(frame)
        out.append({"device_id": frame.device_id.hex(), "seq": frame.seq,
                    "channel": telemetry.channel_name(channel_id),
                    "samples": telemetry.decode_samples(payload)})
    _emit({"frames": out}, args.out)
    return 0


def _sinks(config: PipelineConfig, print_alerts: bool):
    sinks = []
    if print_alerts:
        sinks.append(StdoutSink())
    if config.webhook_url:
        sinks.append(WebhookSink(config.webhook_url))
    return sinks


def cmd_replay(args) -> int:
    config = _load_config(args)
    bundle = run_replay(config, ecg=args.ecg, imu=args.imu,
                        emg_bicep=args.emg_bicep, emg_chest=args.emg_chest,
                        temperature=args.temperature,
                        sinks=_sinks(config, args.print_alerts))
    sys.stdout.write(f"bundle written to {bundle.bundle_dir}\n")
    return 0


def cmd_serve(args) -> int:
    config = _load_config(args)
    if getattr(args, "host", None):
        config = config.with_overrides(listen_host=args.host)
    if getattr(args, "port", None) is not None:
        config = config.with_overrides(listen_port=args.port)
    if not config.keystore_path:
        sys.stderr.write("serve needs a keystore (config keystore_path or --keystore)\n")
        return 2
    keystore = telemetry.KeyStore.load(config.keystore_path)
    net, model_hash = load_model(config)
    server = IngestServer(config, keystore, net=net, model_hash=model_hash,
                          sinks=_sinks(config, args.print_alerts))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_emulate(args) -> int:
    store = telemetry.KeyStore.load(args.keystore)
    device_key = store.get(bytes.fromhex(args.device_id))
    if device_key is None:
        sys.stderr.write("device is not paired in this keystore\n")
        return 2
    sent = stream_inputs(args.host, args.port, device_key, ecg=args.ecg,
                         imu=args.imu, emg_bicep=args.emg_bicep,
                         emg_chest=args.emg_chest,
                         temperature=args.temperature,
                         start_seq=args.start_seq)
    sys.stdout.write(f"streamed {sent} frames\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vitalstream",
        description="Wearable body-vitals analytics toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hrv", help="HRV report from an ECG CSV")
    p.add_argument("--ecg", required=True)
    p.add_argument("--rate", type=float, default=None,
                   help="sampling rate override (Hz)")
    p.add_argument("--xx-ms", type=float, default=50.0, dest="xx_ms")
    p.add_argument("--out")
    p.set_defaults(func=cmd_hrv)

    p = sub.add_parser("train", help="train the beat classifier")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="beat corpus CSV (187 values + label per row)")
    src.add_argument("--synthetic", type=int, metavar="N",
                     help="train on N generated beats instead")
    p.add_argument("--balanced-mix", action="store_true",
                   help="uniform class mix for --synthetic")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--class-weighting", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file (.npz)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data")
    src.add_argument("--synthetic", type=int, metavar="N")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="classify beats in an ECG CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--ecg", required=True)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fall", help="fall events from an IMU CSV")
    p.add_argument("--imu", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fall)

    p = sub.add_parser("orient", help="per-sample orientation labels")
    p.add_argument("--imu", required=True)
    p.add_argument("--calib", help="still-pose IMU CSV for offset calibration")
    p.add_argument("--out")
    p.set_defaults(func=cmd_orient)

    p = sub.add_parser("emg", help="EMG envelope, peaks and intensity")
    p.add_argument("--signal", required=True)
    p.add_argument("--channel", choices=sorted(_EMG_CHANNELS), default="bicep")
    p.add_argument("--calib-max", type=float, required=True, dest="calib_max",
                   help="per-user max contraction amplitude (V)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_emg)

    p = sub.add_parser("keygen", help="pair a device: issue a 128-bit key")
    p.add_argument("--device-id", required=True, dest="device_id",
                   help="16 hex chars (8 bytes)")
    p.add_argument("--keystore", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt a channel CSV into a frame file")
    p.add_argument("--keystore", required=True)
    p.add_argument("--device-id", required=True, dest="device_id")
    p.add_argument("--channel", default="ecg",
                   choices=["ecg", "bicep", "chest", "temperature"])
    p.add_argument("--in", required=True, dest="infile")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-samples", type=int, default=250, dest="batch_samples")
    p.add_argument("--start-seq", type=int, default=1, dest="start_seq")
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt a frame file back to samples")
    p.add_argument("--keystore", required=True)
    p.add_argument("--in", required=True, dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("replay", help="offline pipeline over recorded CSVs")
    p.add_argument("--config")
    p.add_argument("--ecg")
    p.add_argument("--imu")
    p.add_argument("--emg-bicep", dest="emg_bicep")
    p.add_argument("--emg-chest", dest="emg_chest")
    p.add_argument("--temperature")
    p.add_argument("--model", dest="model_path")
    p.add_argument("--out-dir", dest="output_dir")
    p.add_argument("--webhook-url", dest="webhook_url")
    p.add_argument("--seed", type=int)
    p.add_argument("--print-alerts", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="TCP ingest service for encrypted frames")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--keystore", dest="keystore_path")
    p.add_argument("--model", dest="model_path")
    p.add_argument("--out-dir", dest="output_dir")
    p.add_argument("--webhook-url", dest="webhook_url")
    p.add_argument("--print-alerts", action="store_true")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("emulate", help="stream recorded CSVs as encrypted frames")
    p.add_argument("--keystore", required=True)
    p.add_argument("--device-id", required=True, dest="device_id")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--ecg")
    p.add_argument("--imu")
    p.add_argument("--emg-bicep", dest="emg_bicep")
    p.add_argument("--emg-chest", dest="emg_chest")
    p.add_argument("--temperature")
    p.add_argument("--start-seq", type=int, default=1, dest="start_seq")
    p.set_defaults(func=cmd_emulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
