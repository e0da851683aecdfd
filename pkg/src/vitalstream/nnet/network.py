"""Sequential network container, softmax/cross-entropy head, model file IO.

Model container format (``.npz``), versioned:

* ``meta`` -- JSON string: ``{"format_version": 1, "layers": [...layer
  specs...], "extra": {...}}``
* ``param_000``, ``param_001``, ... -- flat float64 parameter arrays in
  layer order, exactly as produced by :meth:`Network.params`.

Loading rebuilds the layer stack from the specs and restores parameters
bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ShapeMismatch
from .layers import Layer, layer_from_spec

FORMAT_VERSION = 1

_LOG_TINY = 1e-12


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stable under constant logit shifts."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray,
                  sample_weight: np.ndarray | None = None) -> float:
    """Mean (optionally weighted) negative log-likelihood."""
    picked = probs[np.arange(len(labels)), labels]
    nll = -np.log(np.maximum(picked, _LOG_TINY))
    if sample_weight is None:
        return float(nll.mean())
    w = np.asarray(sample_weight, dtype=np.float64)
    return float((nll * w).sum() / w.sum())


def softmax_xent_grad(probs: np.ndarray, labels: np.ndarray,
                      sample_weight: np.ndarray | None = None) -> np.ndarray:
    """Gradient of the mean cross-entropy w.r.t. the logits."""
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    if sample_weight is None:
        return g / len(labels)
    w = np.asarray(sample_weight, dtype=np.float64)
    return g * (w / w.sum())[:, None]


class Network:
    """A plain sequential stack ending in logits; softmax applied on top."""

    def __init__(self, layers: list[Layer], extra: dict | None = None):
        self.layers = list(layers)
        # classifier-specific metadata carried through save/load untouched
        self.extra = dict(extra or {})

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def zero_grads(self):
        for p in self.params():
            p.grad[...] = 0.0

    def logits(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x, train=False))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x, train=False), axis=1)

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        d = dlogits
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def train_step_grads(self, x: np.ndarray, labels: np.ndarray,
                         sample_weight: np.ndarray | None = None) -> tuple[float, float]:
        """One forward/backward pass; returns (loss, batch accuracy).

        Gradients accumulate into the parameters; caller applies the update
        and zeroes them.
        """
        probs = softmax(self.logits(x, train=True))
        loss = cross_entropy(probs, labels, sample_weight)
        self.backward(softmax_xent_grad(probs, labels, sample_weight))
        acc = float(np.mean(np.argmax(probs, axis=1) == labels))
        return loss, acc

    def save(self, path) -> None:
        meta = {"format_version": FORMAT_VERSION,
                "layers": [layer.spec() for layer in self.layers],
                "extra": self.extra}
        arrays = {f"param_{i:03d}": p.value
                  for i, p in enumerate(self.params())}
        with Path(path).open("wb") as fh:
            np.savez(fh, meta=np.frombuffer(
                json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
                **arrays)

    @classmethod
    def load(cls, path) -> "Network":
        with np.load(Path(path)) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format_version") != FORMAT_VERSION:
                raise ValueError(
                    f"unsupported model format {meta.get('format_version')!r}")
            net = cls([layer_from_spec(s) for s in meta["layers"]],
                      extra=meta.get("extra"))
            params = net.params()
            for i, p in enumerate(params):
                stored = data[f"param_{i:03d}"]
                if stored.shape != p.value.shape:
                    raise ShapeMismatch(
                        f"param {i} shape {stored.shape} != {p.value.shape}")
                p.value[...] = stored
        return net
