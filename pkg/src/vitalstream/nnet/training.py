"""Mini-batch SGD-with-momentum training loop.

Deterministic under a fixed seed: shuffling is the only randomness, drawn
from the generator passed in. Single-threaded by design.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergedLoss, EmptyTrainingSet
from .network import Network

log = logging.getLogger(__name__)


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)


def inverse_frequency_weights(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-sample weights proportional to 1/class-frequency, mean 1."""
    counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
    inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0)
    w = inv[labels]
    return w * (len(labels) / w.sum())


def train(net: Network, x: np.ndarray, labels: np.ndarray, *,
          epochs: int, batch_size: int = 64, learning_rate: float = 0.001,
          momentum: float = 0.9, rng: np.random.Generator | None = None,
          sample_weights: np.ndarray | None = None,
          shuffle: bool = True,
          log_every: int = 0) -> TrainHistory:
    """Train in place; returns per-epoch loss/accuracy trajectories.

    Raises :class:`DivergedLoss` as soon as a batch loss goes non-finite.
    """
    n = len(x)
    if n == 0:
        raise EmptyTrainingSet("no training segments")
    labels = np.asarray(labels, dtype=np.int64)
    rng = rng or np.random.default_rng()

    velocity = [np.zeros_like(p.value) for p in net.params()]
    history = TrainHistory()
    for epoch in range(epochs):
        order = rng.permutation(n) if shuffle else np.arange(n)
        total_loss = 0.0
        total_hits = 0.0
        for lo in range(0, n, batch_size):
            batch = order[lo:lo + batch_size]
            w = None if sample_weights is None else sample_weights[batch]
            loss, acc = net.train_step_grads(x[batch], labels[batch], w)
            if not math.isfinite(loss):
                raise DivergedLoss(f"loss became {loss!r} at epoch {epoch}")
            for p, v in zip(net.params(), velocity):
                v *= momentum
                v -= learning_rate * p.grad
                p.value += v
            net.zero_grads()
            total_loss += loss * len(batch)
            total_hits += acc * len(batch)
        history.loss.append(total_loss / n)
        history.accuracy.append(total_hits / n)
        if log_every and (epoch + 1) % log_every == 0:
            log.info("epoch %d/%d loss=%.4f acc=%.3f", epoch + 1, epochs,
                     history.loss[-1], history.accuracy[-1])
    return history
