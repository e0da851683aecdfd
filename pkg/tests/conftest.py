"""Shared fixtures: synthetic signals and tiny trained networks."""

import numpy as np
import pytest

from vitalstream.signal_model import Channel, SampleSeries


def gaussian_bump_ecg(bump_times_s, duration_s, rate_hz, *, amp=1.0,
                      sigma_s=0.012, noise=0.0, rng=None):
    """ECG-like trace: one Gaussian bump per requested time.

    Returns (series, true bump-center sample indices).
    """
    n = int(round(duration_s * rate_hz))
    i = np.arange(n)
    values = np.zeros(n)
    centers = []
    for t in bump_times_s:
        c = int(round(t * rate_hz))
        centers.append(c)
        values += amp * np.exp(-0.5 * ((i - c) / (sigma_s * rate_hz)) ** 2)
    if noise and rng is not None:
        values += rng.normal(0.0, noise, size=n)
    series = SampleSeries(channel=Channel.ECG, rate_hz=rate_hz, t0_ms=0,
                          values=values)
    return series, np.asarray(centers)


def rr_train_ecg(rr_ms_list, rate_hz=250.0, lead_s=0.4, tail_s=0.4, **kwargs):
    """Bump train whose consecutive spacings follow the given RR list."""
    times = [lead_s]
    for rr in rr_ms_list:
        times.append(times[-1] + rr / 1000.0)
    duration = times[-1] + tail_s
    return gaussian_bump_ecg(times, duration, rate_hz, **kwargs)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
