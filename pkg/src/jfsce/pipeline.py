"""Vectorized Monte Carlo trial engine.

Draws batches of complete link realizations (frames, amplifier, channel,
offset, noise). A batch of size 1 consumes each named random stream in
exactly the same order as the single-trial building blocks in signals.py,
channel.py and impairment.py, so the two paths produce identical numbers.
"""

import math
from dataclasses import dataclass

import numpy as np

from .impairment import HpaParams, hpa_apply
from .signals import zadoff_chu

# fixed batch length: results must not depend on worker count or scheduling,
# so the batch grid is part of the reproducibility contract
BATCH = 512

_PURPOSES = {"channel": 0, "noise": 1, "payload": 2, "weights": 3, "tau": 4, "snr": 5}

# keyspace separators for the first counter after the purpose id
PHASE_TRAIN_FS = 0
PHASE_TRAIN_CE = 1
PHASE_EVAL = 2
PHASE_PILOT = 3


def stream(master_seed, purpose, *key):
    """Named independent generator from the master seed and integer counters."""
    spawn_key = (_PURPOSES[purpose],) + tuple(int(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=spawn_key))


@dataclass
class LinkParams:
    """Physical link description shared by training and evaluation."""

    s: np.ndarray
    m: int
    l: int
    k_factor: float
    eta: float
    hpa: HpaParams | None  # None bypasses the amplifier

    @property
    def ns(self):
        return self.s.size


def make_link(ns, m, l, k_factor, eta, hpa=None):
    if not 1 <= l <= ns <= m:
        raise ValueError(f"need 1 <= l <= ns <= m, got l={l} ns={ns} m={m}")
    return LinkParams(zadoff_chu(ns), m, l, k_factor, eta, hpa)


@dataclass
class TrialBatch:
    windows: np.ndarray  # (B, M) received samples
    taus: np.ndarray  # (B,) true offsets
    taps: np.ndarray  # (B, L) channel realizations
    frames: np.ndarray  # (B, M) clean current frames, before the amplifier


def _qpsk_batch(rng, count, length):
    bits = rng.integers(0, 2, size=(count, length, 2))
    re = 1.0 - 2.0 * bits[..., 0]
    im = 1.0 - 2.0 * bits[..., 1]
    return (re + 1j * im) / np.sqrt(2.0)


def _frames_batch(link, rng, count):
    payload = _qpsk_batch(rng, count, link.m - link.ns)
    train = np.broadcast_to(link.s, (count, link.ns))
    return np.concatenate([train, payload], axis=1)


def _channel_batch(link, rng, count):
    p = np.exp(-link.eta * np.arange(link.l))
    p /= p.sum()
    if math.isinf(link.k_factor):
        return np.broadcast_to(np.sqrt(p).astype(complex), (count, link.l)).copy()
    k = link.k_factor
    scatter = (rng.standard_normal((count, link.l))
               + 1j * rng.standard_normal((count, link.l))) * np.sqrt(0.5)
    return np.sqrt(p) * (math.sqrt(k / (k + 1.0)) + math.sqrt(1.0 / (k + 1.0)) * scatter)


def _convolve_batch(current, previous, taps):
    m = current.shape[1]
    l = taps.shape[1]
    idx = np.arange(m)[:, None] - np.arange(l)[None, :]
    delayed = np.where(idx >= 0, current[:, idx], previous[:, idx])
    return np.einsum("bml,bl->bm", delayed, taps)


def draw_trial_batch(link, count, snr_db, rngs):
    """One batch of received windows.

    snr_db: scalar, per-trial array, or None for the no-noise mode. rngs is a
    mapping with independent generators under keys tau, payload, channel and
    noise.
    """
    taus = rngs["tau"].integers(0, link.m, size=count)
    current = _frames_batch(link, rngs["payload"], count)
    previous = _frames_batch(link, rngs["payload"], count)
    taps = _channel_batch(link, rngs["channel"], count)
    if link.hpa is None:
        tx_cur, tx_prev = current, previous
    else:
        tx_cur = hpa_apply(current, link.hpa)
        tx_prev = hpa_apply(previous, link.hpa)
    y = _convolve_batch(tx_cur, tx_prev, taps)
    cols = (np.arange(link.m)[None, :] - taus[:, None]) % link.m
    shifted = np.take_along_axis(y, cols, axis=1)
    if snr_db is None:
        windows = shifted
    else:
        power = np.mean(np.abs(tx_cur) ** 2, axis=1)
        scale = np.sqrt(10.0 ** (np.asarray(snr_db, dtype=float) / 10.0) / power)
        noise = (rngs["noise"].standard_normal((count, link.m))
                 + 1j * rngs["noise"].standard_normal((count, link.m)))
        windows = scale[:, None] * shifted + noise * np.sqrt(0.5)
    return TrialBatch(windows=windows, taus=taus, taps=taps, frames=current)


def batch_sizes(n_trials):
    """Deterministic batch partition of a trial count."""
    full, rem = divmod(n_trials, BATCH)
    return [BATCH] * full + ([rem] if rem else [])
