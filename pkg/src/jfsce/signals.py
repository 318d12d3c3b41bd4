"""Transmit-side frame construction: training sequence, payload, shifts."""

from dataclasses import dataclass
from math import gcd

import numpy as np

QPSK_SCALE = 1.0 / np.sqrt(2.0)


@dataclass
class Frame:
    """One transmit frame: training sequence followed by payload symbols."""

    samples: np.ndarray
    ns: int
    m: int


@dataclass
class SampleWindow:
    """Received observation window of length M with the ground-truth offset."""

    samples: np.ndarray
    true_offset: int


def zadoff_chu(ns, root=1):
    """Constant-amplitude training sequence s_n = exp(-j*pi*root*n^2/ns).

    Even-length convention; root must be coprime with ns so the periodic
    autocorrelation is ideal (zero at every nonzero lag).
    """
    if ns < 1:
        raise ValueError(f"ns must be positive, got {ns}")
    if gcd(root, ns) != 1:
        raise ValueError(f"root {root} not coprime with ns {ns}")
    n = np.arange(ns)
    return np.exp(-1j * np.pi * root * n * n / ns)


def qpsk_map(bits):
    """Gray-map bit pairs to unit-modulus QPSK symbols.

    bits has shape (count, 2); pair (0,0) -> (1+1j)/sqrt(2), first bit flips
    the real sign, second bit flips the imaginary sign.
    """
    bits = np.asarray(bits)
    if bits.ndim != 2 or bits.shape[1] != 2:
        raise ValueError(f"expected (count, 2) bit pairs, got shape {bits.shape}")
    re = 1.0 - 2.0 * bits[:, 0]
    im = 1.0 - 2.0 * bits[:, 1]
    return QPSK_SCALE * (re + 1j * im)


def qpsk_payload(count, rng):
    """Draw `count` uniform random QPSK symbols from `rng`."""
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    bits = rng.integers(0, 2, size=(count, 2))
    return qpsk_map(bits)


def build_frame(training, payload):
    """Concatenate training and payload into a Frame."""
    training = np.asarray(training, dtype=complex)
    payload = np.asarray(payload, dtype=complex)
    samples = np.concatenate([training, payload])
    return Frame(samples=samples, ns=training.size, m=samples.size)


def cyclic_shift(v, tau):
    """Right cyclic shift: output[i] = v[(i - tau) mod len(v)]."""
    v = np.asarray(v)
    m = v.shape[-1]
    if not 0 <= tau < m:
        raise ValueError(f"tau must be in [0, {m}), got {tau}")
    return np.roll(v, tau, axis=-1)


def shift_matrix(current, previous, l):
    """Inter-frame shift matrix X of shape (M, L).

    Entry (r, c) is current[r-c] when r >= c and previous[M+r-c] otherwise,
    so X @ h is the channel output seen over one frame period, with the first
    L-1 samples still carrying tail symbols of the previous frame.
    """
    current = np.asarray(current)
    previous = np.asarray(previous)
    m = current.size
    if previous.size != m:
        raise ValueError(f"frame length mismatch: {m} vs {previous.size}")
    if not 1 <= l <= m:
        raise ValueError(f"l must be in [1, {m}], got {l}")
    idx = np.arange(m)[:, None] - np.arange(l)[None, :]
    # negative idx indexes previous from the end, which is exactly M + idx
    return np.where(idx >= 0, current[idx], previous[idx])
