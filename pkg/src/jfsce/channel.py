"""Block-fading Rician multipath channel and the received window."""

import math
from dataclasses import dataclass

import numpy as np

from .impairment import add_awgn
from .signals import SampleWindow, cyclic_shift, shift_matrix


@dataclass
class ChannelRealization:
    taps: np.ndarray
    k_factor: float
    decay_eta: float
    power_profile: np.ndarray


def power_profile(l, eta):
    """Exponential delay profile normalized to unit total power."""
    if l < 1:
        raise ValueError(f"l must be positive, got {l}")
    p = np.exp(-eta * np.arange(l))
    return p / p.sum()


def draw_channel(l, k, eta, rng):
    """Draw one Rician block-fading realization.

    Each tap mixes a deterministic unit line-of-sight component with a
    CN(0, 1) scatter term at ratio K, then carries its share of the
    exponential power profile, so E[||h||^2] == 1. K = inf collapses to the
    deterministic profile.
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    p = power_profile(l, eta)
    if math.isinf(k):
        return ChannelRealization(np.sqrt(p).astype(complex), k, eta, p)
    scatter = (rng.standard_normal(l) + 1j * rng.standard_normal(l)) * np.sqrt(0.5)
    mix = math.sqrt(k / (k + 1.0)) + math.sqrt(1.0 / (k + 1.0)) * scatter
    return ChannelRealization(np.sqrt(p) * mix, k, eta, p)


def receive_window(current_tx, previous_tx, h, tau, noise, rng):
    """Propagate two consecutive transmitted frames through the channel,
    apply the frame-boundary offset tau, and add receiver noise."""
    taps = h.taps
    x = shift_matrix(current_tx, previous_tx, taps.size)
    y = x @ taps
    shifted = cyclic_shift(y, tau)
    return SampleWindow(samples=add_awgn(shifted, noise, rng), true_offset=tau)
