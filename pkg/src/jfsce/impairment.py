"""Transmitter nonlinearity (Saleh model), EVM calibration, receiver noise."""

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass
class HpaParams:
    """Saleh amplifier coefficients plus the input drive gain."""

    alpha_a: float = 2.16
    beta_a: float = 1.15
    alpha_phi: float = 4.00
    beta_phi: float = 9.10
    drive_gain: float = 1.0


@dataclass
class NoiseSpec:
    """Receiver noise setting.

    snr_db of None disables scaling and noise entirely. Otherwise the signal
    is scaled so its mean power becomes 10^(snr_db/10) against unit-variance
    complex noise; signal_power is the measured mean power of the transmitted
    frame that the scale factor is derived from.
    """

    snr_db: float | None
    signal_power: float = 1.0


def hpa_apply(x, params):
    """Memoryless Saleh nonlinearity on the signal envelope.

    With r = drive_gain * |x_i|, the output amplitude is
    alpha_a * r / (1 + beta_a * r^2) and the phase gains
    alpha_phi * r^2 / (1 + beta_phi * r^2).
    """
    x = np.asarray(x, dtype=complex)
    r = params.drive_gain * np.abs(x)
    r2 = r * r
    amp = params.alpha_a * r / (1.0 + params.beta_a * r2)
    phase_shift = params.alpha_phi * r2 / (1.0 + params.beta_phi * r2)
    out = np.zeros_like(x)
    nz = r > 0
    # exp(j*theta) taken from the input sample itself, so x/|x| is safe on nz
    out[nz] = amp[nz] * (x[nz] / np.abs(x[nz])) * np.exp(1j * phase_shift[nz])
    return out


def linear_reference(x, params):
    """The amplifier's distortion-free response: small-signal gain alpha_a
    applied to the driven input."""
    return params.alpha_a * params.drive_gain * np.asarray(x, dtype=complex)


def evm(distorted, reference, definition="root"):
    """Error vector magnitude in percent.

    definition "standard" is the plain norm ratio ||d - ref|| / ||ref||;
    "root" takes the square root of that ratio before converting to percent.
    """
    distorted = np.asarray(distorted, dtype=complex)
    reference = np.asarray(reference, dtype=complex)
    if distorted.shape != reference.shape:
        raise ValueError(f"shape mismatch: {distorted.shape} vs {reference.shape}")
    ref_norm = np.linalg.norm(reference)
    if ref_norm == 0.0:
        raise ValueError("reference signal has zero norm")
    ratio = np.linalg.norm(distorted - reference) / ref_norm
    if definition == "root":
        return 100.0 * math.sqrt(ratio)
    if definition == "standard":
        return 100.0 * ratio
    raise ValueError(f"unknown EVM definition {definition!r}")


def distortion_evm(pilot, params, definition="root"):
    """EVM of the amplifier output against its linear reference on a pilot."""
    return evm(hpa_apply(pilot, params), linear_reference(pilot, params), definition)


def calibrate_drive_gain(target_evm, params, pilot, definition="root",
                         lo=1e-3, hi=1e3, tol_pp=0.1, max_iter=200):
    """Bisect the drive gain so the measured EVM hits target_evm percent.

    EVM(g) is continuous and strictly increasing past the linear region, so a
    sign change over [lo, hi] brackets the target. Raises if the target is
    outside the achievable range or the bracket fails to converge.
    """
    if target_evm <= 0.0:
        raise ValueError(f"target EVM must be positive, got {target_evm}")

    def measure(g):
        return distortion_evm(pilot, replace(params, drive_gain=g), definition)

    f_lo = measure(lo) - target_evm
    f_hi = measure(hi) - target_evm
    if f_lo > 0.0 or f_hi < 0.0:
        raise ValueError(
            f"EVM target {target_evm}% not bracketed by gains [{lo}, {hi}]: "
            f"range [{f_lo + target_evm:.3f}, {f_hi + target_evm:.3f}]%")
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        f_mid = measure(mid) - target_evm
        if abs(f_mid) < tol_pp:
            return mid
        if f_mid < 0.0:
            lo = mid
        else:
            hi = mid
    raise ValueError(f"calibration did not converge within {max_iter} bisections")


def add_awgn(x, spec, rng):
    """Scale the signal to the requested SNR and add unit-variance complex
    Gaussian noise. A None snr_db returns the input unchanged (no-noise mode).
    """
    x = np.asarray(x, dtype=complex)
    if spec.snr_db is None:
        return x.copy()
    if spec.signal_power <= 0.0:
        raise ValueError(f"signal_power must be positive, got {spec.signal_power}")
    scale = math.sqrt(10.0 ** (spec.snr_db / 10.0) / spec.signal_power)
    noise = (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    return scale * x + noise * np.sqrt(0.5)
