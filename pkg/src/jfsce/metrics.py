"""Figures of merit for joint synchronization and estimation trials."""

from dataclasses import dataclass

import numpy as np


@dataclass
class TrialOutcome:
    tau_true: int
    tau_hat: int
    h_true: np.ndarray
    h_hat: np.ndarray


def error_probability(outcomes):
    """Fraction of trials whose estimated offset misses the true one."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("no outcomes")
    errors = sum(1 for o in outcomes if o.tau_hat != o.tau_true)
    return errors / len(outcomes)


def nmse(outcomes):
    """Mean over trials of ||h_hat - h||^2 / ||h||^2 (expectation of the
    per-trial ratio, not a ratio of sums)."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("no outcomes")
    ratios = []
    for o in outcomes:
        denom = np.linalg.norm(o.h_true) ** 2
        if denom == 0.0:
            raise ValueError("true channel has zero norm")
        ratios.append(np.linalg.norm(o.h_hat - o.h_true) ** 2 / denom)
    return float(np.mean(ratios))
