"""Joint frame synchronization and channel estimation over impaired links.

Cascaded learning receiver (correlation features -> offset classifier ->
matching-pursuit features -> tap regressor) with classical projection and
matching-pursuit baselines, a Rician multipath link with a saturating
amplifier model, and a deterministic Monte Carlo sweep harness.
"""

__version__ = "0.1.0"

from .baseline import ce_ml, fs_crosscorr, fs_projection, omp_ce
from .cascade import CascadeModel, deploy, train_cascade
from .channel import draw_channel, receive_window
from .elm import elm_forward, elm_init, elm_train, load_model, save_model
from .harness import SimConfig, emit_results, run_sweep
from .impairment import HpaParams, NoiseSpec, add_awgn, calibrate_drive_gain, evm, hpa_apply
from .metrics import TrialOutcome, error_probability, nmse
from .pipeline import LinkParams, draw_trial_batch, make_link
from .signals import build_frame, cyclic_shift, qpsk_map, zadoff_chu

__all__ = [
    "CascadeModel", "HpaParams", "LinkParams", "NoiseSpec", "SimConfig",
    "TrialOutcome", "add_awgn", "build_frame", "calibrate_drive_gain", "ce_ml",
    "cyclic_shift", "deploy", "draw_channel", "draw_trial_batch", "elm_forward",
    "elm_init", "elm_train", "emit_results", "error_probability", "evm",
    "fs_crosscorr", "fs_projection", "hpa_apply", "load_model", "make_link",
    "nmse", "omp_ce", "qpsk_map", "receive_window", "run_sweep", "save_model",
    "train_cascade", "zadoff_chu",
]
