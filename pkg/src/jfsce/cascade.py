"""Cascaded learning receiver and its single-net ablation.

The cascade feeds the magnitude of the cross-correlation metric to a first
network that localizes the frame boundary, then feeds a matching-pursuit
channel estimate at that boundary to a second network that refines the taps.
The raw variant replaces both feature extractors with the unprocessed window
(sample magnitudes for synchronization, the received training-length segment
for estimation) at a larger hidden width.
"""

from dataclasses import dataclass

import numpy as np

from .baseline import JfsceEstimate, _omp_batch, segment_indices
from .elm import ElmModel, elm_forward, elm_init, elm_train
from .numerics import training_convolution_matrix, training_toeplitz_full
from .pipeline import PHASE_TRAIN_CE, PHASE_TRAIN_FS, batch_sizes, draw_trial_batch, stream

RAW_HIDDEN_FACTOR = 12

VARIANT_CASCADE = "elm_cascade"
VARIANT_RAW = "elm_raw"


@dataclass
class CascadeModel:
    fs_net: ElmModel
    ce_net: ElmModel
    variant: str


@dataclass
class FsDataset:
    inputs: np.ndarray  # (N, n_input) unit-norm feature rows
    taus: np.ndarray  # (N,) true offsets
    m: int


@dataclass
class CeDataset:
    inputs: np.ndarray  # (N, n_input) unit-norm feature rows
    labels: np.ndarray  # (N, L) true taps


def unit_rows(x):
    """Scale each row to unit Euclidean norm; zero rows stay zero."""
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    out = np.zeros_like(x)
    np.divide(x, norms, out=out, where=norms > 0)
    return out


def fs_features(windows, corr_conj):
    """Normalized magnitude of the synchronization metric u = S^H r."""
    return unit_rows(np.abs(windows @ corr_conj))


def raw_fs_features(windows):
    return unit_rows(np.abs(windows))


def ce_features(coefs):
    return unit_rows(coefs)


def raw_ce_features(windows, taus, ns):
    m = windows.shape[1]
    idx = (np.asarray(taus)[:, None] + np.arange(ns)[None, :]) % m
    return unit_rows(np.take_along_axis(windows, idx, axis=1))


def _train_rngs(master_seed, phase, point, variant_id, batch):
    return {name: stream(master_seed, name, phase, point, variant_id, batch)
            for name in ("tau", "payload", "channel", "noise")}


def _snr_draw(master_seed, phase, point, variant_id, batch, count, snr_range):
    lo, hi = snr_range
    rng = stream(master_seed, "snr", phase, point, variant_id, batch)
    return rng.uniform(lo, hi, size=count)


def gen_fs_dataset(link, n, master_seed, snr_range, variant=VARIANT_CASCADE, point=0):
    """Draw n windows and extract synchronizer training pairs."""
    variant_id = 0 if variant == VARIANT_CASCADE else 1
    corr_conj = training_toeplitz_full(link.s, link.m).conj() if variant == VARIANT_CASCADE else None
    inputs = np.empty((n, link.m))
    taus = np.empty(n, dtype=np.intp)
    pos = 0
    for b, size in enumerate(batch_sizes(n)):
        rngs = _train_rngs(master_seed, PHASE_TRAIN_FS, point, variant_id, b)
        snr = _snr_draw(master_seed, PHASE_TRAIN_FS, point, variant_id, b, size, snr_range)
        batch = draw_trial_batch(link, size, snr, rngs)
        if variant == VARIANT_CASCADE:
            inputs[pos:pos + size] = fs_features(batch.windows, corr_conj)
        else:
            inputs[pos:pos + size] = raw_fs_features(batch.windows)
        taus[pos:pos + size] = batch.taus
        pos += size
    return FsDataset(inputs=inputs, taus=taus, m=link.m)


def train_fs_net(dataset, hidden, seed):
    """Fit the synchronizer on one-hot offset labels."""
    n = dataset.inputs.shape[0]
    labels = np.zeros((dataset.m, n), dtype=complex)
    labels[dataset.taus, np.arange(n)] = 1.0
    model = elm_init(dataset.inputs.shape[1], hidden, dataset.m, seed)
    return elm_train(model, dataset.inputs.T, labels)


def _fs_decide(fs_net, features):
    out = elm_forward(fs_net, features.T)
    return np.argmax(np.abs(out) ** 2, axis=0)


def _ce_inputs(link, windows, tau_hat, variant, omp_iters):
    """Second-stage features at the synchronized offsets."""
    if variant == VARIANT_RAW:
        return raw_ce_features(windows, tau_hat, link.ns)
    idx = (segment_indices(0, link.ns, link.l, link.m)[None, :] + tau_hat[:, None]) % link.m
    segs = np.take_along_axis(windows, idx, axis=1)
    coefs = _omp_batch(segs, training_convolution_matrix(link.s, link.l), omp_iters)
    return ce_features(coefs)


def gen_ce_dataset(link, fs_net, n, master_seed, snr_range, variant=VARIANT_CASCADE,
                   point=0, omp_iters=None):
    """Draw n windows, synchronize them with the frozen first net, and
    extract estimator training pairs labeled with the true taps."""
    if not fs_net.trained:
        raise ValueError("first-stage net must be trained before the second-stage dataset")
    variant_id = 0 if variant == VARIANT_CASCADE else 1
    omp_iters = link.l if omp_iters is None else omp_iters
    corr_conj = training_toeplitz_full(link.s, link.m).conj() if variant == VARIANT_CASCADE else None
    n_in = link.l if variant == VARIANT_CASCADE else link.ns
    inputs = np.empty((n, n_in), dtype=complex)
    labels = np.empty((n, link.l), dtype=complex)
    pos = 0
    for b, size in enumerate(batch_sizes(n)):
        rngs = _train_rngs(master_seed, PHASE_TRAIN_CE, point, variant_id, b)
        snr = _snr_draw(master_seed, PHASE_TRAIN_CE, point, variant_id, b, size, snr_range)
        batch = draw_trial_batch(link, size, snr, rngs)
        if variant == VARIANT_CASCADE:
            feats = fs_features(batch.windows, corr_conj)
        else:
            feats = raw_fs_features(batch.windows)
        tau_hat = _fs_decide(fs_net, feats)
        inputs[pos:pos + size] = _ce_inputs(link, batch.windows, tau_hat, variant, omp_iters)
        labels[pos:pos + size] = batch.taps
        pos += size
    return CeDataset(inputs=inputs, labels=labels)


def train_ce_net(dataset, hidden, seed):
    model = elm_init(dataset.inputs.shape[1], hidden, dataset.labels.shape[1], seed)
    return elm_train(model, dataset.inputs.T, dataset.labels.T)


def train_cascade(link, n_t, n_c, master_seed, snr_range, variant=VARIANT_CASCADE,
                  n_m=10, n_l=10, point=0, omp_iters=None):
    """Subnet-wise training: fit and freeze the synchronizer, then fit the
    estimator on data that passed through the frozen synchronizer."""
    variant_id = 0 if variant == VARIANT_CASCADE else 1
    if variant == VARIANT_CASCADE:
        fs_hidden, ce_hidden = n_m * link.m, n_l * link.l
    else:
        fs_hidden, ce_hidden = RAW_HIDDEN_FACTOR * link.m, RAW_HIDDEN_FACTOR * link.l
    fs_seed = stream(master_seed, "weights", PHASE_TRAIN_FS, point, variant_id).integers(0, 2 ** 63)
    ce_seed = stream(master_seed, "weights", PHASE_TRAIN_CE, point, variant_id).integers(0, 2 ** 63)
    fs_ds = gen_fs_dataset(link, n_t, master_seed, snr_range, variant, point)
    fs_net = train_fs_net(fs_ds, fs_hidden, fs_seed)
    del fs_ds
    ce_ds = gen_ce_dataset(link, fs_net, n_c, master_seed, snr_range, variant, point, omp_iters)
    ce_net = train_ce_net(ce_ds, ce_hidden, ce_seed)
    return CascadeModel(fs_net=fs_net, ce_net=ce_net, variant=variant)


def deploy_batch(model, windows, link, omp_iters=None):
    """Run the two-stage receiver on a batch of windows; returns the offset
    decisions and tap estimates."""
    omp_iters = link.l if omp_iters is None else omp_iters
    if model.variant == VARIANT_CASCADE:
        corr_conj = training_toeplitz_full(link.s, link.m).conj()
        feats = fs_features(windows, corr_conj)
    else:
        feats = raw_fs_features(windows)
    tau_hat = _fs_decide(model.fs_net, feats)
    ce_in = _ce_inputs(link, windows, tau_hat, model.variant, omp_iters)
    h_hat = elm_forward(model.ce_net, ce_in.T).T
    return tau_hat, h_hat


def deploy(model, window, link, omp_iters=None):
    """Single-window deployment; the metric is the squared magnitude of the
    synchronizer's output scores."""
    omp_iters = link.l if omp_iters is None else omp_iters
    windows = np.asarray(window.samples)[None, :]
    if model.variant == VARIANT_CASCADE:
        corr_conj = training_toeplitz_full(link.s, link.m).conj()
        feats = fs_features(windows, corr_conj)
    else:
        feats = raw_fs_features(windows)
    scores = elm_forward(model.fs_net, feats.T)[:, 0]
    tau_hat = int(np.argmax(np.abs(scores) ** 2))
    ce_in = _ce_inputs(link, windows, np.array([tau_hat]), model.variant, omp_iters)
    h_hat = elm_forward(model.ce_net, ce_in.T)[:, 0]
    return JfsceEstimate(tau_hat=tau_hat, h_hat=h_hat, metric=np.abs(scores) ** 2)
