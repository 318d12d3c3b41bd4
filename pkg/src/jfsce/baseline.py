"""Non-learning reference estimators.

Two frame-synchronization metrics (training-subspace projection and full
window cross-correlation) and two channel estimators (least squares on the
fully loaded training rows, and orthogonal matching pursuit on the same
rows). Ties in any argmax resolve to the smallest offset.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import lstsq, training_convolution_matrix, training_toeplitz_full


@dataclass
class JfsceEstimate:
    """Joint estimate: frame offset, channel taps, synchronization metric."""

    tau_hat: int
    h_hat: np.ndarray
    metric: np.ndarray


def segment_indices(tau, ns, l, m):
    """Window indices of the fully loaded training rows under offset tau."""
    return (tau + np.arange(l - 1, ns)) % m


def training_segment(samples, tau, ns, l):
    samples = np.asarray(samples)
    return samples[..., segment_indices(tau, ns, l, samples.shape[-1])]


def training_segment_batch(windows, taus, ns, l):
    """Training rows per window under a per-window offset: (B, Ns-L+1)."""
    m = windows.shape[1]
    idx = (np.asarray(taus)[:, None] + np.arange(l - 1, ns)[None, :]) % m
    return windows[np.arange(windows.shape[0])[:, None], idx]


def fs_projection(window, s, l):
    """Projection-metric synchronizer.

    Scores every candidate offset with q(tau) = r^H (B - I) r, where r is the
    hypothesized fully loaded training segment and B projects onto the span
    of the leading length-(Ns-L+1) training subsequence; the score is 0
    exactly when the segment is collinear with that subsequence. Returns
    (tau_hat, scores).
    """
    scores = _projection_scores(window.samples[None, :], np.asarray(s, complex), l)[0]
    return int(np.argmax(scores)), scores


def _projection_scores(samples, s, l):
    p = s[: s.size - l + 1].copy()
    p /= np.linalg.norm(p)
    m = samples.shape[-1]
    idx = np.stack([segment_indices(tau, s.size, l, m) for tau in range(m)])
    segs = samples[..., idx]  # (batch, M, Ns-L+1)
    proj = np.abs(segs @ p.conj()) ** 2
    energy = np.abs(segs) ** 2
    return proj - energy.sum(axis=-1)


def ce_ml(window, tau_hat, s, l):
    """Least-squares channel estimate on the training rows at tau_hat."""
    s = np.asarray(s, dtype=complex)
    a = training_convolution_matrix(s, l)
    return lstsq(a, training_segment(window.samples, tau_hat, s.size, l))


def fs_crosscorr(window, s):
    """Cross-correlation synchronizer over the full window.

    u = S^H r with S the circulant of the zero-padded training sequence;
    tau_hat maximizes |u_i|^2. Returns (tau_hat, u).
    """
    samples = np.asarray(window.samples)
    full = training_toeplitz_full(s, samples.size)
    u = full.conj().T @ samples
    return int(np.argmax(np.abs(u) ** 2)), u


def omp_ce(window, tau_hat, s, l, iters=None, mode="training", frame=None):
    """Channel estimate by orthogonal matching pursuit.

    Greedy max-|correlation| atom selection against the residual with a joint
    least-squares refit on the selected support each iteration. Mode
    "training" fits the fully loaded training rows at tau_hat; mode "frame"
    uses all M rows of the known transmitted frame treated cyclically (the
    payload is then assumed known to the estimator).
    """
    s = np.asarray(s, dtype=complex)
    if iters is None:
        iters = l
    if not 1 <= iters <= l:
        raise ValueError(f"iters must be in [1, {l}], got {iters}")
    if mode == "training":
        a = training_convolution_matrix(s, l)
        y = training_segment(window.samples, tau_hat, s.size, l)
    elif mode == "frame":
        if frame is None:
            raise ValueError("mode 'frame' needs the transmitted frame")
        a = frame_matrix(np.asarray(frame, dtype=complex), tau_hat, l)
        y = np.asarray(window.samples)
    else:
        raise ValueError(f"unknown omp matrix mode {mode!r}")
    return _omp_batch(y[None, :], a, iters)[0]


def ml_estimate_batch(windows, s, l):
    """Projection synchronizer plus least-squares taps for a window batch."""
    s = np.asarray(s, dtype=complex)
    scores = _projection_scores(windows, s, l)
    tau_hat = np.argmax(scores, axis=1)
    a = training_convolution_matrix(s, l)
    segs = training_segment_batch(windows, tau_hat, s.size, l)
    return tau_hat, lstsq(a, segs.T).T


def omp_estimate_batch(windows, s, l, iters=None, mode="training", frames=None):
    """Cross-correlation synchronizer plus OMP taps for a window batch."""
    s = np.asarray(s, dtype=complex)
    iters = l if iters is None else iters
    if not 1 <= iters <= l:
        raise ValueError(f"iters must be in [1, {l}], got {iters}")
    full = training_toeplitz_full(s, windows.shape[1])
    u = windows @ full.conj()
    tau_hat = np.argmax(np.abs(u) ** 2, axis=1)
    if mode == "training":
        a = training_convolution_matrix(s, l)
        y = training_segment_batch(windows, tau_hat, s.size, l)
        coef = _omp_batch(y, a, iters)
    elif mode == "frame":
        if frames is None:
            raise ValueError("mode 'frame' needs the transmitted frames")
        a = frame_matrix_batch(np.asarray(frames, dtype=complex), tau_hat, l)
        coef = _omp_batch_var(windows, a, iters)
    else:
        raise ValueError(f"unknown omp matrix mode {mode!r}")
    return tau_hat, coef


def frame_matrix(frame, tau, l):
    """M x L cyclic measurement matrix of the full frame at offset tau:
    entry (i, j) = frame[(M - tau + i - j) mod M]."""
    m = frame.size
    idx = (m - tau + np.arange(m)[:, None] - np.arange(l)[None, :]) % m
    return frame[idx]


def frame_matrix_batch(frames, taus, l):
    """Per-trial frame_matrix for a batch: (B, M, L)."""
    m = frames.shape[1]
    idx = (m - np.asarray(taus)[:, None, None]
           + np.arange(m)[None, :, None] - np.arange(l)[None, None, :]) % m
    return frames[np.arange(frames.shape[0])[:, None, None], idx]


def _omp_batch(y, a, iters):
    """OMP in the Gram domain for a batch of right-hand sides.

    y: (batch, n), a: (n, l). Returns coefficient vectors (batch, l) with
    zeros outside the selected support.
    """
    gram = np.broadcast_to(a.conj().T @ a, (y.shape[0], a.shape[1], a.shape[1]))
    return _omp_gram(y @ a.conj(), gram, iters)


def _omp_batch_var(y, a, iters):
    """OMP with a different measurement matrix per trial: a is (batch, n, l)."""
    gram = np.einsum("bnk,bnl->bkl", a.conj(), a)
    c = np.einsum("bnl,bn->bl", a.conj(), y)
    return _omp_gram(c, gram, iters)


def _omp_gram(c, gram, iters):
    batch, l = c.shape
    support = np.zeros((batch, iters), dtype=np.intp)
    coef = np.zeros((batch, l), dtype=complex)
    chosen = np.zeros((batch, l), dtype=bool)
    rows = np.arange(batch)
    for k in range(iters):
        # correlation of each atom with the current residual
        corr = c - np.einsum("bji,bi->bj", gram, coef)
        mag = np.abs(corr)
        mag[chosen] = -1.0
        pick = np.argmax(mag, axis=1)
        support[:, k] = pick
        chosen[rows, pick] = True
        sub = support[:, : k + 1]
        g_ss = gram[rows[:, None, None], sub[:, :, None], sub[:, None, :]]
        c_s = np.take_along_axis(c, sub, axis=1)
        sol = np.linalg.solve(g_ss, c_s[:, :, None])[:, :, 0]
        coef = np.zeros((batch, l), dtype=complex)
        np.put_along_axis(coef, sub, sol, axis=1)
    return coef
