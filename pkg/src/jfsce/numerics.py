"""Shared linear-algebra primitives used by the estimators."""

import numpy as np
import scipy.linalg

from .signals import cyclic_shift


def pinv(a, tol=None):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below tol * s_max are treated as zero; the default tol is
    machine epsilon times max(rows, cols).
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim {a.ndim}")
    if tol is None:
        tol = np.finfo(np.float64).eps * max(a.shape)
    try:
        return np.linalg.pinv(a, rcond=tol)
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(f"SVD did not converge in pinv: {e}") from e


def lstsq(a, b):
    """Minimum-norm least-squares solve, identical to pinv(a) @ b."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    x, _, _, _ = np.linalg.lstsq(a, b, rcond=np.finfo(np.float64).eps * max(a.shape))
    return x


def training_toeplitz_full(s, m):
    """M x M circulant whose column i is the zero-padded training sequence
    cyclically shifted by i. S^H r is then the full-window correlation of r
    against the training sequence at every candidate offset."""
    s = np.asarray(s, dtype=complex)
    if s.size > m:
        raise ValueError(f"training length {s.size} exceeds window length {m}")
    padded = np.concatenate([s, np.zeros(m - s.size, dtype=complex)])
    cols = [cyclic_shift(padded, i) for i in range(m)]
    return np.stack(cols, axis=1)


def training_convolution_matrix(s, l):
    """Fully loaded convolution rows of the training sequence.

    Shape (Ns-L+1, L), entry (r, c) = s[r+L-1-c]. Row r of the product with a
    length-L channel is the channel output at time r+L-1, the part of the
    received training block that no payload symbol reaches.
    """
    s = np.asarray(s, dtype=complex)
    ns = s.size
    if not 1 <= l <= ns:
        raise ValueError(f"need 1 <= l <= {ns}, got l={l}")
    return scipy.linalg.toeplitz(c=s[l - 1:], r=s[l - 1::-1])


def projection_matrix(a):
    """Orthogonal projector onto the column space of a, A (A^H A)^-1 A^H."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {a.shape}")
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.min() <= np.finfo(np.float64).eps * max(a.shape) * diag.max():
        raise ValueError("rank-deficient matrix has no well-defined projector inverse")
    return q @ q.conj().T


def orthonormal_basis(a):
    """Orthonormal basis Q for the column space of a (same rank check as
    projection_matrix); Q @ Q^H equals projection_matrix(a)."""
    a = np.asarray(a, dtype=complex)
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.min() <= np.finfo(np.float64).eps * max(a.shape) * diag.max():
        raise ValueError("rank-deficient matrix has no well-defined projector inverse")
    return q
