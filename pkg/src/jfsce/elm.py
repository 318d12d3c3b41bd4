"""Extreme learning machine: random hidden layer, closed-form output solve.

Weights and activations are complex throughout; the sigmoid acts on the real
and imaginary parts separately. Only the output weights are learned, by a
single pseudoinverse solve against the hidden activations.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np

MAGIC = b"JELM"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIQ")

# above this many hidden*sample entries the SVD workspace would not fit in
# memory, so the solve switches to accumulated normal equations
_SVD_ENTRY_LIMIT = 48_000_000
_GRAM_CHUNK = 4096


@dataclass
class ElmModel:
    n_input: int
    n_hidden: int
    n_output: int
    w_in: np.ndarray
    bias: np.ndarray
    w_out: np.ndarray
    seed: int
    trained: bool = False


def elm_init(n_input, n_hidden, n_output, seed):
    """Fresh model with w_in and bias i.i.d. uniform on [-1, 1] per real and
    imaginary part, drawn from `seed`; w_out starts at zero, untrained."""
    for name, v in (("n_input", n_input), ("n_hidden", n_hidden), ("n_output", n_output)):
        if v < 1:
            raise ValueError(f"{name} must be positive, got {v}")
    rng = np.random.default_rng(seed)
    w_in = rng.uniform(-1.0, 1.0, (n_hidden, n_input)) + 1j * rng.uniform(-1.0, 1.0, (n_hidden, n_input))
    bias = rng.uniform(-1.0, 1.0, n_hidden) + 1j * rng.uniform(-1.0, 1.0, n_hidden)
    w_out = np.zeros((n_output, n_hidden), dtype=complex)
    return ElmModel(n_input, n_hidden, n_output, w_in, bias, w_out, int(seed))


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-np.clip(t, -500.0, 500.0)))


def hidden_map(model, x):
    """Hidden activations sigma(W x + b), sigmoid split over re and im.

    x is one column (n_input,) or column-stacked samples (n_input, N); the
    result has matching shape with n_hidden rows.
    """
    x = np.asarray(x, dtype=complex)
    z = model.w_in @ x
    z += model.bias if z.ndim == 1 else model.bias[:, None]
    return _sigmoid(z.real) + 1j * _sigmoid(z.imag)


def elm_train(model, inputs, labels):
    """Solve the output weights as labels @ pinv(hidden activations).

    inputs: (n_input, N) column-stacked samples, labels: (n_output, N).
    Returns a trained copy of the model; the input model is not modified.
    """
    inputs = np.asarray(inputs, dtype=complex)
    labels = np.asarray(labels, dtype=complex)
    if inputs.ndim != 2 or inputs.shape[0] != model.n_input:
        raise ValueError(f"inputs must be ({model.n_input}, N), got {inputs.shape}")
    if labels.shape != (model.n_output, inputs.shape[1]):
        raise ValueError(f"labels must be ({model.n_output}, {inputs.shape[1]}), got {labels.shape}")
    n = inputs.shape[1]
    if model.n_hidden * n <= _SVD_ENTRY_LIMIT:
        o = hidden_map(model, inputs)
        u, sv, vh = np.linalg.svd(o, full_matrices=False)
        cutoff = np.finfo(np.float64).eps * max(o.shape) * (sv[0] if sv.size else 0.0)
        keep = sv > cutoff
        # labels @ pinv(o) without materializing the (N, hidden) pseudoinverse
        w_out = ((labels @ vh.conj().T[:, keep]) / sv[keep]) @ u[:, keep].conj().T
    else:
        w_out = _train_gram(model, inputs, labels)
    return replace(model, w_out=w_out, trained=True)


def _train_gram(model, inputs, labels):
    """Normal-equation solve with chunked accumulation; exact for full-row-
    rank activations, which a conditioning guard enforces."""
    h = model.n_hidden
    gram = np.zeros((h, h), dtype=complex)
    cross = np.zeros((model.n_output, h), dtype=complex)
    for start in range(0, inputs.shape[1], _GRAM_CHUNK):
        o = hidden_map(model, inputs[:, start:start + _GRAM_CHUNK])
        gram += o @ o.conj().T
        cross += labels[:, start:start + _GRAM_CHUNK] @ o.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(
            f"hidden activation Gram matrix is ill-conditioned (cond {cond:.2e}); "
            f"the memory-bounded solve needs full-row-rank activations")
    return np.linalg.solve(gram.conj().T, cross.conj().T).conj().T


def elm_forward(model, x):
    """Deployed response w_out @ sigma(W x + b) for one column or a batch."""
    if not model.trained:
        raise ValueError("model has not been trained")
    return model.w_out @ hidden_map(model, x)


def save_model(model, path):
    """Serialize a trained model: fixed header (magic, version, dims, seed)
    followed by w_in, bias, w_out as row-major little-endian complex64."""
    if not model.trained:
        raise ValueError("refusing to save an untrained model")
    header = _HEADER.pack(MAGIC, VERSION, model.n_input, model.n_hidden,
                          model.n_output, model.seed)
    with open(path, "wb") as f:
        f.write(header)
        for arr in (model.w_in, model.bias, model.w_out):
            f.write(np.ascontiguousarray(arr, dtype="<c8").tobytes())


def load_model(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated model file")
    magic, version, n_input, n_hidden, n_output, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    sizes = (n_hidden * n_input, n_hidden, n_output * n_hidden)
    if len(raw) != _HEADER.size + 8 * sum(sizes):
        raise ValueError(f"{path}: payload size mismatch")
    offset = _HEADER.size
    parts = []
    for count in sizes:
        parts.append(np.frombuffer(raw, dtype="<c8", count=count, offset=offset).astype(complex))
        offset += 8 * count
    w_in = parts[0].reshape(n_hidden, n_input)
    bias = parts[1]
    w_out = parts[2].reshape(n_output, n_hidden)
    return ElmModel(n_input, n_hidden, n_output, w_in, bias, w_out, int(seed), trained=True)
