"""MLP backbone with an explicit feature-extractor split.

The network is a stack of affine layers with ReLU after every layer except the
last.  ``split_index`` counts the layers that form the feature extractor: the
features Z are the post-ReLU activations after that layer (captured before any
dropout).  Dropout, when enabled, is applied after each hidden activation in
train mode only; eval mode is fully deterministic.

Parameter snapshots are deep, read-only copies, so trajectory checkpoints are
never affected by later training steps.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, FormatError
from .layers import affine_backward, affine_forward, dropout

__all__ = [
    "ModelSpec",
    "MlpParams",
    "ParamSnapshot",
    "ForwardCache",
    "init_mlp",
    "forward",
    "backward",
    "predict_proba",
    "snapshot",
    "restore",
    "save_params",
    "load_params",
]


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description: layer sizes, feature split, dropout rate."""

    layer_sizes: tuple[int, ...]
    split_index: int = 1
    dropout_rate: float = 0.0

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if any(int(s) < 1 for s in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive, got {self.layer_sizes}")
        n_layers = len(self.layer_sizes) - 1
        if not 1 <= self.split_index < n_layers:
            raise ValueError(
                f"split_index must be in [1, {n_layers}) so the head is nonempty, "
                f"got {self.split_index}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))


@dataclass
class MlpParams:
    """Layer weights/biases plus the feature-extractor split.

    ``layers[i]`` is (W, b) with W of shape (d_i, d_{i+1}) and b of shape
    (d_{i+1},).  Mutated in place only by the trainer.
    """

    layers: list[tuple[np.ndarray, np.ndarray]]
    split_index: int
    dropout_rate: float = 0.0

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple([self.layers[0][0].shape[0]] + [W.shape[1] for W, _ in self.layers])

    def spec(self) -> ModelSpec:
        return ModelSpec(self.layer_sizes, self.split_index, self.dropout_rate)


@dataclass(frozen=True)
class ParamSnapshot:
    """Immutable deep copy of an MlpParams at one training instant."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    split_index: int
    dropout_rate: float


@dataclass
class ForwardCache:
    """Intermediates needed by backward: per-layer inputs, pre-activations, masks."""

    inputs: list[np.ndarray] = field(default_factory=list)
    pre_activations: list[np.ndarray] = field(default_factory=list)
    dropout_masks: list[np.ndarray | None] = field(default_factory=list)


def init_mlp(
    layer_sizes,
    split_index: int,
    dropout_rate: float,
    rng: np.random.Generator,
) -> MlpParams:
    """Fresh parameters: ReLU-scaled Gaussian weights (variance 2/fan_in), zero biases."""
    spec = ModelSpec(tuple(layer_sizes), split_index, dropout_rate)
    layers = []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        W = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        b = np.zeros(fan_out)
        layers.append((W, b))
    return MlpParams(layers, spec.split_index, spec.dropout_rate)


def forward(
    params: MlpParams,
    X: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    """Run the network, returning (Z, logits, cache).

    Z is the feature activation after layer ``split_index`` (post-ReLU,
    pre-dropout).  The cache supports :func:`backward`.  Only train-mode
    dropout consumes random numbers.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.layers[0][0].shape[0]:
        raise DimensionError(
            f"input {X.shape} does not match first layer {params.layers[0][0].shape}"
        )
    n_layers = len(params.layers)
    cache = ForwardCache()
    a = X
    Z = None
    for i, (W, b) in enumerate(params.layers, start=1):
        cache.inputs.append(a)
        pre = affine_forward(a, W, b)
        if i == n_layers:
            cache.pre_activations.append(pre)
            cache.dropout_masks.append(None)
            logits = pre
            break
        cache.pre_activations.append(pre)
        h = np.where(pre > 0, pre, 0.0)
        if i == params.split_index:
            Z = h
        h, mask = dropout(h, params.dropout_rate, rng=rng, train_mode=train_mode)
        cache.dropout_masks.append(mask)
        a = h
    assert Z is not None  # guaranteed by split_index < n_layers
    return Z, logits, cache


def backward(
    params: MlpParams,
    cache: ForwardCache,
    dlogits: np.ndarray,
    dZ: np.ndarray | None = None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Parameter gradients for one forward pass.

    ``dlogits`` is the loss gradient at the output layer; ``dZ``, when given,
    is an extra loss gradient injected at the feature activation (used for the
    squared-MMD term, which attaches to Z rather than the logits).
    """
    n_layers = len(params.layers)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * n_layers  # type: ignore[list-item]
    upstream = np.asarray(dlogits, dtype=np.float64)
    for i in range(n_layers, 0, -1):
        W, _ = params.layers[i - 1]
        if i < n_layers:
            mask = cache.dropout_masks[i - 1]
            if mask is not None:
                upstream = upstream * mask
            if dZ is not None and i == params.split_index:
                upstream = upstream + dZ
            pre = cache.pre_activations[i - 1]
            upstream = np.where(pre > 0, upstream, 0.0)
        dX, dW, db = affine_backward(cache.inputs[i - 1], W, upstream)
        grads[i - 1] = (dW, db)
        upstream = dX
    return grads


def predict_proba(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Row-stochastic class probabilities (eval mode, no dropout)."""
    _, logits, _ = forward(params, X, train_mode=False)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def snapshot(params: MlpParams) -> ParamSnapshot:
    """Deep, read-only copy of the current parameters."""
    copies = []
    for W, b in params.layers:
        Wc, bc = W.copy(), b.copy()
        Wc.flags.writeable = False
        bc.flags.writeable = False
        copies.append((Wc, bc))
    return ParamSnapshot(tuple(copies), params.split_index, params.dropout_rate)


def restore(snap: ParamSnapshot) -> MlpParams:
    """Rebuild mutable parameters from a snapshot (bit-identical values)."""
    layers = [(W.copy(), b.copy()) for W, b in snap.layers]
    return MlpParams(layers, snap.split_index, snap.dropout_rate)


# Checkpoint files: little-endian u64 header (layer count, then rows/cols per
# layer), followed per layer by the W entries row-major and then the bias,
# all as little-endian f64.

def _format_error(path, offset: int, why: str) -> FormatError:
    return FormatError(f"{path}: byte {offset}: {why}")


def save_params(params: MlpParams | ParamSnapshot, path) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(params.layers)))
        for W, _ in params.layers:
            f.write(struct.pack("<QQ", W.shape[0], W.shape[1]))
        for W, b in params.layers:
            f.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_params(path, split_index: int, dropout_rate: float = 0.0) -> MlpParams:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8:
        raise _format_error(path, 0, "missing layer count")
    (n_layers,) = struct.unpack_from("<Q", raw, 0)
    offset = 8
    shapes = []
    for _ in range(n_layers):
        if offset + 16 > len(raw):
            raise _format_error(path, offset, "truncated shape header")
        rows, cols = struct.unpack_from("<QQ", raw, offset)
        shapes.append((rows, cols))
        offset += 16
    layers = []
    for rows, cols in shapes:
        need = (rows * cols + cols) * 8
        if offset + need > len(raw):
            raise _format_error(path, offset, "truncated weight data")
        W = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols)
        offset += rows * cols * 8
        b = np.frombuffer(raw, dtype="<f8", count=cols, offset=offset)
        offset += cols * 8
        layers.append((W.astype(np.float64), b.astype(np.float64)))
    if offset != len(raw):
        raise _format_error(path, offset, f"{len(raw) - offset} trailing bytes")
    return MlpParams(layers, split_index, dropout_rate)
