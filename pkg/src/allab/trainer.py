"""SGD training of the joint objective with trajectory checkpointing.

Per step the loss is

    L = CE(batch from the labeled set) + mmd_weight * MMD^2(Z_L, Z_P)

where Z_L are the features of the labeled batch and Z_P the features of an
independent batch drawn from the whole pool (labeled + unlabeled).  The
learning rate is constant for the first half of the epochs, then cycles:
the second half is split into ``n_checkpoints`` near-equal runs of steps,
the rate decays linearly from ``base_lr`` to ``base_lr * lr_floor_ratio``
within each run and resets at the next, and parameters are snapshotted at
the last step of every run.

RNG-consumption contract (what a bit-identical reference must reproduce):
per step, first the labeled-batch indices are drawn, then the pool-batch
indices, each as one ``choice`` call from the "batch" stream; the pool batch
is drawn even when ``mmd_weight`` is 0.  Dropout masks, when the model has a
positive rate, come from the separate "dropout" stream, one draw per hidden
layer per forward pass, labeled batch first.  Parameter initialization uses
the "init" stream.  All three streams derive from ``TrainConfig.seed``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import PoolError, TrainingDiverged
from .layers import softmax_cross_entropy
from .mmd import KernelSpec, median_heuristic, mmd2_biased_with_grad
from .model import (
    MlpParams,
    ModelSpec,
    ParamSnapshot,
    backward,
    forward,
    init_mlp,
    snapshot,
)
from .seeding import derive_rng

__all__ = [
    "TrainConfig",
    "CheckpointSet",
    "EpochStats",
    "cyclic_lr",
    "cycle_bounds",
    "snapshot_steps",
    "steps_per_epoch",
    "sgd_step",
    "train_round",
    "write_history_csv",
]


@dataclass(frozen=True)
class TrainConfig:
    """All knobs of one training round."""

    epochs: int = 100
    base_lr: float = 1e-3
    batch_size: int = 64
    mmd_weight: float = 0.1
    weight_decay: float = 1e-4
    n_checkpoints: int = 5
    lr_floor_ratio: float = 0.1
    kernel: str | tuple[float, ...] = "median"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 2 or self.epochs % 2 != 0:
            raise ValueError(f"epochs must be even and >= 2, got {self.epochs}")
        if self.epochs < 2 * self.n_checkpoints:
            raise ValueError(
                f"epochs ({self.epochs}) must be >= 2 * n_checkpoints "
                f"({self.n_checkpoints}) so each cycle spans a full epoch"
            )
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        if self.mmd_weight < 0:
            raise ValueError(f"mmd_weight must be >= 0, got {self.mmd_weight}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.n_checkpoints < 1:
            raise ValueError(f"n_checkpoints must be >= 1, got {self.n_checkpoints}")
        if not 0.0 < self.lr_floor_ratio <= 1.0:
            raise ValueError(f"lr_floor_ratio must be in (0, 1], got {self.lr_floor_ratio}")
        if isinstance(self.kernel, str):
            if self.kernel not in ("median", "median3"):
                raise ValueError(f"kernel must be 'median', 'median3' or a bandwidth list")
        else:
            object.__setattr__(self, "kernel", tuple(float(s) for s in self.kernel))
            KernelSpec(self.kernel)  # validates positivity


@dataclass(frozen=True)
class CheckpointSet:
    """Ordered parameter snapshots harvested along one training trajectory."""

    snapshots: tuple[ParamSnapshot, ...]

    def __post_init__(self):
        if len(self.snapshots) == 0:
            raise ValueError("CheckpointSet must be nonempty")
        shapes = [tuple(W.shape for W, _ in s.layers) for s in self.snapshots]
        if any(sh != shapes[0] for sh in shapes):
            raise ValueError("snapshots are not structurally identical")

    def __len__(self) -> int:
        return len(self.snapshots)


@dataclass
class EpochStats:
    epoch: int
    mean_ce: float
    mean_mmd2: float
    lr: float  # rate at the epoch's final step


def steps_per_epoch(n_labeled: int, batch_size: int) -> int:
    """ceil(|labeled| / batch_size), at least 1."""
    return max(1, -(-n_labeled // batch_size))


def cycle_bounds(epochs: int, spe: int, n_checkpoints: int) -> list[tuple[int, int]]:
    """Half-open [start, end) step ranges of the second-half learning-rate cycles.

    The second half of training (steps epochs/2 * spe onward) is split into
    n_checkpoints contiguous runs whose lengths differ by at most one, the
    longer runs first.
    """
    half = (epochs // 2) * spe
    total = epochs * spe
    span = total - half
    base, extra = divmod(span, n_checkpoints)
    bounds = []
    start = half
    for i in range(n_checkpoints):
        length = base + (1 if i < extra else 0)
        bounds.append((start, start + length))
        start += length
    return bounds


def snapshot_steps(epochs: int, spe: int, n_checkpoints: int) -> list[int]:
    """Steps (0-based) after whose update a checkpoint is saved: each cycle's last step."""
    return [end - 1 for _, end in cycle_bounds(epochs, spe, n_checkpoints)]


def cyclic_lr(step: int, spe: int, config: TrainConfig) -> float:
    """Learning rate at a given 0-based global step.

    Constant ``base_lr`` through the first half of the epochs; in the second
    half, linear decay from ``base_lr`` to ``base_lr * lr_floor_ratio`` within
    each cycle, resetting at each cycle start.
    """
    half = (config.epochs // 2) * spe
    if step < half:
        return config.base_lr
    floor = config.base_lr * config.lr_floor_ratio
    for start, end in cycle_bounds(config.epochs, spe, config.n_checkpoints):
        if start <= step < end:
            length = end - start
            if length == 1:
                return floor
            frac = (step - start) / (length - 1)
            return config.base_lr + (floor - config.base_lr) * frac
    raise ValueError(f"step {step} beyond the schedule ({config.epochs} epochs x {spe} steps)")


def sgd_step(
    params: MlpParams,
    grads: list[tuple[np.ndarray, np.ndarray]],
    lr: float,
    weight_decay: float,
) -> MlpParams:
    """In-place update theta <- theta - lr * (g + weight_decay * theta)."""
    for (W, b), (dW, db) in zip(params.layers, grads):
        if dW.shape != W.shape or db.shape != b.shape:
            raise ValueError(f"gradient shape {dW.shape}/{db.shape} does not match parameters")
        if not (np.isfinite(dW).all() and np.isfinite(db).all()):
            raise TrainingDiverged("non-finite gradient in sgd_step")
        W -= lr * (dW + weight_decay * W)
        b -= lr * (db + weight_decay * b)
    return params


def _draw(rng: np.random.Generator, indices: np.ndarray, batch_size: int) -> np.ndarray:
    replace = len(indices) < batch_size
    return rng.choice(indices, size=batch_size, replace=replace)


def _resolve_kernel(config: TrainConfig, first_pool_features: np.ndarray) -> KernelSpec:
    if isinstance(config.kernel, tuple):
        return KernelSpec(config.kernel)
    sigma = median_heuristic(first_pool_features)
    if config.kernel == "median3":
        return KernelSpec.around(sigma)
    return KernelSpec.single(sigma)


def train_round(
    pool,
    model_spec: ModelSpec,
    config: TrainConfig,
    history_csv=None,
) -> tuple[MlpParams, CheckpointSet, list[EpochStats]]:
    """Train a freshly initialized model on the pool's labeled set.

    Returns the final parameters, the checkpoint trajectory (exactly
    ``n_checkpoints`` snapshots at the documented cycle-end steps), and
    per-epoch mean CE / mean MMD^2 / learning-rate history.  The kernel
    bandwidth, unless given explicitly, is the median heuristic on the
    features of the first pool batch, frozen for the whole round.

    ``history_csv``: optional path; epoch rows are appended as they complete.
    """
    labeled = np.asarray(pool.labeled_idx)
    if len(labeled) == 0:
        raise PoolError("cannot train with an empty labeled set")
    both = np.sort(np.concatenate([labeled, np.asarray(pool.unlabeled_idx)]))

    rng_init = derive_rng(config.seed, "init")
    rng_batch = derive_rng(config.seed, "batch")
    rng_drop = derive_rng(config.seed, "dropout")
    params = init_mlp(
        model_spec.layer_sizes, model_spec.split_index, model_spec.dropout_rate, rng_init
    )

    spe = steps_per_epoch(len(labeled), config.batch_size)
    total_steps = config.epochs * spe
    snap_at = set(snapshot_steps(config.epochs, spe, config.n_checkpoints))

    kernel: KernelSpec | None = None
    if isinstance(config.kernel, tuple):
        kernel = KernelSpec(config.kernel)

    features, labels = pool.features, pool.labels
    snaps: list[ParamSnapshot] = []
    history: list[EpochStats] = []
    writer = _HistoryWriter(history_csv)
    ce_sum = mmd_sum = 0.0
    last_lr = config.base_lr

    for step in range(total_steps):
        lr = cyclic_lr(step, spe, config)
        idx_l = _draw(rng_batch, labeled, config.batch_size)
        idx_p = _draw(rng_batch, both, config.batch_size)

        Z_l, logits, cache_l = forward(params, features[idx_l], train_mode=True, rng=rng_drop)
        Z_p, _, cache_p = forward(params, features[idx_p], train_mode=True, rng=rng_drop)
        if kernel is None:
            kernel = _resolve_kernel(config, Z_p)

        ce, _, dlogits = softmax_cross_entropy(logits, labels[idx_l])
        m2, dZ_l, dZ_p = mmd2_biased_with_grad(Z_l, Z_p, kernel)
        if not np.isfinite(ce + config.mmd_weight * m2):
            raise TrainingDiverged(f"non-finite loss at step {step}")

        if config.mmd_weight > 0:
            grads = backward(params, cache_l, dlogits, dZ=config.mmd_weight * dZ_l)
            grads_p = backward(
                params, cache_p, np.zeros_like(logits), dZ=config.mmd_weight * dZ_p
            )
            grads = [(dW + dW2, db + db2) for (dW, db), (dW2, db2) in zip(grads, grads_p)]
        else:
            grads = backward(params, cache_l, dlogits)

        try:
            params = sgd_step(params, grads, lr, config.weight_decay)
        except TrainingDiverged:
            raise TrainingDiverged(f"non-finite gradient at step {step}") from None
        if step in snap_at:
            snaps.append(snapshot(params))

        ce_sum += ce
        mmd_sum += m2
        last_lr = lr
        if (step + 1) % spe == 0:
            epoch = step // spe
            stats = EpochStats(epoch, ce_sum / spe, mmd_sum / spe, last_lr)
            history.append(stats)
            writer.write(stats)
            ce_sum = mmd_sum = 0.0

    writer.close()
    return params, CheckpointSet(tuple(snaps)), history


class _HistoryWriter:
    """Streams per-epoch rows to a CSV as they complete; no-op without a path."""

    def __init__(self, path):
        self._file = None
        self._writer = None
        if path is not None:
            self._file = open(path, "w", newline="")
            self._writer = csv.writer(self._file)
            self._writer.writerow(["epoch", "mean_ce", "mean_mmd2", "lr"])

    def write(self, stats: EpochStats) -> None:
        if self._writer is not None:
            self._writer.writerow(
                [stats.epoch, repr(stats.mean_ce), repr(stats.mean_mmd2), repr(stats.lr)]
            )
            self._file.flush()

    def close(self) -> None:
        if self._file is not None:
            self._file.close()


def write_history_csv(history: list[EpochStats], path) -> None:
    """Write a completed history to CSV in one go."""
    w = _HistoryWriter(path)
    for stats in history:
        w.write(stats)
    w.close()
