"""Pool state: the dataset plus the disjoint labeled/unlabeled/test partition."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import PoolError
from .model import MlpParams, predict_proba
from .trainer import CheckpointSet

__all__ = ["PoolState", "init_pool", "label_points", "evaluate", "check_partition"]


@dataclass
class PoolState:
    """Features and ground-truth labels with the current index partition.

    labeled_idx records acquisition order (earliest first); unlabeled_idx and
    test_idx stay in ascending order.  Labels of unlabeled points stand in for
    the annotation oracle and are only read when a point is moved to the
    labeled set or the test set is scored.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray
    test_idx: np.ndarray


def init_pool(
    dataset,
    initial_count: int,
    test_fraction: float,
    rng: np.random.Generator,
    pool_size: int | None = None,
    restrict_classes=None,
) -> PoolState:
    """Build the starting partition for one experiment repeat.

    The test set is the dataset's designated split when it has one, otherwise
    a seeded holdout of ``test_fraction``.  The remaining pool is optionally
    subsampled to ``pool_size``, then ``initial_count`` points are drawn
    uniformly (unstratified) as the initial labeled set.  ``restrict_classes``
    limits that initial draw to the given class ids (biased-start mode).
    """
    n = dataset.features.shape[0]
    all_idx = np.arange(n)
    if dataset.designated_test_idx is not None:
        test_idx = np.sort(np.asarray(dataset.designated_test_idx))
        pool_idx = np.setdiff1d(all_idx, test_idx)
    else:
        n_test = int(round(n * test_fraction))
        if not 0 < n_test < n:
            raise ValueError(f"test_fraction {test_fraction} leaves no pool or no test set")
        test_idx = np.sort(rng.choice(all_idx, size=n_test, replace=False))
        pool_idx = np.setdiff1d(all_idx, test_idx)

    if pool_size is not None and pool_size < len(pool_idx):
        pool_idx = np.sort(rng.choice(pool_idx, size=pool_size, replace=False))

    candidates = pool_idx
    if restrict_classes is not None:
        allowed = set(int(c) for c in restrict_classes)
        candidates = pool_idx[np.isin(dataset.labels[pool_idx], sorted(allowed))]
    if initial_count > len(candidates):
        raise ValueError(
            f"initial_count {initial_count} exceeds the {len(candidates)} eligible pool points"
        )
    labeled = np.sort(rng.choice(candidates, size=initial_count, replace=False))
    unlabeled = np.setdiff1d(pool_idx, labeled)
    return PoolState(
        features=dataset.features,
        labels=dataset.labels,
        class_count=dataset.class_count,
        labeled_idx=labeled,
        unlabeled_idx=unlabeled,
        test_idx=test_idx,
    )


def label_points(pool: PoolState, indices) -> PoolState:
    """Move the given indices from the unlabeled to the labeled set.

    Appends in the given order, so labeled_idx records acquisition history.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) == 0:
        return pool
    if len(np.unique(indices)) != len(indices):
        raise PoolError("duplicate indices in labeling request")
    unlabeled = set(pool.unlabeled_idx.tolist())
    for i in indices.tolist():
        if i not in unlabeled:
            raise PoolError(f"index {i} is not unlabeled")
    keep = ~np.isin(pool.unlabeled_idx, indices)
    return replace(
        pool,
        labeled_idx=np.concatenate([pool.labeled_idx, indices]),
        unlabeled_idx=pool.unlabeled_idx[keep],
    )


def evaluate(predictor, pool: PoolState) -> float:
    """Test-set accuracy of a single model or a checkpoint trajectory.

    Argmax ties resolve to the lowest class index.
    """
    if len(pool.test_idx) == 0:
        raise PoolError("empty test set")
    X = pool.features[pool.test_idx]
    if isinstance(predictor, CheckpointSet):
        from .acquisition import avg_predict

        P = avg_predict(predictor, X)
    elif isinstance(predictor, MlpParams):
        P = predict_proba(predictor, X)
    else:
        raise TypeError(f"cannot evaluate a {type(predictor).__name__}")
    pred = P.argmax(axis=1)
    return float((pred == pool.labels[pool.test_idx]).mean())


def check_partition(pool: PoolState) -> None:
    """Assert the partition invariants; used by tests after every round.

    The three index sets must be disjoint and in bounds.  When their sizes sum
    to the dataset size (no pool subsampling) they must also cover it exactly.
    """
    n = pool.features.shape[0]
    parts = [pool.labeled_idx, pool.unlabeled_idx, pool.test_idx]
    combined = np.concatenate(parts)
    if len(np.unique(combined)) != len(combined):
        raise AssertionError("index sets overlap")
    if len(combined) and (combined.min() < 0 or combined.max() >= n):
        raise AssertionError("index out of bounds")
    if len(combined) == n and not np.array_equal(np.sort(combined), np.arange(n)):
        raise AssertionError("index sets do not cover the dataset")
