"""Scoring and selection of unlabeled examples.

Methods:
    mpts     - entropy of the trajectory-averaged prediction (the package's
               headline strategy)
    random   - uniform sample without replacement
    entropy  - entropy of the final single model's prediction
    bald     - mutual information between prediction and dropout masks,
               estimated from T stochastic forward passes
    coreset  - greedy k-center in the final model's feature space

All entropies are in nats.  Selection is pure top-k on the scores; ties break
toward the lower pool index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PoolError
from .model import MlpParams, forward, predict_proba, restore
from .trainer import CheckpointSet

__all__ = [
    "AcquisitionResult",
    "avg_predict",
    "entropy_scores",
    "select_top_k",
    "mpts_acquire",
    "random_acquire",
    "entropy_acquire",
    "bald_acquire",
    "coreset_acquire",
    "acquire",
    "METHODS",
]


@dataclass
class AcquisitionResult:
    """Outcome of one acquisition round.

    ``selected`` holds pool indices in pick order.  ``scores`` aligns with the
    pool's unlabeled_idx for score-ranked methods, with ``selected`` (one
    max-min distance per pick) for coreset, and is empty for random.
    """

    method: str
    scores: np.ndarray
    selected: np.ndarray


def avg_predict(trajectory: CheckpointSet, X: np.ndarray) -> np.ndarray:
    """Mean class probabilities over every checkpoint in the trajectory."""
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    acc = None
    for snap in trajectory.snapshots:
        P = predict_proba(restore(snap), X)
        acc = P if acc is None else acc + P
    return acc / len(trajectory)


def entropy_scores(P: np.ndarray) -> np.ndarray:
    """Shannon entropy of each probability row, in nats; 0*ln 0 counts as 0."""
    P = np.asarray(P, dtype=np.float64)
    sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-6)
    if bad.size:
        raise ValueError(f"row {bad[0]} is not a probability vector (sums to {sums[bad[0]]!r})")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return -terms.sum(axis=1)


def select_top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k largest scores, descending score then ascending index.

    k larger than the score count is clamped.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[: min(k, len(scores))]


def _require_unlabeled(pool) -> np.ndarray:
    unlabeled = np.asarray(pool.unlabeled_idx)
    if len(unlabeled) == 0:
        raise PoolError("unlabeled pool is empty")
    return unlabeled


def mpts_acquire(trajectory: CheckpointSet, pool, budget: int) -> AcquisitionResult:
    """Top-budget by entropy of the checkpoint-averaged prediction."""
    unlabeled = _require_unlabeled(pool)
    scores = entropy_scores(avg_predict(trajectory, pool.features[unlabeled]))
    picks = select_top_k(scores, budget)
    return AcquisitionResult("mpts", scores, unlabeled[picks])


def entropy_acquire(final: MlpParams, pool, budget: int) -> AcquisitionResult:
    """Top-budget by predictive entropy of the single final model."""
    unlabeled = _require_unlabeled(pool)
    scores = entropy_scores(predict_proba(final, pool.features[unlabeled]))
    picks = select_top_k(scores, budget)
    return AcquisitionResult("entropy", scores, unlabeled[picks])


def random_acquire(pool, budget: int, rng: np.random.Generator) -> AcquisitionResult:
    """Uniform sample without replacement from the unlabeled pool."""
    unlabeled = _require_unlabeled(pool)
    k = min(budget, len(unlabeled))
    picks = rng.choice(unlabeled, size=k, replace=False)
    return AcquisitionResult("random", np.empty(0), picks)


def bald_acquire(
    final: MlpParams,
    pool,
    budget: int,
    passes: int,
    rng: np.random.Generator,
) -> AcquisitionResult:
    """Mutual-information scores from stochastic dropout passes.

    score = H(mean of the per-pass probabilities) - mean per-pass entropy,
    which is nonnegative (Jensen) up to float noise.
    """
    if final.dropout_rate <= 0:
        raise ValueError("bald_acquire requires a model with dropout_rate > 0")
    if passes < 2:
        raise ValueError(f"bald_acquire needs at least 2 passes, got {passes}")
    unlabeled = _require_unlabeled(pool)
    X = pool.features[unlabeled]
    stack = np.empty((passes, len(unlabeled), final.layers[-1][0].shape[1]))
    for t in range(passes):
        _, logits, _ = forward(final, X, train_mode=True, rng=rng)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        stack[t] = e / e.sum(axis=1, keepdims=True)
    scores = bald_scores_from_probs(stack)
    picks = select_top_k(scores, budget)
    return AcquisitionResult("bald", scores, unlabeled[picks])


def bald_scores_from_probs(stack: np.ndarray) -> np.ndarray:
    """Mutual information from a (passes, n, C) probability stack."""
    mean_entropy = np.stack([entropy_scores(stack[t]) for t in range(stack.shape[0])]).mean(axis=0)
    return entropy_scores(stack.mean(axis=0)) - mean_entropy


def coreset_acquire(final: MlpParams, pool, budget: int) -> AcquisitionResult:
    """Greedy k-center in the final model's feature space.

    Each pick maximizes the minimum Euclidean distance to the labeled points
    plus the picks so far; ties break toward the lower pool index.  The score
    recorded for each pick is that max-min distance.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    unlabeled = _require_unlabeled(pool)
    labeled = np.asarray(pool.labeled_idx)
    Z_u, _, _ = forward(final, pool.features[unlabeled])
    if len(labeled):
        Z_l, _, _ = forward(final, pool.features[labeled])
        d2 = (
            (Z_u * Z_u).sum(axis=1)[:, None]
            + (Z_l * Z_l).sum(axis=1)[None, :]
            - 2.0 * Z_u @ Z_l.T
        )
        min_dist = np.sqrt(np.maximum(d2.min(axis=1), 0.0))
    else:
        min_dist = np.full(len(unlabeled), np.inf)

    k = min(budget, len(unlabeled))
    picked_pos: list[int] = []
    pick_dists: list[float] = []
    available = np.ones(len(unlabeled), dtype=bool)
    for _ in range(k):
        masked = np.where(available, min_dist, -np.inf)
        pos = int(np.argmax(masked))  # first max = lowest pool index on ties
        picked_pos.append(pos)
        pick_dists.append(float(min_dist[pos]))
        available[pos] = False
        gap = Z_u - Z_u[pos]
        dist_new = np.sqrt((gap * gap).sum(axis=1))
        min_dist = np.minimum(min_dist, dist_new)
    return AcquisitionResult("coreset", np.array(pick_dists), unlabeled[np.array(picked_pos)])


METHODS = ("mpts", "random", "entropy", "bald", "coreset")


def acquire(
    method: str,
    pool,
    budget: int,
    final: MlpParams,
    trajectory: CheckpointSet,
    rng: np.random.Generator,
    bald_passes: int = 20,
) -> AcquisitionResult:
    """Dispatch one acquisition round by method name."""
    if method == "mpts":
        return mpts_acquire(trajectory, pool, budget)
    if method == "random":
        return random_acquire(pool, budget, rng)
    if method == "entropy":
        return entropy_acquire(final, pool, budget)
    if method == "bald":
        return bald_acquire(final, pool, budget, bald_passes, rng)
    if method == "coreset":
        return coreset_acquire(final, pool, budget)
    raise ValueError(f"unknown acquisition method: {method!r}")
