"""Label-free curiosity scores, top-k informative selection, novelty detection.

A sample's curiosity score is its minimum Euclidean distance to every
centroid the store holds, regardless of class; an empty store scores +inf
(everything is maximally curious).  A sample is Unknown when its score
exceeds the novelty threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import MemoryStore
from .errors import ConfigError, EmptyModelError


@dataclass(frozen=True)
class NoveltyConfig:
    """Distance threshold separating Known from Unknown; 0 and +inf are legal limits."""

    unknown_threshold: float

    def __post_init__(self):
        t = self.unknown_threshold
        if math.isnan(t) or t < 0:
            raise ConfigError("unknown_threshold must be >= 0")


@dataclass(frozen=True)
class SelectionResult:
    chosen_indices: np.ndarray  # pool positions, score-descending
    scores: np.ndarray  # parallel to chosen_indices, non-increasing


@dataclass(frozen=True)
class NoveltyResult:
    is_known: bool
    class_id: int | None
    distance: float


def score(store: MemoryStore, x) -> float:
    """Min distance from x to all centroids across all classes; +inf if none."""
    try:
        _, _, distance = store.nearest_centroid(x)
    except EmptyModelError:
        store.validate_vector(x)  # still validate dimension/finiteness
        return math.inf
    return distance


def score_pool(store: MemoryStore, pool) -> np.ndarray:
    pool = np.asarray(pool, dtype=np.float64)
    return np.array([score(store, pool[i]) for i in range(pool.shape[0])])


def select_informative(store: MemoryStore, pool, budget: int) -> SelectionResult:
    """Top-min(budget, |pool|) pool indices by descending score, ties to lower index."""
    if budget < 0:
        raise ConfigError("selection budget must be >= 0")
    pool = np.asarray(pool, dtype=np.float64)
    n = pool.shape[0]
    take = min(budget, n)
    if take == 0:
        return SelectionResult(np.empty(0, dtype=np.int64), np.empty(0))
    scores = score_pool(store, pool)
    order = np.argsort(-scores, kind="stable")[:take]
    return SelectionResult(order.astype(np.int64), scores[order])


def detect_unknown(store: MemoryStore, x, config: NoveltyConfig) -> NoveltyResult:
    """Unknown iff the curiosity score exceeds the threshold (empty store: always)."""
    try:
        class_id, _, distance = store.nearest_centroid(x)
    except EmptyModelError:
        store.validate_vector(x)
        return NoveltyResult(False, None, math.inf)
    if distance > config.unknown_threshold:
        return NoveltyResult(False, None, distance)
    return NoveltyResult(True, class_id, distance)
