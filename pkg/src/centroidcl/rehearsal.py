"""Pseudo-exemplar generation: sample each cluster's Gaussian to rebuild old classes.

The per-class exemplar quota is divided across clusters proportionally to
their sample counts (largest-remainder rounding; every cluster gets at least
one exemplar when the quota allows).  Exemplars are drawn from
N(centroid, covariance + epsilon*I).  Each class uses its own sub-seeded
stream, so adding or removing one class never changes another's exemplars.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClassModel, MemoryStore
from .errors import ConfigError, EmptyModelError
from .rng import Xoshiro256StarStar, subseed


@dataclass(frozen=True)
class RehearsalConfig:
    exemplars_per_class: int = 40
    jitter_epsilon: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.exemplars_per_class < 1:
            raise ConfigError("exemplars_per_class must be >= 1")
        if not self.jitter_epsilon >= 0:
            raise ConfigError("jitter_epsilon must be >= 0")


@dataclass(frozen=True)
class PseudoExemplar:
    features: np.ndarray
    label: int
    source_cluster: tuple[int, int]  # (class_id, cluster_index)


def allocate_quota(counts: list[int], quota: int) -> list[int]:
    """Split quota across clusters proportionally to counts.

    Largest-remainder rounding, remainder ties to the lower index.  When
    quota >= len(counts), allocations are then floored at 1 by taking from
    the largest allocation.
    """
    k = len(counts)
    total = sum(counts)
    exact = [quota * c / total for c in counts]
    base = [int(e) for e in exact]
    leftover = quota - sum(base)
    by_remainder = sorted(range(k), key=lambda i: (-(exact[i] - base[i]), i))
    for i in by_remainder[:leftover]:
        base[i] += 1
    if quota >= k:
        for i in range(k):
            while base[i] == 0:
                donor = max(range(k), key=lambda j: (base[j], -j))
                base[donor] -= 1
                base[i] += 1
    return base


def _sample_cluster(cluster, count: int, epsilon: float, rng: Xoshiro256StarStar) -> np.ndarray:
    d = cluster.centroid.shape[0]
    z = rng.normals(count * d).reshape(count, d)
    if cluster.scatter.ndim == 2:
        cov = cluster.covariance()
        eigvals, eigvecs = np.linalg.eigh((cov + cov.T) / 2.0)
        eigvals = np.clip(eigvals, 0.0, None) + epsilon  # clamp PSD drift before the floor
        transform = eigvecs * np.sqrt(eigvals)
        return cluster.centroid + z @ transform.T
    variance = cluster.covariance() + epsilon
    return cluster.centroid + z * np.sqrt(variance)


def generate_for_class(
    model: ClassModel, config: RehearsalConfig, rng: Xoshiro256StarStar
) -> list[PseudoExemplar]:
    """Exactly exemplars_per_class pseudo-exemplars for one class."""
    if not model.clusters:
        raise EmptyModelError(f"class {model.class_id} has no clusters")
    counts = [c.count for c in model.clusters]
    allocation = allocate_quota(counts, config.exemplars_per_class)
    out: list[PseudoExemplar] = []
    for idx, (cluster, quota) in enumerate(zip(model.clusters, allocation)):
        if quota == 0:
            continue
        samples = _sample_cluster(cluster, quota, config.jitter_epsilon, rng)
        for row in samples:
            out.append(PseudoExemplar(row, model.class_id, (model.class_id, idx)))
    return out


def generate_rehearsal_set(
    store: MemoryStore, exclude_classes, config: RehearsalConfig
) -> list[PseudoExemplar]:
    """Pseudo-exemplars for every stored class not excluded, ascending class id.

    Classes whose real features are at hand (the current increment) are the
    ones to exclude.  Deterministic for a fixed (store, config): each class
    draws from its own stream seeded by (config.seed, class id).
    """
    exclude = {int(c) for c in exclude_classes}
    out: list[PseudoExemplar] = []
    for cid in store.class_ids:
        if cid in exclude:
            continue
        rng = Xoshiro256StarStar(subseed(config.seed, "class", cid))
        out.extend(generate_for_class(store.models[cid], config, rng))
    return out


def stack_exemplars(exemplars: list[PseudoExemplar]) -> tuple[np.ndarray, np.ndarray]:
    """(features, labels) arrays from an exemplar list; empty arrays when none."""
    if not exemplars:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    features = np.stack([e.features for e in exemplars])
    labels = np.array([e.label for e in exemplars], dtype=np.int64)
    return features, labels
