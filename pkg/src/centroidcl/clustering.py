"""Per-class incremental clustering with running centroid and scatter statistics.

Each class is modeled as an ordered list of clusters.  A new sample either
*integrates* into the closest cluster of its class (when the Euclidean
distance is strictly below the threshold), updating that cluster's running
mean and scatter in a single pass, or *separates* into a fresh cluster whose
centroid is the sample itself and whose scatter is exactly zero.

Scatter is the sum of outer products of deviations (M2); population
covariance is scatter / count, so a count-1 cluster has a zero covariance
with no special casing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, EmptyModelError
from .features import IncrementBatch

_COVARIANCE_MODES = ("diagonal", "full")


@dataclass(frozen=True)
class AggVarConfig:
    """Clustering knobs: the integrate/separate distance threshold and scatter shape."""

    distance_threshold: float
    covariance_mode: str = "diagonal"

    def __post_init__(self):
        d = self.distance_threshold
        if not isinstance(d, (int, float)) or math.isnan(d) or d < 0:
            raise ConfigError("distance_threshold must be a non-negative real (inf allowed)")
        if self.covariance_mode not in _COVARIANCE_MODES:
            raise ConfigError(f"covariance_mode must be one of {_COVARIANCE_MODES}")


class ClusterAction(enum.Enum):
    INTEGRATED = "integrated"
    SEPARATED = "separated"


@dataclass(frozen=True)
class ClusterEvent:
    action: ClusterAction
    class_id: int
    cluster_index: int


class ConceptCluster:
    """Running mean, scatter, and count of the samples integrated so far."""

    __slots__ = ("centroid", "scatter", "count")

    def __init__(self, x: np.ndarray, covariance_mode: str):
        d = x.shape[0]
        self.centroid = x.astype(np.float64, copy=True)
        if covariance_mode == "full":
            self.scatter = np.zeros((d, d), dtype=np.float64)
        else:
            self.scatter = np.zeros(d, dtype=np.float64)
        self.count = 1

    def update(self, x: np.ndarray) -> None:
        """Single-pass mean/scatter update with the new sample."""
        delta = x - self.centroid
        self.centroid = self.centroid + delta / (self.count + 1)
        residual = x - self.centroid
        if self.scatter.ndim == 2:
            self.scatter = self.scatter + np.outer(delta, residual)
        else:
            self.scatter = self.scatter + delta * residual
        self.count += 1

    def covariance(self) -> np.ndarray:
        return self.scatter / self.count

    def distance_to(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(x - self.centroid))


@dataclass
class ClassModel:
    """All clusters of one class, in creation order."""

    class_id: int
    clusters: list[ConceptCluster] = field(default_factory=list)

    @property
    def total_count(self) -> int:
        return sum(c.count for c in self.clusters)

    def centroid_matrix(self) -> np.ndarray:
        return np.stack([c.centroid for c in self.clusters])

    def nearest(self, x: np.ndarray) -> tuple[int, float]:
        """(cluster index, distance) of the closest centroid; ties pick the lowest index."""
        if not self.clusters:
            raise EmptyModelError(f"class {self.class_id} has no clusters")
        distances = np.linalg.norm(self.centroid_matrix() - x, axis=1)
        idx = int(np.argmin(distances))
        return idx, float(distances[idx])


@dataclass(frozen=True)
class IncrementSummary:
    clusters_created: int
    samples_integrated: int
    per_class_counts: dict[int, int]


@dataclass(frozen=True)
class MemoryFootprint:
    total_bytes: int
    images_seen: int
    raw_image_bytes: int | None = None
    ratio: float | None = None


class MemoryStore:
    """The learner's entire persistent knowledge: per-class cluster statistics.

    Mutation (learn_increment / process_sample) is single-writer; queries are
    read-only and safe to interleave between mutations.
    """

    def __init__(self, dim: int, config: AggVarConfig):
        if dim < 1:
            raise ConfigError("dim must be >= 1")
        self.dim = dim
        self.config = config
        self.models: dict[int, ClassModel] = {}

    def validate_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DataError(f"expected vector of length {self.dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("non-finite feature value")
        return x

    @property
    def class_ids(self) -> list[int]:
        return sorted(self.models)

    @property
    def n_clusters(self) -> int:
        return sum(len(m.clusters) for m in self.models.values())

    def total_samples(self) -> int:
        return sum(m.total_count for m in self.models.values())

    def process_sample(self, x, label: int) -> ClusterEvent:
        """Integrate x into the closest cluster of its class, or separate a new one."""
        x = self.validate_vector(x)
        label = int(label)
        if label < 0:
            raise DataError(f"negative class label {label}")
        model = self.models.get(label)
        if model is None:
            model = ClassModel(label)
            self.models[label] = model
        if model.clusters:
            idx, distance = model.nearest(x)
            if distance < self.config.distance_threshold:
                model.clusters[idx].update(x)
                return ClusterEvent(ClusterAction.INTEGRATED, label, idx)
        model.clusters.append(ConceptCluster(x, self.config.covariance_mode))
        return ClusterEvent(ClusterAction.SEPARATED, label, len(model.clusters) - 1)

    def learn_increment(self, batch: IncrementBatch) -> IncrementSummary:
        """Process every sample of the batch in order."""
        created = 0
        integrated = 0
        per_class: dict[int, int] = {}
        features = np.asarray(batch.features, dtype=np.float64)
        for i in range(len(batch)):
            event = self.process_sample(features[i], int(batch.labels[i]))
            if event.action is ClusterAction.SEPARATED:
                created += 1
            else:
                integrated += 1
            per_class[event.class_id] = per_class.get(event.class_id, 0) + 1
        return IncrementSummary(created, integrated, per_class)

    def nearest_centroid(self, x, class_filter=None) -> tuple[int, int, float]:
        """Globally closest centroid as (class_id, cluster_index, distance).

        Ties resolve to the lowest (class_id, cluster_index) pair.
        """
        x = self.validate_vector(x)
        best: tuple[int, int, float] | None = None
        for cid in self.class_ids:
            if class_filter is not None and cid not in class_filter:
                continue
            model = self.models[cid]
            if not model.clusters:
                continue
            idx, distance = model.nearest(x)
            if best is None or distance < best[2]:
                best = (cid, idx, distance)
        if best is None:
            raise EmptyModelError("no clusters match the query")
        return best

    def memory_footprint(self, image_bytes: int | None = None) -> MemoryFootprint:
        """Bytes held by the store, optionally compared to storing raw images.

        Each cluster costs (d + scatter size + 1) float64 slots.
        """
        d = self.dim
        scatter_size = d * d if self.config.covariance_mode == "full" else d
        per_cluster = (d + scatter_size + 1) * 8
        total = self.n_clusters * per_cluster
        images = self.total_samples()
        if image_bytes is None:
            return MemoryFootprint(total, images)
        raw = images * image_bytes
        ratio = total / raw if raw > 0 else None
        return MemoryFootprint(total, images, raw, ratio)
