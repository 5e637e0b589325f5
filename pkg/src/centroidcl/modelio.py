"""Versioned binary persistence for the memory store and classifier.

CBM1 layout (little-endian, float64 throughout):

    magic "CBM1" | version u32 = 1 | dim u32 | cov_mode u8 (0 diag, 1 full)
    | distance_threshold f64 | n_classes u32
    | per class (ascending id):
        class_id u32 | n_clusters u32
        | per cluster: count u64 | centroid d*f64 | scatter (d or d*d)*f64
    | has_classifier u8
    | if 1: C u32 | class_ids C*u32 | normalize u8 | weights C*d*f64 | bias C*f64

The round trip is lossless: a loaded model produces bit-identical
predictions, scores, and rehearsal sets.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .classifier import LinearClassifier
from .clustering import AggVarConfig, ClassModel, ConceptCluster, MemoryStore
from .errors import ConfigError, FormatError, IoError

MAGIC = b"CBM1"
VERSION = 1


def save_model(store: MemoryStore, classifier: LinearClassifier | None, path) -> None:
    full = store.config.covariance_mode == "full"
    parts = [
        MAGIC,
        struct.pack("<II", VERSION, store.dim),
        struct.pack("<B", 1 if full else 0),
        struct.pack("<d", store.config.distance_threshold),
        struct.pack("<I", len(store.models)),
    ]
    for cid in store.class_ids:
        model = store.models[cid]
        parts.append(struct.pack("<II", cid, len(model.clusters)))
        for cluster in model.clusters:
            parts.append(struct.pack("<Q", cluster.count))
            parts.append(cluster.centroid.astype("<f8").tobytes())
            parts.append(np.ascontiguousarray(cluster.scatter, dtype="<f8").tobytes())
    if classifier is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<I", len(classifier.class_ids)))
        parts.append(classifier.class_ids.astype("<u4").tobytes())
        parts.append(struct.pack("<B", 1 if classifier.normalize else 0))
        parts.append(np.ascontiguousarray(classifier.weights, dtype="<f8").tobytes())
        parts.append(classifier.bias.astype("<f8").tobytes())
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise FormatError("truncated model file")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(count * 8), dtype="<f8").astype(np.float64)

    def done(self) -> bool:
        return self.offset == len(self.data)


def load_model(path) -> tuple[MemoryStore, LinearClassifier | None]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    cur = _Cursor(data)
    if cur.take(4) != MAGIC:
        raise FormatError("bad magic, not a CBM1 model file")
    (version, dim) = cur.unpack("<II")
    if version != VERSION:
        raise FormatError(f"unsupported model version {version}")
    (mode_flag,) = cur.unpack("<B")
    if mode_flag not in (0, 1):
        raise FormatError(f"bad covariance-mode flag {mode_flag}")
    (threshold,) = cur.unpack("<d")
    (n_classes,) = cur.unpack("<I")
    mode = "full" if mode_flag else "diagonal"
    try:
        store = MemoryStore(dim, AggVarConfig(threshold, mode))
    except ConfigError as exc:
        raise FormatError(f"invalid stored configuration: {exc}") from exc
    scatter_size = dim * dim if mode_flag else dim
    for _ in range(n_classes):
        (cid, n_clusters) = cur.unpack("<II")
        if cid in store.models:
            raise FormatError(f"duplicate class id {cid}")
        model = ClassModel(cid)
        for _ in range(n_clusters):
            (count,) = cur.unpack("<Q")
            if count == 0:
                raise FormatError("cluster with zero count")
            centroid = cur.floats(dim)
            scatter = cur.floats(scatter_size)
            cluster = ConceptCluster(centroid, mode)
            cluster.scatter = scatter.reshape(dim, dim) if mode_flag else scatter
            cluster.count = int(count)
            model.clusters.append(cluster)
        store.models[cid] = model
    (has_classifier,) = cur.unpack("<B")
    classifier = None
    if has_classifier == 1:
        (n_out,) = cur.unpack("<I")
        class_ids = np.frombuffer(cur.take(n_out * 4), dtype="<u4").astype(np.int64)
        (normalize_flag,) = cur.unpack("<B")
        weights = cur.floats(n_out * dim).reshape(n_out, dim)
        bias = cur.floats(n_out)
        classifier = LinearClassifier(weights, bias, class_ids, bool(normalize_flag))
    elif has_classifier != 0:
        raise FormatError(f"bad classifier flag {has_classifier}")
    if not cur.done():
        raise FormatError("trailing bytes after model payload")
    return store, classifier
