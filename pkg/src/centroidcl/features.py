"""Feature-vector datasets, the CBFV binary file format, and benchmark splits.

CBFV layout (all integers little-endian):

    magic "CBFV" | version u32 = 1 | N u32 | d u32 | C u32
    | N*d float32 features, row-major
    | N   u32 labels
    | C   class-name records, each u16 byte-length + UTF-8 bytes

Files store float32; the engine upcasts to float64 at its own boundaries.
A Dataset is immutable after construction and safe to share between readers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError, DataError, FormatError, IoError
from .rng import Xoshiro256StarStar, subseed

MAGIC = b"CBFV"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class LabeledSample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """All samples of one dataset: an (N, d) float32 matrix plus labels and names."""

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float32)
        if feats.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {feats.shape}")
        n, d = feats.shape
        if n == 0:
            raise DataError("empty dataset rejected")
        if d == 0:
            raise DataError("feature dimension must be >= 1")
        if not np.all(np.isfinite(feats)):
            raise DataError("non-finite feature value")
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (n,):
            raise DataError(f"labels must have shape ({n},), got {labels.shape}")
        names = tuple(str(s) for s in self.class_names)
        if len(names) == 0:
            raise DataError("class_names must not be empty")
        if labels.min() < 0 or labels.max() >= len(names):
            raise DataError("label outside [0, class count)")
        feats = feats.copy()  # decouple from caller before freezing
        labels = labels.copy()
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> LabeledSample:
        return LabeledSample(self.features[i], int(self.labels[i]))

    def classes_present(self) -> np.ndarray:
        return np.unique(self.labels)

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.class_names)


@dataclass(frozen=True)
class IncrementBatch:
    """One increment's labeled training samples, in learning order."""

    index: int
    features: np.ndarray
    labels: np.ndarray
    sample_indices: np.ndarray | None = None  # positions in the source dataset

    def __post_init__(self):
        feats = np.asarray(self.features)
        if feats.ndim != 2 or feats.shape[0] == 0:
            raise DataError("increment batch must be a non-empty 2-D array")
        if not np.all(np.isfinite(feats)):
            raise DataError("non-finite feature value in increment batch")
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (feats.shape[0],):
            raise DataError("increment labels do not match sample count")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    def classes_present(self) -> np.ndarray:
        return np.unique(self.labels)


def write_feature_file(dataset: Dataset, path) -> None:
    """Serialize a dataset to CBFV bytes; output is deterministic per dataset."""
    n, d = dataset.features.shape
    c = dataset.n_classes
    parts = [_HEADER.pack(MAGIC, VERSION, n, d, c)]
    parts.append(np.ascontiguousarray(dataset.features, dtype="<f4").tobytes())
    parts.append(dataset.labels.astype("<u4").tobytes())
    for name in dataset.class_names:
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise DataError(f"class name too long to encode: {name[:32]}...")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_feature_file(path) -> Dataset:
    """Parse a CBFV file; the byte-exact inverse of :func:`write_feature_file`."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, n, d, c = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if n == 0:
        raise DataError("empty dataset rejected")
    if d == 0:
        raise DataError("feature dimension must be >= 1")
    if c == 0:
        raise DataError("class table must not be empty")
    offset = _HEADER.size
    feat_bytes = n * d * 4
    label_bytes = n * 4
    if len(data) < offset + feat_bytes + label_bytes:
        raise FormatError("truncated payload")
    feats = np.frombuffer(data, dtype="<f4", count=n * d, offset=offset)
    feats = feats.reshape(n, d).copy()
    offset += feat_bytes
    labels = np.frombuffer(data, dtype="<u4", count=n, offset=offset).astype(np.int64)
    offset += label_bytes
    names = []
    for _ in range(c):
        if len(data) < offset + 2:
            raise FormatError("truncated class-name table")
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if len(data) < offset + length:
            raise FormatError("truncated class-name table")
        try:
            names.append(data[offset : offset + length].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"class name is not valid UTF-8: {exc}") from exc
        offset += length
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after class-name table")
    if not np.all(np.isfinite(feats)):
        raise DataError("non-finite feature value")
    if labels.max() >= c:
        raise DataError("label outside [0, class count)")
    return Dataset(feats, labels, tuple(names))


@dataclass
class LabelOracle:
    """Label access point that counts every query, for label-budget audits."""

    _labels: np.ndarray
    queries_made: int = 0
    queried_indices: list = field(default_factory=list)

    def query(self, index: int) -> int:
        self.queries_made += 1
        self.queried_indices.append(int(index))
        return int(self._labels[index])


def _per_class_order(dataset: Dataset, seed: int) -> dict[int, np.ndarray]:
    orders = {}
    for cid in dataset.classes_present():
        idx = np.flatnonzero(dataset.labels == cid)
        rng = Xoshiro256StarStar(subseed(seed, "class", int(cid)))
        rng.shuffle(idx)
        orders[int(cid)] = idx
    return orders


def _class_order(dataset: Dataset, seed: int) -> list[int]:
    classes = [int(c) for c in dataset.classes_present()]
    rng = Xoshiro256StarStar(subseed(seed, "class-order"))
    rng.shuffle(classes)
    return classes


def _group(classes: list[int], per_increment: int) -> list[list[int]]:
    return [classes[i : i + per_increment] for i in range(0, len(classes), per_increment)]


def _assemble(
    dataset: Dataset,
    groups: list[list[int]],
    train_idx: dict[int, np.ndarray],
    test_idx: dict[int, np.ndarray],
) -> tuple[list[IncrementBatch], Dataset]:
    increments = []
    for t, group in enumerate(groups):
        idx = np.concatenate([train_idx[c] for c in group])
        increments.append(
            IncrementBatch(t, dataset.features[idx], dataset.labels[idx], sample_indices=idx)
        )
    all_test = np.concatenate([test_idx[c] for c in sorted(test_idx)])
    return increments, dataset.subset(all_test)


def split_class_incremental(
    dataset: Dataset,
    classes_per_increment: int,
    train_fraction: float,
    seed: int,
) -> tuple[list[IncrementBatch], Dataset]:
    """Partition classes into seed-ordered groups and each class into train/test.

    Per class of size n, the first max(1, floor(train_fraction * n)) shuffled
    samples (capped at n - 1) are train; the rest are test.  Classes need at
    least 2 samples so both sides stay non-empty.
    """
    if classes_per_increment < 1:
        raise ConfigError("classes_per_increment must be >= 1")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must be in (0, 1)")
    classes = _class_order(dataset, seed)
    if classes_per_increment > len(classes):
        raise ConfigError(
            f"classes_per_increment={classes_per_increment} exceeds "
            f"{len(classes)} classes present"
        )
    orders = _per_class_order(dataset, seed)
    train_idx, test_idx = {}, {}
    for cid, order in orders.items():
        n = len(order)
        if n < 2:
            raise ConfigError(f"class {cid} has {n} sample(s); need >= 2 to split")
        n_train = min(max(1, int(train_fraction * n)), n - 1)
        train_idx[cid] = order[:n_train]
        test_idx[cid] = order[n_train:]
    return _assemble(dataset, _group(classes, classes_per_increment), train_idx, test_idx)


def split_fsil(
    dataset: Dataset,
    classes_per_increment: int,
    shots_per_class: int,
    seed: int,
) -> tuple[list[IncrementBatch], Dataset]:
    """Few-shot variant: exactly shots_per_class train samples per class, rest test."""
    if classes_per_increment < 1:
        raise ConfigError("classes_per_increment must be >= 1")
    if shots_per_class < 1:
        raise ConfigError("shots_per_class must be >= 1")
    classes = _class_order(dataset, seed)
    if classes_per_increment > len(classes):
        raise ConfigError(
            f"classes_per_increment={classes_per_increment} exceeds "
            f"{len(classes)} classes present"
        )
    orders = _per_class_order(dataset, seed)
    train_idx, test_idx = {}, {}
    for cid, order in orders.items():
        if len(order) < shots_per_class + 1:
            raise ConfigError(
                f"class {cid} has {len(order)} samples; "
                f"needs {shots_per_class + 1} for {shots_per_class} shots plus a test sample"
            )
        train_idx[cid] = order[:shots_per_class]
        test_idx[cid] = order[shots_per_class:]
    return _assemble(dataset, _group(classes, classes_per_increment), train_idx, test_idx)


def make_stream(
    dataset: Dataset, chunk_size: int, seed: int
) -> tuple[list[np.ndarray], LabelOracle]:
    """Interleave all samples into label-free chunks plus a counting label oracle.

    Chunks are index arrays into ``dataset``; labels stay hidden until the
    oracle is queried for a specific index.
    """
    if chunk_size < 1:
        raise ConfigError("chunk_size must be >= 1")
    rng = Xoshiro256StarStar(subseed(seed, "stream"))
    perm = rng.permutation(len(dataset))
    chunks = [perm[i : i + chunk_size] for i in range(0, len(perm), chunk_size)]
    return chunks, LabelOracle(dataset.labels)
