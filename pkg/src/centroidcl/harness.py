"""Protocol runner: wires splits, clustering, rehearsal, and the classifier
into the four experiment protocols, with per-increment metrics.

Protocols
---------
class_incremental  seed-ordered class groups; every train sample is labeled.
fsil               like class_incremental but a fixed shot count per class.
active_learning    per increment, an unlabeled pool is scored and only the
                   selected samples (within the label budget) are labeled.
                   The pool mixes the current group's train samples with all
                   earlier groups', so informative selection has to find the
                   new material among familiar distractors.
online_stream      no class groups at all: seed-interleaved chunks; a sample
                   is labeled only when flagged Unknown, highest score first,
                   within the per-chunk budget.

Every random choice derives from master_seed through named sub-seeds, so a
run is a pure function of (dataset bytes, config).  Reports serialize to
canonical JSON: sorted keys, floats at 17 significant digits.  Wall time is
kept on the in-memory report only; it never enters the canonical bytes.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .classifier import LinearClassifier, TrainConfig, train
from .clustering import AggVarConfig, MemoryStore
from .curiosity import NoveltyConfig, detect_unknown, select_informative
from .errors import CentroidCLError, ConfigError
from .features import (
    Dataset,
    IncrementBatch,
    LabelOracle,
    make_stream,
    split_class_incremental,
    split_fsil,
)
from .rehearsal import RehearsalConfig, generate_rehearsal_set, stack_exemplars
from .rng import Xoshiro256StarStar, subseed

PROTOCOLS = ("class_incremental", "fsil", "online_stream", "active_learning")
SELECTION_STRATEGIES = ("curiosity", "random")


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: str
    aggvar: AggVarConfig
    rehearsal: RehearsalConfig = RehearsalConfig()
    train: TrainConfig = TrainConfig()
    novelty: NoveltyConfig | None = None
    classes_per_increment: int | None = None
    shots_per_class: int | None = None
    chunk_size: int | None = None
    label_budget_per_chunk: int | None = None
    pool_size: int | None = None
    train_fraction: float = 0.8
    selection: str = "curiosity"
    master_seed: int = 0

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if self.selection not in SELECTION_STRATEGIES:
            raise ConfigError(f"selection must be one of {SELECTION_STRATEGIES}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        required = {
            "class_incremental": ("classes_per_increment",),
            "fsil": ("classes_per_increment", "shots_per_class"),
            "online_stream": ("chunk_size", "label_budget_per_chunk", "novelty"),
            "active_learning": ("classes_per_increment", "label_budget_per_chunk"),
        }[self.protocol]
        allowed = set(required) | {
            "class_incremental": set(),
            "fsil": set(),
            "online_stream": set(),
            "active_learning": {"pool_size"},
        }[self.protocol]
        optional = ("classes_per_increment", "shots_per_class", "chunk_size",
                    "label_budget_per_chunk", "pool_size", "novelty")
        for name in required:
            if getattr(self, name) is None:
                raise ConfigError(f"{self.protocol} requires {name}")
        for name in optional:
            if name not in allowed and getattr(self, name) is not None:
                raise ConfigError(f"{name} does not apply to {self.protocol}")
        for name in ("classes_per_increment", "shots_per_class", "chunk_size",
                     "label_budget_per_chunk", "pool_size"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1")


@dataclass(frozen=True)
class IncrementReport:
    index: int
    seen_classes: tuple[int, ...]
    accuracy_on_seen: float
    per_class_accuracy: dict[int, float]
    clusters_total: int
    labels_spent: int
    memory_bytes: int
    unknown_precision: float | None = None
    unknown_recall: float | None = None


@dataclass
class RunReport:
    config: ProtocolConfig
    dataset_summary: dict
    increments: list[IncrementReport]
    average_incremental_accuracy: float
    final_accuracy: float
    wall_time_s: float = 0.0

    def to_canonical_json(self) -> str:
        body = {
            "config": asdict(self.config),
            "dataset": self.dataset_summary,
            "increments": [
                {
                    "index": r.index,
                    "seen_classes": list(r.seen_classes),
                    "accuracy_on_seen": r.accuracy_on_seen,
                    "per_class_accuracy": [
                        [cid, r.per_class_accuracy[cid]] for cid in sorted(r.per_class_accuracy)
                    ],
                    "clusters_total": r.clusters_total,
                    "labels_spent": r.labels_spent,
                    "memory_bytes": r.memory_bytes,
                    "unknown_precision": r.unknown_precision,
                    "unknown_recall": r.unknown_recall,
                }
                for r in self.increments
            ],
            "average_incremental_accuracy": self.average_incremental_accuracy,
            "final_accuracy": self.final_accuracy,
        }
        return canonical_json(body)


def _format_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def canonical_json(value) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits,
    non-finite floats encoded as strings."""
    import json

    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: str(kv[0]))
        inner = ",".join(f"{canonical_json(str(k))}:{canonical_json(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in value) + "]"
    if isinstance(value, np.ndarray):
        return canonical_json(value.tolist())
    raise TypeError(f"cannot canonicalize {type(value)!r}")


def _evaluate(
    classifier: LinearClassifier | None,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    seen_classes: list[int],
) -> tuple[float, dict[int, float]]:
    """Accuracy over test samples whose class has been seen, plus per-class accuracy."""
    if classifier is None or not seen_classes:
        return 0.0, {}
    mask = np.isin(test_labels, seen_classes)
    if not mask.any():
        return 0.0, {}
    predictions = classifier.predict(test_features[mask])
    truth = test_labels[mask]
    correct = predictions == truth
    per_class = {int(c): float(correct[truth == c].mean()) for c in np.unique(truth)}
    return float(correct.mean()), per_class


def _fit_increment_classifier(
    store: MemoryStore,
    batch_features: np.ndarray | None,
    batch_labels: np.ndarray | None,
    current_classes,
    config: ProtocolConfig,
    increment_index: int,
) -> LinearClassifier | None:
    """Retrain from scratch on pseudo-exemplars for old classes + current real data."""
    rehearsal_cfg = replace(
        config.rehearsal, seed=subseed(config.rehearsal.seed, "increment", increment_index)
    )
    exemplars = generate_rehearsal_set(store, current_classes, rehearsal_cfg)
    parts_x, parts_y = [], []
    if exemplars:
        ex_x, ex_y = stack_exemplars(exemplars)
        parts_x.append(ex_x)
        parts_y.append(ex_y)
    if batch_features is not None and len(batch_features):
        parts_x.append(np.asarray(batch_features, dtype=np.float64))
        parts_y.append(np.asarray(batch_labels, dtype=np.int64))
    if not parts_x:
        return None
    train_cfg = replace(
        config.train, seed=subseed(config.train.seed, "increment", increment_index)
    )
    return train(np.concatenate(parts_x), np.concatenate(parts_y), train_cfg)


def _increment_report(
    store: MemoryStore,
    classifier: LinearClassifier | None,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    index: int,
    labels_spent: int,
    unknown_precision: float | None = None,
    unknown_recall: float | None = None,
) -> IncrementReport:
    seen = store.class_ids
    accuracy, per_class = _evaluate(classifier, test_features, test_labels, seen)
    return IncrementReport(
        index=index,
        seen_classes=tuple(seen),
        accuracy_on_seen=accuracy,
        per_class_accuracy=per_class,
        clusters_total=store.n_clusters,
        labels_spent=labels_spent,
        memory_bytes=store.memory_footprint().total_bytes,
        unknown_precision=unknown_precision,
        unknown_recall=unknown_recall,
    )


def run_with_state(config: ProtocolConfig, dataset: Dataset):
    """Like :func:`run`, but also returns the final memory store and classifier."""
    started = time.perf_counter()
    runner = _Runner(config, dataset)
    reports = runner.execute()
    accuracies = [r.accuracy_on_seen for r in reports]
    report = RunReport(
        config=config,
        dataset_summary={
            "n_samples": len(dataset),
            "dim": dataset.dim,
            "n_classes": dataset.n_classes,
        },
        increments=reports,
        average_incremental_accuracy=sum(accuracies) / len(accuracies),
        final_accuracy=accuracies[-1],
        wall_time_s=time.perf_counter() - started,
    )
    return report, runner.store, runner.classifier


def run(config: ProtocolConfig, dataset: Dataset) -> RunReport:
    """Execute one full protocol run; deterministic for fixed (dataset, config)."""
    return run_with_state(config, dataset)[0]


class _Runner:
    def __init__(self, config: ProtocolConfig, dataset: Dataset):
        self.config = config
        self.dataset = dataset
        self.store = MemoryStore(dataset.dim, config.aggvar)
        self.classifier: LinearClassifier | None = None

    def execute(self) -> list[IncrementReport]:
        if self.config.protocol == "online_stream":
            return self._run_stream()
        return self._run_grouped()

    # -- shared per-increment tail: learn, retrain, evaluate --------------

    def _learn_and_report(
        self,
        learn_batch: IncrementBatch | None,
        t: int,
        labels_spent: int,
        test_x: np.ndarray,
        test_y: np.ndarray,
        unknown_precision: float | None = None,
        unknown_recall: float | None = None,
    ) -> IncrementReport:
        known_before = set(self.store.class_ids)
        if learn_batch is not None:
            self.store.learn_increment(learn_batch)
            # rehearsal covers every previously learned class; only classes new
            # in this increment rely purely on their real features (a known
            # class getting a few more labels must keep its exemplar quota)
            new_classes = [
                int(c) for c in learn_batch.classes_present() if int(c) not in known_before
            ]
            batch_x = learn_batch.features.astype(np.float64)
            batch_y = learn_batch.labels
        else:
            new_classes, batch_x, batch_y = [], None, None
        classifier = _fit_increment_classifier(
            self.store, batch_x, batch_y, new_classes, self.config, t
        )
        if classifier is not None:
            self.classifier = classifier
        return _increment_report(
            self.store,
            self.classifier,
            test_x,
            test_y,
            t,
            labels_spent,
            unknown_precision,
            unknown_recall,
        )

    # -- class-grouped protocols ------------------------------------------

    def _run_grouped(self) -> list[IncrementReport]:
        config = self.config
        split_seed = subseed(config.master_seed, "split")
        if config.protocol == "fsil":
            increments, test = split_fsil(
                self.dataset, config.classes_per_increment, config.shots_per_class, split_seed
            )
        else:
            increments, test = split_class_incremental(
                self.dataset, config.classes_per_increment, config.train_fraction, split_seed
            )
        test_x = test.features.astype(np.float64)
        test_y = test.labels
        active = config.protocol == "active_learning"
        oracle = LabelOracle(self.dataset.labels)
        pool_pieces: list[np.ndarray] = []
        reports = []
        for batch in increments:
            t = batch.index
            try:
                if active:
                    pool_pieces.append(batch.sample_indices)
                    learn_batch, spent = self._select_and_query(pool_pieces, oracle, t)
                else:
                    learn_batch, spent = batch, len(batch)
                reports.append(self._learn_and_report(learn_batch, t, spent, test_x, test_y))
            except CentroidCLError as exc:
                raise type(exc)(f"increment {t}: {exc}") from exc
        return reports

    def _select_and_query(
        self, pool_pieces: list[np.ndarray], oracle: LabelOracle, t: int
    ) -> tuple[IncrementBatch | None, int]:
        """Build the increment's unlabeled pool, pick samples, query their labels."""
        config = self.config
        candidates = np.concatenate(pool_pieces)
        # seeded shuffle also when the pool is not subsampled: score ties
        # (notably the all-infinite first increment) must not resolve to the
        # dataset's class-grouped order
        rng = Xoshiro256StarStar(subseed(config.master_seed, "pool", t))
        take = len(candidates) if config.pool_size is None else min(config.pool_size, len(candidates))
        candidates = candidates[rng.sample_indices(len(candidates), take)]
        pool_x = self.dataset.features[candidates].astype(np.float64)
        budget = config.label_budget_per_chunk
        if config.selection == "curiosity":
            chosen = select_informative(self.store, pool_x, budget).chosen_indices
        else:
            rng = Xoshiro256StarStar(subseed(config.master_seed, "select", t))
            chosen = rng.sample_indices(len(candidates), min(budget, len(candidates)))
        before = oracle.queries_made
        dataset_indices = candidates[chosen]
        labels = np.array([oracle.query(i) for i in dataset_indices], dtype=np.int64)
        spent = oracle.queries_made - before
        assert spent <= budget, "label budget exceeded"
        if len(chosen) == 0:
            return None, spent
        batch = IncrementBatch(
            t, self.dataset.features[dataset_indices], labels, dataset_indices
        )
        return batch, spent

    # -- boundary-free streaming protocol ----------------------------------

    def _run_stream(self) -> list[IncrementReport]:
        config = self.config
        split_seed = subseed(config.master_seed, "split")
        n_classes = len(self.dataset.classes_present())
        increments, test = split_class_incremental(
            self.dataset, n_classes, config.train_fraction, split_seed
        )
        train_ds = self.dataset.subset(increments[0].sample_indices)
        test_x = test.features.astype(np.float64)
        test_y = test.labels
        chunks, oracle = make_stream(train_ds, config.chunk_size, subseed(config.master_seed, "stream"))
        budget = config.label_budget_per_chunk
        reports = []
        for t, chunk in enumerate(chunks):
            try:
                chunk_x = train_ds.features[chunk].astype(np.float64)
                known_before = set(self.store.class_ids)
                detections = [
                    detect_unknown(self.store, chunk_x[i], config.novelty)
                    for i in range(len(chunk))
                ]
                flagged = np.array(
                    [i for i, det in enumerate(detections) if not det.is_known], dtype=np.int64
                )
                if len(flagged):
                    flagged_scores = np.array([detections[i].distance for i in flagged])
                    flagged = flagged[np.argsort(-flagged_scores, kind="stable")]
                chosen = flagged[:budget]
                before = oracle.queries_made
                labels = np.array([oracle.query(chunk[i]) for i in chosen], dtype=np.int64)
                spent = oracle.queries_made - before
                learn_batch = None
                if len(chosen):
                    learn_batch = IncrementBatch(
                        t, train_ds.features[chunk[chosen]], labels, chunk[chosen]
                    )
                truly_unknown = np.array(
                    [int(train_ds.labels[i]) not in known_before for i in chunk]
                )
                flagged_mask = np.array([not det.is_known for det in detections])
                hits = int(np.sum(flagged_mask & truly_unknown))
                precision = hits / flagged_mask.sum() if flagged_mask.any() else None
                recall = hits / truly_unknown.sum() if truly_unknown.any() else None
                reports.append(
                    self._learn_and_report(
                        learn_batch, t, spent, test_x, test_y, precision, recall
                    )
                )
            except CentroidCLError as exc:
                raise type(exc)(f"increment {t}: {exc}") from exc
        return reports


@dataclass(frozen=True)
class TuneResult:
    best_threshold: float
    candidate_accuracies: tuple[tuple[float, float], ...]  # (threshold, mean accuracy)


def tune_threshold(
    batch: IncrementBatch,
    candidates,
    folds: int,
    seed: int,
    covariance_mode: str = "diagonal",
    rehearsal: RehearsalConfig | None = None,
    train_config: TrainConfig | None = None,
) -> TuneResult:
    """Cross-validate the cluster-and-rehearse pipeline over threshold candidates.

    Each fold clusters the training part at the candidate threshold, rebuilds
    every class purely from pseudo-exemplars, trains the classifier on those,
    and scores the held-out part — so the result measures how well the
    clustered representation at that threshold preserves class structure.
    Returns the accuracy argmax; ties go to the smallest threshold.
    """
    candidates = sorted(float(c) for c in candidates)
    if not candidates:
        raise ConfigError("candidate list must not be empty")
    if folds < 2:
        raise ConfigError("folds must be >= 2")
    n = len(batch)
    if n < folds:
        raise ConfigError(f"increment of {n} samples is too small for {folds} folds")
    rehearsal = rehearsal if rehearsal is not None else RehearsalConfig()
    train_config = train_config if train_config is not None else TrainConfig()
    perm = Xoshiro256StarStar(subseed(seed, "fold")).permutation(n)
    fold_parts = np.array_split(perm, folds)
    features = batch.features.astype(np.float64)
    labels = batch.labels
    dim = features.shape[1]
    scored: list[tuple[float, float]] = []
    for threshold in candidates:
        fold_accuracies = []
        for f in range(folds):
            held_out = fold_parts[f]
            fit_idx = np.concatenate([fold_parts[j] for j in range(folds) if j != f])
            store = MemoryStore(dim, AggVarConfig(threshold, covariance_mode))
            store.learn_increment(IncrementBatch(0, features[fit_idx], labels[fit_idx]))
            exemplars = generate_rehearsal_set(
                store, (), replace(rehearsal, seed=subseed(seed, "rehearsal", f))
            )
            ex_x, ex_y = stack_exemplars(exemplars)
            clf = train(ex_x, ex_y, replace(train_config, seed=subseed(seed, "train", f)))
            predictions = clf.predict(features[held_out])
            fold_accuracies.append(float(np.mean(predictions == labels[held_out])))
        scored.append((threshold, sum(fold_accuracies) / folds))
    best_threshold, best_accuracy = scored[0]
    for threshold, accuracy in scored[1:]:
        if accuracy > best_accuracy:
            best_threshold, best_accuracy = threshold, accuracy
    return TuneResult(best_threshold, tuple(scored))
