"""Single linear layer + softmax, trained from scratch by mini-batch SGD.

Zero-initialized parameters, mean cross-entropy loss, seeded per-epoch
shuffles.  Training is sequential over mini-batches on purpose: bit-identical
parameters for identical (data, config) is part of the contract.  A trained
classifier is immutable and safe for concurrent predict calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericsError
from .rng import Xoshiro256StarStar, subseed


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    l2_normalize: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, X: np.ndarray, y_idx: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. weights and bias."""
    n = X.shape[0]
    logits = X @ weights.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), y_idx]))
    probs = softmax(logits)
    probs[np.arange(n), y_idx] -= 1.0
    probs /= n
    return loss, probs.T @ X, probs.sum(axis=0)


def _l2_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return X / norms


@dataclass(eq=False)
class LinearClassifier:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)
    class_ids: np.ndarray  # (C,) ascending
    normalize: bool = False
    loss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def _prepare(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.dim:
            raise DataError(f"expected dimension {self.dim}, got {X.shape[1]}")
        if self.normalize:
            X = _l2_rows(X)
        return X, single

    def logits(self, x) -> np.ndarray:
        X, single = self._prepare(x)
        out = X @ self.weights.T + self.bias
        return out[0] if single else out

    def predict(self, x):
        """Class id with the highest logit; ties go to the lowest class id."""
        X, single = self._prepare(x)
        picks = self.class_ids[np.argmax(X @ self.weights.T + self.bias, axis=1)]
        return int(picks[0]) if single else picks

    def predict_proba(self, x) -> np.ndarray:
        """Softmax probabilities over class_ids."""
        X, single = self._prepare(x)
        probs = softmax(X @ self.weights.T + self.bias)
        return probs[0] if single else probs


def train(features, labels, config: TrainConfig) -> LinearClassifier:
    """Fit from zero-initialized parameters by mini-batch SGD.

    Deterministic for fixed (data order, config).  Raises NumericsError,
    naming the epoch, if the full-data loss ever turns non-finite.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigError("training set must be a non-empty 2-D array")
    if y.shape != (X.shape[0],):
        raise ConfigError("labels do not match training-set size")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite training feature")
    if config.l2_normalize:
        X = _l2_rows(X)
    class_ids = np.unique(y)
    y_idx = np.searchsorted(class_ids, y)
    n, d = X.shape
    c = len(class_ids)
    weights = np.zeros((c, d))
    bias = np.zeros(c)
    history = []
    lr = config.learning_rate
    for epoch in range(config.epochs):
        rng = Xoshiro256StarStar(subseed(config.seed, "epoch", epoch))
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            take = perm[start : start + config.batch_size]
            _, grad_w, grad_b = loss_and_grad(weights, bias, X[take], y_idx[take])
            weights -= lr * grad_w
            bias -= lr * grad_b
        epoch_loss, _, _ = loss_and_grad(weights, bias, X, y_idx)
        if not np.isfinite(epoch_loss):
            raise NumericsError(f"non-finite training loss at epoch {epoch}")
        history.append(epoch_loss)
    return LinearClassifier(weights, bias, class_ids, config.l2_normalize, history)
