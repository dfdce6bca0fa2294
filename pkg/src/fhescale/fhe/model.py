"""Plaintext multinomial logistic regression.

Full-batch gradient descent with a per-epoch halving backtrack, which
keeps the training loss monotonically non-increasing regardless of the
starting learning rate. Deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 50
    seed: int = 0
    init_std: float = 0.01
    l2: float = 1e-4


@dataclass(frozen=True)
class FloatModel:
    weights: np.ndarray  # [n_classes, n_features]
    bias: np.ndarray     # [n_classes]
    n_classes: int
    n_features: int
    loss_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("model parameters must be finite")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if w.shape != (self.n_classes, self.n_features) or b.shape != (self.n_classes,):
            raise ValueError("weight/bias shapes inconsistent with n_classes/n_features")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grad(w, b, features, onehot, l2):
    n = features.shape[0]
    probs = _softmax(features @ w.T + b)
    loss = -np.mean(np.sum(onehot * np.log(probs + 1e-300), axis=1))
    loss += 0.5 * l2 * np.sum(w * w)
    diff = (probs - onehot) / n
    grad_w = diff.T @ features + l2 * w
    grad_b = diff.sum(axis=0)
    return loss, grad_w, grad_b


def train_logreg(features: np.ndarray, labels: np.ndarray,
                 config: TrainConfig = TrainConfig()) -> FloatModel:
    """Train a softmax classifier on (features, labels).

    Returns a FloatModel whose loss_history records the post-epoch loss;
    the history is non-increasing by construction.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.size == 0 or labels.size == 0:
        raise ValueError("empty dataset")
    if not np.all(np.isfinite(features)):
        raise ValueError("non-finite features")
    n_samples, n_features = features.shape
    n_classes = int(labels.max()) + 1
    if n_classes < 2:
        n_classes = 2
    if labels.min() < 0:
        raise ValueError("labels must be non-negative")

    rng = np.random.default_rng(config.seed)
    w = rng.normal(0.0, config.init_std, size=(n_classes, n_features))
    b = np.zeros(n_classes)
    onehot = np.zeros((n_samples, n_classes))
    onehot[np.arange(n_samples), labels] = 1.0

    loss, grad_w, grad_b = _loss_and_grad(w, b, features, onehot, config.l2)
    history = [loss]
    lr = config.learning_rate
    for _ in range(config.epochs):
        # backtrack until the step does not increase the loss
        while True:
            w_new = w - lr * grad_w
            b_new = b - lr * grad_b
            new_loss, new_gw, new_gb = _loss_and_grad(
                w_new, b_new, features, onehot, config.l2)
            if new_loss <= loss or lr < 1e-12:
                break
            lr *= 0.5
        w, b, loss, grad_w, grad_b = w_new, b_new, new_loss, new_gw, new_gb
        history.append(loss)

    return FloatModel(weights=w, bias=b, n_classes=n_classes,
                      n_features=n_features, loss_history=tuple(history))


def predict_plaintext(model: FloatModel, features: np.ndarray) -> np.ndarray:
    """Reference float scores W @ x + b for one feature vector or a batch."""
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    if single:
        features = features[None, :]
    if features.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} features, got {features.shape[1]}")
    scores = features @ model.weights.T + model.bias
    return scores[0] if single else scores


def argmax_class(scores: np.ndarray) -> int:
    """Best class; ties broken by the lowest class index."""
    return int(np.argmax(scores))
