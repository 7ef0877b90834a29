"""Desk-scale federated learning: softmax regression on synthetic blobs.

Each device trains a multinomial logistic-regression model on its local
Gaussian-blob dataset; edge servers average their members' weights by sample
share, and the central unit averages the server models the same way.  Because
both stages weight by sample counts, the nested average over any partition
equals the flat federated average — skew only matters once scheduling drops
devices from a round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .association import DataSplit

_LOG_CLAMP = 1e-12
_DIVERGENCE_GUARD = 1e6


@dataclass
class LocalDataset:
    """Feature matrix (n, d) and integer labels (n,) held by one device."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("features must be (n, d) and labels (n,)")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on the sample count")

    @property
    def n_samples(self) -> int:
        return self.labels.size


def init_weights(n_classes: int, n_features: int) -> np.ndarray:
    """Flat zero weight vector: (n_features + 1) coefficients per class."""
    return np.zeros(n_classes * (n_features + 1))


def _unpack(w: np.ndarray, n_classes: int, n_features: int) -> tuple[np.ndarray, np.ndarray]:
    mat = w.reshape(n_classes, n_features + 1)
    return mat[:, :-1], mat[:, -1]


def predict_proba(w: np.ndarray, x: np.ndarray, n_classes: int) -> np.ndarray:
    """Row-wise softmax class probabilities, shape (n, n_classes)."""
    coef, bias = _unpack(w, n_classes, x.shape[1])
    logits = x @ coef.T + bias
    logits -= logits.max(axis=1, keepdims=True)
    expz = np.exp(logits)
    return expz / expz.sum(axis=1, keepdims=True)


def nll_and_gradient(w: np.ndarray, x: np.ndarray, y: np.ndarray, n_classes: int) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient in the flat layout."""
    n = x.shape[0]
    probs = predict_proba(w, x, n_classes)
    loss = float(-np.mean(np.log(np.clip(probs[np.arange(n), y], _LOG_CLAMP, None))))
    resid = probs
    resid[np.arange(n), y] -= 1.0
    resid /= n
    grad = np.concatenate([resid.T @ x, resid.sum(axis=0)[:, None]], axis=1)
    return loss, grad.ravel()


def local_train(
    w: np.ndarray,
    data: LocalDataset,
    epochs: int,
    lr: float,
    rng: np.random.Generator,
    n_classes: int,
    batch_size: int = 32,
) -> np.ndarray:
    """Mini-batch SGD from the broadcast weights; returns the updated copy."""
    if epochs < 0 or lr < 0 or batch_size <= 0:
        raise ValueError("epochs and lr must be non-negative, batch_size positive")
    w = w.copy()
    n = data.n_samples
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss, grad = nll_and_gradient(w, data.features[idx], data.labels[idx], n_classes)
            if not np.isfinite(loss):
                raise RuntimeError("learning rate too high: local training diverged")
            w -= lr * grad
            # the clamped loss saturates near -log(clamp), so runaway steps
            # are caught on the iterate instead
            if not np.all(np.isfinite(w)) or np.abs(w).max() > _DIVERGENCE_GUARD:
                raise RuntimeError("learning rate too high: local training diverged")
    return w


def _weighted_average(weights: list[np.ndarray], sizes: np.ndarray) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    if len(weights) == 0:
        raise ValueError("nothing to aggregate")
    if len(weights) != sizes.size or np.any(sizes <= 0):
        raise ValueError("one positive sample count per model is required")
    coeffs = sizes / sizes.sum()
    out = np.zeros_like(weights[0])
    for c, wk in zip(coeffs, weights):
        out += c * wk
    return out


def mec_aggregate(weights: list[np.ndarray], sizes: np.ndarray) -> np.ndarray:
    """Sample-share average of one server's member models."""
    if len(weights) == 0:
        raise ValueError("MEC has no devices this round")
    return _weighted_average(weights, sizes)


def cu_aggregate(weights: list[np.ndarray], sizes: np.ndarray) -> np.ndarray:
    """Sample-share average of the server models at the central unit."""
    return _weighted_average(weights, sizes)


def cross_entropy(probs: np.ndarray, labels: np.ndarray, class_probs: np.ndarray) -> float:
    """Class-weighted cross-entropy of predicted distributions.

    For each class with samples present, averages -log of the probability the
    model puts on that class over its samples, then weights the class terms
    by ``class_probs``.
    """
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    class_probs = np.asarray(class_probs, dtype=float)
    total = 0.0
    for c in range(class_probs.size):
        mask = labels == c
        if not np.any(mask):
            continue
        total += class_probs[c] * float(np.mean(-np.log(np.clip(probs[mask, c], _LOG_CLAMP, None))))
    return total


def evaluate(w: np.ndarray, test: LocalDataset, n_classes: int) -> tuple[float, float]:
    """Accuracy and mean negative log-likelihood on a held-out set."""
    probs = predict_proba(w, test.features, n_classes)
    acc = float(np.mean(np.argmax(probs, axis=1) == test.labels))
    nll = float(-np.mean(np.log(np.clip(probs[np.arange(test.n_samples), test.labels], _LOG_CLAMP, None))))
    return acc, nll


def skewed_split(
    n_devices: int,
    n_classes: int,
    classes_per_device: int,
    samples_per_device: int,
    rng: np.random.Generator,
    concentration: float = 0.0,
) -> DataSplit:
    """Non-i.i.d. sample counts: each device draws a few classes and fills them.

    With ``concentration`` > 0 the within-device class weights are Dirichlet
    rather than uniform, giving a tunable mild skew even when every class is
    present on every device.
    """
    if not 1 <= classes_per_device <= n_classes:
        raise ValueError("classes_per_device must lie in [1, n_classes]")
    if samples_per_device < 1:
        raise ValueError("samples_per_device must be positive")
    counts = np.zeros((n_classes, n_devices), dtype=int)
    for k in range(n_devices):
        chosen = np.sort(rng.choice(n_classes, size=classes_per_device, replace=False))
        if concentration > 0:
            weights = rng.dirichlet(np.full(classes_per_device, concentration))
        else:
            weights = np.full(classes_per_device, 1.0 / classes_per_device)
        counts[chosen, k] = rng.multinomial(samples_per_device, weights)
    return DataSplit(counts)


def synth_datasets(
    split: DataSplit,
    class_means: np.ndarray,
    noise_std: float,
    rng: np.random.Generator,
    test_per_class: int = 50,
) -> tuple[list[LocalDataset], LocalDataset]:
    """Materialise Gaussian-blob datasets matching the split, plus a balanced test set."""
    class_means = np.asarray(class_means, dtype=float)
    n_classes, n_features = class_means.shape
    if n_classes != split.n_classes:
        raise ValueError("class_means and split disagree on the class count")
    if noise_std <= 0:
        raise ValueError("noise_std must be positive")
    locals_: list[LocalDataset] = []
    for k in range(split.n_devices):
        feats = []
        labels = []
        for c in range(n_classes):
            n = int(split.counts[c, k])
            if n == 0:
                continue
            feats.append(class_means[c] + noise_std * rng.standard_normal((n, n_features)))
            labels.append(np.full(n, c, dtype=int))
        locals_.append(LocalDataset(np.vstack(feats), np.concatenate(labels)))
    test_feats = np.vstack(
        [class_means[c] + noise_std * rng.standard_normal((test_per_class, n_features)) for c in range(n_classes)]
    )
    test_labels = np.concatenate([np.full(test_per_class, c, dtype=int) for c in range(n_classes)])
    return locals_, LocalDataset(test_feats, test_labels)
