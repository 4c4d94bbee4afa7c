"""Nearest-mean classification with an open-set acceptance threshold."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError

METRICS = ("l2", "cosine")


def dist_l2(X, Y) -> float:
    """Squared Euclidean distance ``(X - Y)^T (X - Y)``."""
    X, Y = np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise DataError(f"length mismatch: {X.shape} vs {Y.shape}")
    diff = X - Y
    return float(diff @ diff)


def sim_cos(X, Y) -> float:
    """Negated cosine similarity, in ``[-1, 1]``; -1 means perfectly aligned."""
    X, Y = np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise DataError(f"length mismatch: {X.shape} vs {Y.shape}")
    nx, ny = np.linalg.norm(X), np.linalg.norm(Y)
    if nx == 0 or ny == 0:
        raise DataError("cosine measure is undefined for a zero vector")
    return float(np.clip(-(X @ Y) / (nx * ny), -1.0, 1.0))


MEASURES = {"l2": dist_l2, "cosine": sim_cos}


def class_means(features, labels: Sequence[str]):
    """Per-class arithmetic means; returns ``(sorted_labels, means)``.

    ``features`` is ``(n_samples, dim)`` (or a list of equal-length vectors).
    """
    try:
        F = np.asarray(features, dtype=np.float64)
    except ValueError as exc:
        raise DataError("feature vectors have ragged lengths") from exc
    if F.ndim != 2:
        raise DataError("feature vectors have ragged lengths")
    if len(labels) != F.shape[0]:
        raise DataError(f"{len(labels)} labels for {F.shape[0]} feature vectors")
    if F.shape[0] == 0:
        raise DataError("no feature vectors")
    labels = np.asarray(labels, dtype=object)
    order = sorted(set(labels.tolist()))
    means = np.stack([F[labels == lab].mean(axis=0) for lab in order])
    return order, means


@dataclass(frozen=True, eq=False)
class ClassModel:
    labels: tuple[str, ...]
    # (n_classes, dim), rows aligned with labels
    means: np.ndarray
    threshold: float
    metric: str = "cosine"

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise DataError("class labels must be distinct")
        if list(self.labels) != sorted(self.labels):
            raise DataError("class labels must be sorted")
        if self.metric not in METRICS:
            raise DataError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if not np.isfinite(self.threshold):
            raise DataError("acceptance threshold must be finite")
        means = np.asarray(self.means, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] != len(self.labels):
            raise DataError("one mean vector per label is required")
        object.__setattr__(self, "means", means)


def scores(z, means, metric: str) -> np.ndarray:
    """Score of ``z`` against every row of ``means`` (lower is closer)."""
    z = np.asarray(z, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    if z.shape != means.shape[1:]:
        raise DataError(f"query length {z.shape} does not match class means {means.shape[1:]}")
    if metric == "l2":
        diff = means - z
        return np.einsum("ij,ij->i", diff, diff)
    if metric == "cosine":
        nz = np.linalg.norm(z)
        nm = np.linalg.norm(means, axis=1)
        if nz == 0 or np.any(nm == 0):
            raise DataError("cosine measure is undefined for a zero vector")
        return np.clip(-(means @ z) / (nm * nz), -1.0, 1.0)
    raise DataError(f"unknown metric {metric!r}")


class Decision(NamedTuple):
    label: str
    score: float
    accepted: bool


def classify(z, model: ClassModel) -> Decision:
    if not model.labels:
        raise DataError("class model is empty")
    s = scores(z, model.means, model.metric)
    # argmin returns the first minimum: labels are sorted, so ties go to the smaller label
    best = int(np.argmin(s))
    score = float(s[best])
    return Decision(model.labels[best], score, score <= model.threshold)


def calibrate_threshold(train_scores) -> float:
    """Pick the acceptance cut that maximizes training accuracy.

    ``train_scores`` is a sequence of ``(score, is_genuine)``; a score is
    accepted when ``score <= tau``.  Candidates are the midpoints between
    consecutive distinct scores plus the largest score (accept everything).
    Among equally accurate midpoints the one with the widest gap wins.
    """
    pairs = [(float(s), bool(g)) for s, g in train_scores]
    if not pairs:
        raise DataError("no training scores to calibrate on")
    if not any(g for _, g in pairs):
        raise DataError("calibration needs at least one genuine score")
    s = np.array([p[0] for p in pairs])
    genuine = np.array([p[1] for p in pairs])
    distinct = np.unique(s)

    cands = [(float(distinct[-1]), 0.0)]
    for lo, hi in zip(distinct[:-1], distinct[1:]):
        cands.append((float((lo + hi) / 2.0), float(hi - lo)))

    def accuracy(tau):
        accepted = s <= tau
        return np.count_nonzero(accepted == genuine)

    best_tau, best_key = None, None
    for tau, gap in cands:
        key = (accuracy(tau), gap)
        if best_key is None or key > best_key:
            best_tau, best_key = tau, key
    return best_tau


def training_scores(features, labels: Sequence[str], model_labels, means, metric: str):
    """Genuine and impostor calibration scores from the training set itself.

    Each training vector yields a genuine score against its own class mean
    and an impostor score against the closest other class mean.
    """
    out = []
    index = {lab: i for i, lab in enumerate(model_labels)}
    for z, lab in zip(np.asarray(features, dtype=np.float64), labels):
        s = scores(z, means, metric)
        own = index[lab]
        out.append((float(s[own]), True))
        if len(model_labels) > 1:
            out.append((float(np.min(np.delete(s, own))), False))
    return out


def fit_classifier(features, labels: Sequence[str], metric: str = "cosine") -> ClassModel:
    order, means = class_means(features, labels)
    tau = calibrate_threshold(training_scores(features, labels, order, means, metric))
    return ClassModel(tuple(order), means, tau, metric)
