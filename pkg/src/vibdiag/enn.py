"""Extension neural network.

Every class owns an interval ``[w_lower, w_upper]`` per feature with center
``z = (w_upper + w_lower) / 2``. A pattern is assigned to the class with
the smallest extension distance

    ED_c(x) = sum_j (|x_j - z_cj| - h_cj) / (|h_cj| + eps) + 1,
    h_cj = (w_upper_cj - w_lower_cj) / 2.

Training is error-driven. When a pattern of class ``t`` is assigned to
class ``p != t``, the interval of ``t`` is shifted toward the pattern and
the interval of ``p`` away from it, each by ``eta * (x - z_old)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, InvalidLearningRate, MissingClass, UnknownClass
from .signal_io import FaultClass

ED_GUARD = 1e-12
DEFAULT_ETA = 0.219


@dataclass(frozen=True)
class EnnModel:
    w_lower: np.ndarray     # (n_classes, n_features)
    w_upper: np.ndarray
    centers: np.ndarray
    eta: float = DEFAULT_ETA
    classes: tuple = tuple(FaultClass)

    def __post_init__(self):
        lo = np.atleast_2d(np.asarray(self.w_lower, dtype=np.float64))
        hi = np.atleast_2d(np.asarray(self.w_upper, dtype=np.float64))
        z = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        if lo.shape != hi.shape or lo.shape != z.shape or lo.shape[0] != len(self.classes):
            raise DimensionMismatch("ENN weight matrices disagree in shape")
        if not 0.0 < self.eta < 1.0:
            raise InvalidLearningRate(f"eta must lie in (0, 1), got {self.eta}")
        object.__setattr__(self, "w_lower", lo)
        object.__setattr__(self, "w_upper", hi)
        object.__setattr__(self, "centers", z)
        object.__setattr__(self, "classes", tuple(FaultClass(int(c)) for c in self.classes))

    @property
    def n_classes(self) -> int:
        return self.w_lower.shape[0]

    @property
    def n_features(self) -> int:
        return self.w_lower.shape[1]

    @classmethod
    def from_bounds(cls, w_lower, w_upper, eta=DEFAULT_ETA, classes=tuple(FaultClass)):
        lo = np.asarray(w_lower, dtype=np.float64)
        hi = np.asarray(w_upper, dtype=np.float64)
        return cls(lo, hi, (hi + lo) / 2.0, eta, classes)

    def row(self, cls_) -> int:
        try:
            return self.classes.index(FaultClass(int(cls_)))
        except ValueError:
            raise UnknownClass(f"class {cls_!r} not in model") from None


def _check_x(model: EnnModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != model.n_features:
        raise DimensionMismatch(f"model has {model.n_features} features, pattern has {x.size}")
    return x


def _distances(model: EnnModel, x: np.ndarray) -> np.ndarray:
    half = (model.w_upper - model.w_lower) / 2.0
    terms = (np.abs(x[None, :] - model.centers) - half) / (np.abs(half) + ED_GUARD) + 1.0
    return terms.sum(axis=1)


def extension_distance(model: EnnModel, class_index, x) -> float:
    x = _check_x(model, x)
    if isinstance(class_index, FaultClass):
        r = model.row(class_index)
    else:
        r = int(class_index)
        if not 0 <= r < model.n_classes:
            raise UnknownClass(f"class index {class_index} out of range")
    return float(_distances(model, x)[r])


def classify(model: EnnModel, x) -> tuple:
    """Return ``(class, distances)``; the smallest ED wins, ties to the lowest ordinal."""
    x = _check_x(model, x)
    d = _distances(model, x)
    order = sorted(range(model.n_classes), key=lambda r: (d[r], int(model.classes[r])))
    return model.classes[order[0]], {c: float(v) for c, v in zip(model.classes, d)}


def initialize(X, labels, eta: float = DEFAULT_ETA, classes=tuple(FaultClass)) -> EnnModel:
    """Intervals spanning each class's per-feature training min and max."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = np.asarray([int(c) for c in labels])
    classes = tuple(sorted(FaultClass(int(c)) for c in classes))
    missing = [c.display for c in classes if not np.any(labels == c)]
    if missing:
        raise MissingClass(f"no training patterns for {', '.join(missing)}")
    lo = np.vstack([X[labels == c].min(axis=0) for c in classes])
    hi = np.vstack([X[labels == c].max(axis=0) for c in classes])
    return EnnModel.from_bounds(lo, hi, eta, classes)


def update(model: EnnModel, x, true_class) -> tuple:
    """One error-driven step. Returns ``(model, was_misclassified)``."""
    x = _check_x(model, x)
    predicted, _ = classify(model, x)
    true_class = FaultClass(int(true_class))
    if predicted == true_class:
        return model, False
    lo, hi, z = model.w_lower.copy(), model.w_upper.copy(), model.centers
    t, p = model.row(true_class), model.row(predicted)
    pull = model.eta * (x - z[t])
    push = model.eta * (x - z[p])
    lo[t] += pull
    hi[t] += pull
    lo[p] -= push
    hi[p] -= push
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    return replace(model, w_lower=lo, w_upper=hi, centers=(hi + lo) / 2.0), True


def train(model: EnnModel, X, labels, epochs: int = 50, eta=None) -> tuple:
    """Sweep the patterns in order for up to ``epochs`` epochs.

    Returns ``(model, epoch_error_curve)`` where each curve entry is the
    fraction of patterns misclassified during that epoch. Stops early once
    an epoch makes no mistakes, since later epochs would change nothing.
    """
    if eta is not None:
        if not 0.0 < eta < 1.0:
            raise InvalidLearningRate(f"eta must lie in (0, 1), got {eta}")
        model = replace(model, eta=float(eta))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = [FaultClass(int(c)) for c in labels]
    missing = [c.display for c in model.classes if c not in labels]
    if missing:
        raise MissingClass(f"no training patterns for {', '.join(missing)}")
    curve = []
    for _ in range(int(epochs)):
        errors = 0
        for x, c in zip(X, labels):
            model, wrong = update(model, x, c)
            errors += wrong
        curve.append(errors / len(labels))
        if errors == 0:
            break
    return model, curve


def fit(X, labels, eta: float = DEFAULT_ETA, epochs: int = 50, classes=tuple(FaultClass)) -> tuple:
    """Initialize from class min/max boxes, then train."""
    return train(initialize(X, labels, eta, classes), X, labels, epochs)
