"""Soft-margin kernel SVM trained by sequential minimal optimization.

The binary solver follows Platt's SMO: an outer loop alternates between
sweeps over all points and sweeps over unbound points, picking the first
KKT violator; the partner is the unbound point maximising ``|E1 - E2|``,
falling back to scans of the unbound set and then the full set.

Multiclass problems are handled one-vs-one with majority voting.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, MissingClass, SingleClassData
from .signal_io import FaultClass


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "polynomial"
    degree: int = 5
    bandwidth_sq: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "gaussian"):
            raise InvalidParameter(f"unknown kernel {self.kind!r}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise InvalidParameter("polynomial degree must be a positive integer")
        if self.kind == "gaussian" and not self.bandwidth_sq > 0:
            raise InvalidParameter("gaussian bandwidth must be positive")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def polynomial(cls, degree: int = 5):
        return cls("polynomial", degree=degree)

    @classmethod
    def gaussian(cls, bandwidth_sq: float = 1.0):
        return cls("gaussian", bandwidth_sq=bandwidth_sq)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "degree": int(self.degree), "bandwidth_sq": float(self.bandwidth_sq)}


def gram(spec: KernelSpec, X, Y=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"kernel inputs have dims {X.shape[1]} and {Y.shape[1]}")
    if spec.kind == "gaussian":
        sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
        return np.exp(-np.maximum(sq, 0.0) / spec.bandwidth_sq)
    dot = X @ Y.T
    if spec.kind == "linear":
        return dot
    return (dot + 1.0) ** int(spec.degree)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"kernel inputs have dims {x.size} and {y.size}")
    if spec.kind == "gaussian":
        d = x - y
        return float(np.exp(-np.dot(d, d) / spec.bandwidth_sq))
    dot = float(np.dot(x, y))
    if spec.kind == "linear":
        return dot
    return (dot + 1.0) ** int(spec.degree)


@dataclass(frozen=True)
class BinarySvmModel:
    support_vectors: np.ndarray   # (m, d)
    alphas: np.ndarray            # (m,)
    labels: np.ndarray            # (m,) of +-1
    bias: float
    kernel: KernelSpec
    C: float
    converged: bool = True
    n_features: int = 0

    def __post_init__(self):
        sv = np.asarray(self.support_vectors, dtype=np.float64)
        if sv.ndim == 1:
            sv = sv.reshape(-1, self.n_features or 1) if sv.size else np.zeros((0, self.n_features or 0))
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=np.float64).ravel())
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.float64).ravel())
        if not self.n_features:
            object.__setattr__(self, "n_features", int(sv.shape[1]))

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        if self.alphas.size == 0:
            return np.full(X.shape[0], self.bias)
        return gram(self.kernel, X, self.support_vectors) @ (self.alphas * self.labels) + self.bias


def predict_binary(model: BinarySvmModel, x) -> tuple:
    """Return ``(score, sign)`` with ``sign(0) == +1``."""
    score = float(model.decision_function(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
    return score, (1 if score >= 0 else -1)


def dual_objective(alpha, y, K) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


class _Smo:
    def __init__(self, K, y, C, tol, eps, on_step):
        self.K, self.y, self.C, self.tol, self.eps = K, y, C, tol, eps
        n = y.size
        self.alpha = np.zeros(n)
        self.b = 0.0
        self.E = -y.astype(np.float64)   # f(x_i) - y_i with f == 0
        self.on_step = on_step

    def _unbound(self):
        return np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))

    def _snap(self, a):
        # roundoff would otherwise leave a multiplier a hair inside its box
        if a < self.C * 1e-12:
            return 0.0
        if a > self.C * (1.0 - 1e-12):
            return self.C
        return a

    def take_step(self, i1, i2) -> bool:
        if i1 == i2:
            return False
        K, y, C = self.K, self.y, self.C
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = y[i1], y[i2]
        E1, E2 = self.E[i1], self.E[i2]
        s = y1 * y2
        if s < 0:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            L, H = max(0.0, a2 + a1 - C), min(C, a2 + a1)
        if L >= H:
            return False
        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2n = min(H, max(L, a2 + y2 * (E1 - E2) / eta))
        else:
            # objective gain along the constraint line at each end
            def gain(a):
                d = a - a2
                return d * y2 * (E1 - E2) - 0.5 * eta * d * d
            gl, gh = gain(L), gain(H)
            if gl > gh + self.eps:
                a2n = L
            elif gh > gl + self.eps:
                a2n = H
            else:
                return False
        if abs(a2n - a2) < self.eps * (a2n + a2 + self.eps):
            return False
        a1n = a1 + s * (a2 - a2n)
        if a1n < 0.0:
            a2n += s * a1n
            a1n = 0.0
        elif a1n > C:
            a2n += s * (a1n - C)
            a1n = C
        a1n, a2n = self._snap(a1n), self._snap(a2n)
        d1, d2 = y1 * (a1n - a1), y2 * (a2n - a2)
        b1 = self.b - E1 - d1 * k11 - d2 * k12
        b2 = self.b - E2 - d1 * k12 - d2 * k22
        if 0.0 < a1n < C:
            bn = b1
        elif 0.0 < a2n < C:
            bn = b2
        else:
            bn = 0.5 * (b1 + b2)
        self.E += d1 * K[:, i1] + d2 * K[:, i2] + (bn - self.b)
        self.alpha[i1], self.alpha[i2] = a1n, a2n
        self.b = bn
        if self.on_step is not None:
            self.on_step(self.alpha.copy(), self.b)
        return True

    def examine(self, i2) -> int:
        y2, a2, E2 = self.y[i2], self.alpha[i2], self.E[i2]
        r2 = E2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return 0
        unbound = self._unbound()
        if unbound.size > 1:
            i1 = int(unbound[np.argmax(np.abs(self.E[unbound] - E2))])
            if self.take_step(i1, i2):
                return 1
        start = i2 % max(unbound.size, 1)
        for i1 in np.roll(unbound, -start):
            if self.take_step(int(i1), i2):
                return 1
        n = self.y.size
        for i1 in np.roll(np.arange(n), -(i2 + 1)):
            if self.take_step(int(i1), i2):
                return 1
        return 0

    def run(self, max_passes):
        """Platt's sweeps for up to half the budget, then pair polishing."""
        platt_budget = -(-max_passes // 2)
        changed, examine_all, passes = 0, True, 0
        while (changed > 0 or examine_all) and passes < platt_budget:
            changed = 0
            idx = range(self.y.size) if examine_all else self._unbound()
            for i in idx:
                changed += self.examine(int(i))
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True
            passes += 1
        return passes + self.polish(max_passes - passes)

    def _violators(self):
        """Indices and values of the extreme ``F = E - b`` over the up/low sets."""
        a, y, C = self.alpha, self.y, self.C
        F = self.E - self.b
        up = ((y > 0) & (a < C)) | ((y < 0) & (a > 0))
        low = ((y > 0) & (a > 0)) | ((y < 0) & (a < C))
        i_up = np.flatnonzero(up)[np.argmin(F[up])] if up.any() else None
        i_low = np.flatnonzero(low)[np.argmax(F[low])] if low.any() else None
        return i_up, i_low, F

    def polish(self, budget_passes) -> int:
        """Step on the maximal violating pair until the KKT gap is within
        tolerance, then place the bias mid-way in its feasible interval.

        Platt's heuristics can stall with free multipliers whose violation
        comes from the bias alone; this closes the gap. Every ``n`` steps
        count as one pass against the caller's budget.
        """
        n = self.y.size
        steps = 0
        while steps < budget_passes * n:
            i_up, i_low, F = self._violators()
            if i_up is None or i_low is None or F[i_low] <= F[i_up] + 2 * self.tol:
                break
            if not self.take_step(int(i_up), int(i_low)):
                break
            steps += 1
        i_up, i_low, F = self._violators()
        if i_up is not None and i_low is not None:
            b = -0.5 * (F[i_up] + F[i_low])
            self.E += b - self.b
            self.b = b
        return -(-steps // n)

    def kkt_ok(self) -> bool:
        yf = self.y * (self.E + self.y)
        a, C, tol = self.alpha, self.C, self.tol
        at_zero = a <= 0
        at_c = a >= C
        free = ~(at_zero | at_c)
        return bool(
            np.all(yf[at_zero] >= 1 - tol)
            and np.all(np.abs(yf[free] - 1) <= tol)
            and np.all(yf[at_c] <= 1 + tol)
        )


def train_binary(
    X,
    y,
    kernel: KernelSpec = KernelSpec(),
    C: float = 10.0,
    tol: float = 1e-3,
    max_passes: int = 100,
    on_step: Optional[Callable] = None,
    return_alphas: bool = False,
):
    """Train a binary SVM on rows of ``X`` with labels ``y`` in {-1, +1}.

    ``max_passes`` caps the work: Platt's sweeps use at most half of it and
    maximal-violating-pair polishing the rest, ``n`` pair steps per pass. If
    the final solution still violates the KKT conditions by more than
    ``tol``, the model comes back with ``converged=False`` instead of raising.
    ``on_step(alpha, b)`` is called after every accepted pair update.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise DimensionMismatch("X and y lengths differ")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise InvalidParameter("labels must be -1 or +1")
    if y.size < 2 or np.all(y == y[0]):
        raise SingleClassData("binary SVM needs both labels present")
    if not C > 0:
        raise InvalidParameter("C must be positive")
    K = gram(kernel, X)
    smo = _Smo(K, y, float(C), float(tol), 1e-12, on_step)
    passes = smo.run(int(max_passes))
    converged = smo.kkt_ok()
    sv = smo.alpha > 0
    model = BinarySvmModel(
        support_vectors=X[sv],
        alphas=smo.alpha[sv],
        labels=y[sv],
        bias=float(smo.b),
        kernel=kernel,
        C=float(C),
        converged=bool(converged),
        n_features=X.shape[1],
    )
    if return_alphas:
        return model, smo.alpha.copy()
    return model


@dataclass(frozen=True)
class MulticlassSvmModel:
    pairwise: dict                  # (class_a, class_b) with a < b -> BinarySvmModel (+1 means a)
    classes: tuple = field(default_factory=tuple)

    @property
    def n_features(self) -> int:
        return next(iter(self.pairwise.values())).n_features


def train_multiclass(
    X,
    labels,
    kernel: KernelSpec = KernelSpec(),
    C: float = 10.0,
    tol: float = 1e-3,
    max_passes: int = 100,
    classes=tuple(FaultClass),
) -> MulticlassSvmModel:
    """One binary SVM per unordered class pair, trained on that pair's rows."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = np.asarray([int(c) for c in labels])
    classes = tuple(sorted(FaultClass(int(c)) for c in classes))
    present = set(labels.tolist())
    if len(present) < 2:
        raise SingleClassData("multiclass SVM needs at least two classes")
    missing = [c for c in classes if int(c) not in present]
    if missing:
        raise MissingClass(f"no training data for {', '.join(c.display for c in missing)}")
    pairwise = {}
    for a, b in itertools.combinations(classes, 2):
        mask = (labels == a) | (labels == b)
        y = np.where(labels[mask] == a, 1.0, -1.0)
        pairwise[(a, b)] = train_binary(X[mask], y, kernel, C, tol, max_passes)
    return MulticlassSvmModel(pairwise=pairwise, classes=classes)


def predict_multiclass(model: MulticlassSvmModel, x) -> FaultClass:
    return FaultClass(vote_multiclass(model, x)[0])


def vote_multiclass(model: MulticlassSvmModel, x) -> tuple:
    """Majority vote; ties go to the larger summed ``|score|`` of won duels,
    then to the lowest ordinal. Returns ``(class, votes, margins)``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    votes = {c: 0 for c in model.classes}
    margin = {c: 0.0 for c in model.classes}
    for (a, b), clf in model.pairwise.items():
        score, sign = predict_binary(clf, x)
        winner = a if sign > 0 else b
        votes[winner] += 1
        margin[winner] += abs(score)
    best = min(model.classes, key=lambda c: (-votes[c], -margin[c], int(c)))
    return best, votes, margin
