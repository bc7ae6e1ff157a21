"""Diagonal-covariance Gaussian mixture models trained by EM, and a
per-condition bank that diagnoses by maximum summed log-likelihood."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateData,
    DimensionMismatch,
    EmptyObservation,
    InvalidParameter,
    TooFewPoints,
)
from .signal_io import FaultClass

LOG_2PI = np.log(2.0 * np.pi)
VAR_FLOOR = 1e-6


def logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def gaussian_logpdf(x, mean, variances) -> float:
    """Log density of a diagonal-covariance Gaussian."""
    x = np.asarray(x, dtype=np.float64).ravel()
    mean = np.asarray(mean, dtype=np.float64).ravel()
    variances = np.asarray(variances, dtype=np.float64).ravel()
    if not (x.size == mean.size == variances.size):
        raise DimensionMismatch(f"dims {x.size}, {mean.size}, {variances.size} differ")
    d = x - mean
    return float(-0.5 * (x.size * LOG_2PI + np.sum(np.log(variances)) + np.sum(d * d / variances)))


@dataclass(frozen=True)
class GaussianMixtureModel:
    weights: np.ndarray      # (M,)
    means: np.ndarray        # (M, n)
    variances: np.ndarray    # (M, n)
    converged: bool = True
    n_iter: int = 0
    loglik_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        var = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if mu.shape != var.shape or mu.shape[0] != w.size:
            raise DimensionMismatch("weights, means and variances disagree in shape")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidParameter("mixture weights must lie on the simplex")
        if np.any(var <= 0):
            raise InvalidParameter("variances must be positive")
        for name, arr in (("weights", w), ("means", mu), ("variances", var)):
            object.__setattr__(self, name, arr)

    @property
    def M(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_logprob(self, X) -> np.ndarray:
        """``log w_i + log N(x | mu_i, var_i)`` for every row and component, shape (N, M)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"model dim {self.dim}, data dim {X.shape[1]}")
        d = X[:, None, :] - self.means[None, :, :]
        quad = np.sum(d * d / self.variances[None, :, :], axis=2)
        log_norm = -0.5 * (self.dim * LOG_2PI + np.sum(np.log(self.variances), axis=1))
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        return log_w[None, :] + log_norm[None, :] - 0.5 * quad

    def log_likelihood(self, X) -> np.ndarray:
        """Per-row mixture log-likelihood, shape (N,)."""
        return logsumexp(self.component_logprob(X), axis=1)


def mixture_loglik(model: GaussianMixtureModel, x) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    return float(model.log_likelihood(x[None, :])[0])


def kmeans(X: np.ndarray, k: int, rng: np.random.Generator, n_iter: int = 10):
    """Lloyd's algorithm from farthest-point seeding. Returns (centers, assignment)."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    dist = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        centers[j] = X[int(np.argmax(dist))]
        dist = np.minimum(dist, np.sum((X - centers[j]) ** 2, axis=1))
    assign = np.zeros(n, dtype=int)
    for _ in range(n_iter):
        d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        for j in range(k):
            members = X[assign == j]
            if members.shape[0]:
                centers[j] = members.mean(axis=0)
    return centers, assign


def _m_step(X, R, prev_means, prev_vars, var_floor):
    Nk = R.sum(axis=0)
    weights = Nk / Nk.sum()
    means = prev_means.copy()
    variances = prev_vars.copy()
    live = Nk > 1e-300
    if np.any(live):
        Rl = R[:, live]
        means[live] = (Rl.T @ X) / Nk[live, None]
        # centred form; E[x^2] - mu^2 cancels badly for tiny variances
        d = X[:, None, :] - means[None, live, :]
        sq = np.einsum("nk,nkd->kd", Rl, d * d) / Nk[live, None]
        variances[live] = np.maximum(sq, var_floor)
    return weights, means, variances


def init_from_kmeans(X, M, rng, var_floor=VAR_FLOOR, kmeans_iters=10):
    """Seed a mixture with k-means then one M-step on the hard assignment."""
    centers, assign = kmeans(X, M, rng, kmeans_iters)
    R = np.zeros((X.shape[0], M))
    R[np.arange(X.shape[0]), assign] = 1.0
    global_var = np.maximum(X.var(axis=0), var_floor)
    return _m_step(X, R, centers, np.tile(global_var, (M, 1)), var_floor)


def train_em(
    data,
    M: int = 3,
    seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-6,
    var_floor: float = VAR_FLOOR,
) -> GaussianMixtureModel:
    """Fit a diagonal GMM by EM.

    Stops when the mean per-point log-likelihood improves by less than
    ``tol`` or after ``max_iters`` E-steps. Each entry of ``loglik_history``
    is the total dataset log-likelihood of the parameters at that step.
    """
    X = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionMismatch("data must be an (N, n) array")
    if M < 1:
        raise InvalidParameter("M must be positive")
    if X.shape[0] < M:
        raise TooFewPoints(f"{X.shape[0]} points cannot seed {M} components")
    if np.all(X == X[0]):
        raise DegenerateData("all training points are identical")
    rng = np.random.default_rng(seed)
    weights, means, variances = init_from_kmeans(X, M, rng, var_floor)
    n = X.shape[0]
    history = []
    converged = False
    model = GaussianMixtureModel(weights, means, variances)
    for it in range(max_iters):
        model = GaussianMixtureModel(weights, means, variances)
        logp = model.component_logprob(X)
        ll = logsumexp(logp, axis=1)
        total = float(ll.sum())
        history.append(total)
        if it > 0 and (total - history[-2]) < tol * n:
            converged = True
            break
        R = np.exp(logp - ll[:, None])
        weights, means, variances = _m_step(X, R, means, variances, var_floor)
    return GaussianMixtureModel(
        model.weights, model.means, model.variances,
        converged=converged, n_iter=len(history), loglik_history=tuple(history),
    )


def responsibilities(model: GaussianMixtureModel, X) -> np.ndarray:
    logp = model.component_logprob(X)
    return np.exp(logp - logsumexp(logp, axis=1)[:, None])


@dataclass(frozen=True)
class GmmClassifier:
    per_class: dict        # FaultClass -> GaussianMixtureModel

    @property
    def classes(self) -> tuple:
        return tuple(sorted(self.per_class))

    @property
    def F(self) -> int:
        return len(self.per_class)


def train_classifier(data_by_class: dict, M: int = 3, seed: int = 0, max_iters: int = 200,
                     tol: float = 1e-6, var_floor: float = VAR_FLOOR) -> GmmClassifier:
    """One mixture per condition, each fitted only to that condition's vectors."""
    return GmmClassifier({
        FaultClass(c): train_em(X, M, seed=seed, max_iters=max_iters, tol=tol, var_floor=var_floor)
        for c, X in sorted(data_by_class.items())
    })


def classify(classifier: GmmClassifier, vectors) -> tuple:
    """Pick the class maximising the summed log-likelihood of ``vectors``.

    Returns ``(class, scores)``; ties go to the lowest class ordinal.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.size == 0:
        raise EmptyObservation("no observation vectors to classify")
    X = np.atleast_2d(X)
    scores = {c: float(np.sum(classifier.per_class[c].log_likelihood(X))) for c in classifier.classes}
    best = min(classifier.classes, key=lambda c: (-scores[c], int(c)))
    return best, scores
