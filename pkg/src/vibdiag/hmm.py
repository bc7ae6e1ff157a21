"""Continuous-emission hidden Markov models.

Each state emits through its own diagonal Gaussian mixture. Likelihoods
use the scaled forward recursion, decoding uses a max-product pass, and
training is Baum-Welch over a set of observation sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySequence,
    InvalidParameter,
    TooFewObservations,
)
from .gmm import VAR_FLOOR, GaussianMixtureModel, _m_step, init_from_kmeans, kmeans, logsumexp
from .signal_io import FaultClass


@dataclass(frozen=True)
class HmmModel:
    pi: np.ndarray             # (N,)
    A: np.ndarray              # (N, N) row-stochastic
    emissions: tuple           # N GaussianMixtureModels sharing a dimension
    converged: bool = True
    n_iter: int = 0
    loglik_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        N = pi.size
        if A.shape != (N, N) or len(self.emissions) != N:
            raise DimensionMismatch("pi, A and emissions disagree on the state count")
        if np.any(pi < 0) or abs(pi.sum() - 1) > 1e-9:
            raise InvalidParameter("pi must lie on the simplex")
        if np.any(A < 0) or np.any(np.abs(A.sum(axis=1) - 1) > 1e-9):
            raise InvalidParameter("A must be row-stochastic")
        if len({g.dim for g in self.emissions}) != 1:
            raise DimensionMismatch("emission mixtures must share a dimension")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "emissions", tuple(self.emissions))

    @property
    def N(self) -> int:
        return self.pi.size

    @property
    def dim(self) -> int:
        return self.emissions[0].dim


def _as_obs(obs, dim=None) -> np.ndarray:
    O = np.asarray(obs, dtype=np.float64)
    if O.size == 0:
        raise EmptySequence("observation sequence is empty")
    if O.ndim == 1:
        O = O[:, None]
    if dim is not None and O.shape[1] != dim:
        raise DimensionMismatch(f"model dim {dim}, observation dim {O.shape[1]}")
    return O


def emission_logprob(model: HmmModel, obs) -> np.ndarray:
    """``log b_j(o_t)``, shape (T, N)."""
    O = _as_obs(obs, model.dim)
    return np.stack([g.log_likelihood(O) for g in model.emissions], axis=1)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _forward_scaled(pi, A, logB):
    """Batched scaled forward pass.

    ``logB`` has shape (S, T, N). Returns normalized alphas (S, T, N), the
    per-step log scale factors (S, T), the per-step shifts (S, T) and the
    shifted emission likelihoods so that ``log P = sum(log_scale + shift)``.
    Steps whose shifted mass underflows are redone in the log domain.
    """
    S, T, N = logB.shape
    shift = logB.max(axis=2)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    Bt = np.exp(logB - shift[:, :, None])
    alpha = np.empty((S, T, N))
    log_scale = np.empty((S, T))
    for t in range(T):
        pred = np.broadcast_to(pi, (S, N)) if t == 0 else alpha[:, t - 1] @ A
        a = pred * Bt[:, t]
        c = a.sum(axis=1)
        low = ~(c > 1e-250)
        if np.any(low):
            la = _log(pred[low]) + logB[low, t] - shift[low, t, None]
            m = la.max(axis=1, keepdims=True)
            m = np.where(np.isfinite(m), m, 0.0)
            a[low] = np.exp(la - m)
            c = c.copy()
            c[low] = a[low].sum(axis=1)
            log_scale[low, t] = m[:, 0] + _log(c[low])
        log_scale[~low, t] = np.log(c[~low])
        with np.errstate(invalid="ignore", divide="ignore"):
            alpha[:, t] = a / c[:, None]
    return alpha, log_scale, shift, Bt


def forward_loglik(model: HmmModel, obs, return_scales: bool = False):
    """``log P(O | model)`` by the scaled forward recursion."""
    logB = emission_logprob(model, obs)[None]
    _, log_scale, shift, _ = _forward_scaled(model.pi, model.A, logB)
    ll = float(np.sum(log_scale[0] + shift[0]))
    if return_scales:
        return ll, np.exp(log_scale[0])
    return ll


def viterbi(model: HmmModel, obs) -> tuple:
    """Most probable state path and its joint log-probability.

    Exact ties are resolved towards the lower-numbered state at the first
    step where tied paths differ.
    """
    logB = emission_logprob(model, obs)
    T, N = logB.shape
    logA, logpi = _log(model.A), _log(model.pi)
    # best log-prob of the remainder of the sequence after being in state i at t
    future = np.zeros((T, N))
    for t in range(T - 2, -1, -1):
        future[t] = np.max(logA + (logB[t + 1] + future[t + 1])[None, :], axis=1)
    path = np.empty(T, dtype=int)
    path[0] = int(np.argmax(logpi + logB[0] + future[0]))
    for t in range(1, T):
        path[t] = int(np.argmax(logA[path[t - 1]] + logB[t] + future[t]))
    log_prob = logpi[path[0]] + logB[0, path[0]]
    for t in range(1, T):
        log_prob += logA[path[t - 1], path[t]] + logB[t, path[t]]
    return path, float(log_prob)


def _group_by_length(seqs):
    groups = {}
    for i, s in enumerate(seqs):
        groups.setdefault(s.shape[0], []).append(i)
    return groups


def _init_model(X, N, M, rng, var_floor):
    if N > 1:
        _, assign = kmeans(X, N, rng)
    else:
        assign = np.zeros(X.shape[0], dtype=int)
    emissions = []
    for j in range(N):
        Xj = X[assign == j]
        if Xj.shape[0] < M or np.all(Xj == Xj[0]):
            Xj = X
        w, mu, var = init_from_kmeans(Xj, M, rng, var_floor)
        emissions.append(GaussianMixtureModel(w, mu, var))
    pi = 1.0 + 0.01 * rng.uniform(size=N)
    A = 1.0 + 0.01 * rng.uniform(size=(N, N))
    return pi / pi.sum(), A / A.sum(axis=1, keepdims=True), emissions


def train_baum_welch(
    sequences,
    N: int = 2,
    M: int = 10,
    seed: int = 0,
    max_iters: int = 200,
    tol: float = 1e-4,
    var_floor: float = VAR_FLOOR,
) -> HmmModel:
    """Fit an ergodic HMM with GMM emissions by Baum-Welch.

    Stops when the mean per-frame log-likelihood improves by less than
    ``tol`` or after ``max_iters`` E-steps.
    """
    seqs = [_as_obs(s) for s in sequences]
    if not seqs:
        raise TooFewObservations("no training sequences")
    dim = seqs[0].shape[1]
    if any(s.shape[1] != dim for s in seqs):
        raise DimensionMismatch("training sequences disagree on dimension")
    if N < 1 or M < 1:
        raise InvalidParameter("N and M must be positive")
    X = np.vstack(seqs)
    n_frames = X.shape[0]
    if n_frames < N * M:
        raise TooFewObservations(f"{n_frames} frames cannot support {N} states x {M} mixtures")
    rng = np.random.default_rng(seed)
    pi, A, emissions = _init_model(X, N, M, rng, var_floor)
    groups = _group_by_length(seqs)
    stacks = {T: np.stack([seqs[i] for i in idx]) for T, idx in groups.items()}

    history, converged = [], False
    model = HmmModel(pi, A, emissions)
    for it in range(max_iters):
        model = HmmModel(pi, A, emissions)
        total = 0.0
        pi_acc = np.zeros(N)
        xi_acc = np.zeros((N, N))
        frames, resp = [], [[] for _ in range(N)]
        for T, O in stacks.items():
            S = O.shape[0]
            flat = O.reshape(S * T, dim)
            comp = np.stack([g.component_logprob(flat) for g in emissions], axis=1)   # (S*T, N, M)
            logB_flat = logsumexp(comp, axis=2)
            logB = logB_flat.reshape(S, T, N)
            alpha, log_scale, shift, Bt = _forward_scaled(pi, A, logB)
            total += float(np.sum(log_scale + shift))
            scale = np.maximum(np.exp(log_scale), 1e-300)
            beta = np.ones((S, T, N))
            for t in range(T - 2, -1, -1):
                beta[:, t] = ((Bt[:, t + 1] * beta[:, t + 1]) @ A.T) / scale[:, t + 1, None]
            gamma = alpha * beta
            gamma /= gamma.sum(axis=2, keepdims=True)
            pi_acc += gamma[:, 0].sum(axis=0)
            if T > 1:
                nxt = Bt[:, 1:] * beta[:, 1:] / scale[:, 1:, None]            # (S, T-1, N)
                xi_acc += A * np.einsum("sti,stj->ij", alpha[:, :-1], nxt)
            g_flat = gamma.reshape(S * T, N)
            within = np.exp(comp - logB_flat[:, :, None])                      # (S*T, N, M)
            frames.append(flat)
            for j in range(N):
                resp[j].append(g_flat[:, j, None] * within[:, j, :])
        history.append(total)
        if it > 0 and (total - history[-2]) < tol * n_frames:
            converged = True
            break
        pi = pi_acc / pi_acc.sum()
        row = xi_acc.sum(axis=1, keepdims=True)
        A = np.where(row > 1e-300, xi_acc / np.where(row > 0, row, 1.0), A)
        Xall = np.vstack(frames)
        new_em = []
        for j, g in enumerate(emissions):
            R = np.vstack(resp[j])
            if R.sum() <= 1e-300:
                new_em.append(g)
                continue
            w, mu, var = _m_step(Xall, R, g.means, g.variances, var_floor)
            new_em.append(GaussianMixtureModel(w, mu, var))
        emissions = new_em
    return HmmModel(
        model.pi, model.A, model.emissions,
        converged=converged, n_iter=len(history), loglik_history=tuple(history),
    )


def classify(bank: dict, obs) -> tuple:
    """Condition whose HMM gives the highest forward log-likelihood.

    Returns ``(class, scores)``; ties go to the lowest class ordinal.
    """
    classes = sorted(FaultClass(int(c)) for c in bank)
    scores = {c: forward_loglik(bank[c], obs) for c in classes}
    best = min(classes, key=lambda c: (-scores[c], int(c)))
    return best, scores
