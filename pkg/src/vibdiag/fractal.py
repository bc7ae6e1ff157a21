"""Time-domain features: box-counting dimension, multi-scale fractal
dimension (fractogram) and kurtosis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRegression,
    EmptyInput,
    InvalidK,
    InvalidParameter,
    TooFewSamples,
    ZeroVariance,
)

# Snap ratios that land within this of an integer before taking ceil, so that
# affinely transformed copies of a signal produce identical counts.
_CEIL_SNAP = 1e-9


@dataclass(frozen=True)
class ResolutionGrid:
    """Box sides (in samples) used for one regression."""

    resolutions: tuple

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolutions)
        if len(res) < 2:
            raise InvalidParameter("a resolution grid needs at least two box sizes")
        if res[0] < 1 or any(b <= a for a, b in zip(res, res[1:])):
            raise InvalidParameter("resolutions must be positive and strictly increasing")
        object.__setattr__(self, "resolutions", res)

    @classmethod
    def linear(cls, eps_min: int, count: int) -> "ResolutionGrid":
        return cls(tuple(j * eps_min for j in range(1, count + 1)))

    @property
    def eps_min(self) -> int:
        return self.resolutions[0]

    @property
    def J(self) -> int:
        return len(self.resolutions)


def _normalize(samples: np.ndarray) -> np.ndarray:
    # amplitude range mapped onto [0, n-1] so one amplitude unit equals one sample step
    lo, hi = samples.min(), samples.max()
    if hi == lo:
        return np.zeros_like(samples)
    return (samples - lo) / (hi - lo) * (samples.size - 1)


def _column_counts(y: np.ndarray, eps: int) -> np.ndarray:
    n = y.size
    n_cols = -(-n // eps)
    padded = np.pad(y, (0, n_cols * eps + 1 - n), mode="edge")
    body = padded[: n_cols * eps].reshape(n_cols, eps)
    # each column also sees the first sample of the next one (the connecting segment)
    shared = padded[eps:: eps][:n_cols]
    span = np.maximum(body.max(axis=1), shared) - np.minimum(body.min(axis=1), shared)
    return np.maximum(1, np.ceil(span / eps - _CEIL_SNAP)).astype(np.int64)


def box_count(samples, eps: int) -> int:
    """Number of ``eps`` x ``eps`` cells touched by the normalized signal graph.

    Time is cut into columns of ``eps`` samples. A column whose graph spans
    ``r`` amplitude units needs ``max(1, ceil(r / eps))`` stacked cells.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("box_count of an empty signal")
    if int(eps) != eps or eps < 1:
        raise InvalidParameter("eps must be a positive integer")
    return int(_column_counts(_normalize(x), int(eps)).sum())


def _box_counts(x: np.ndarray, resolutions) -> np.ndarray:
    y = _normalize(x)
    return np.array([_column_counts(y, eps).sum() for eps in resolutions], dtype=np.float64)


def _ls_slope(inv_eps_log: np.ndarray, count_log: np.ndarray) -> float:
    J = inv_eps_log.size
    sx, sy = inv_eps_log.sum(), count_log.sum()
    denom = J * np.dot(inv_eps_log, inv_eps_log) - sx * sx
    if not abs(denom) > 1e-300:
        raise DegenerateRegression("all ln(1/eps) values coincide")
    return float((J * np.dot(inv_eps_log, count_log) - sx * sy) / denom)


def box_counting_dimension(samples, grid: ResolutionGrid) -> float:
    """Least-squares slope of ln N(eps) against ln(1/eps) over the grid."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("box-counting dimension of an empty signal")
    if x.size < 2 * grid.resolutions[-1]:
        raise TooFewSamples(f"{x.size} samples too short for box side {grid.resolutions[-1]}")
    res = np.asarray(grid.resolutions, dtype=np.float64)
    counts = _box_counts(x, grid.resolutions)
    return _ls_slope(np.log(1.0 / res), np.log(counts))


def mfd(samples, K: int = 13, eps_min: int = 1) -> np.ndarray:
    """Multi-scale fractal dimension vector ``[D^1, ..., D^K]``.

    ``D^k`` regresses over box sides ``eps_min, 2*eps_min, ..., k*eps_min``.
    A single point has no slope, so ``D^1`` uses the two-point slope
    between ``eps_min`` and ``2*eps_min`` (hence ``D^1 == D^2``).
    """
    if int(K) != K or K < 1:
        raise InvalidK(f"K must be a positive integer, got {K!r}")
    if int(eps_min) != eps_min or eps_min < 1:
        raise InvalidParameter("eps_min must be a positive integer")
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("mfd of an empty signal")
    top = max(int(K), 2)
    if x.size < 2 * top * eps_min:
        raise TooFewSamples(f"{x.size} samples too short for MFD size {K} at eps_min {eps_min}")
    res = np.arange(1, top + 1, dtype=np.float64) * eps_min
    X = np.log(1.0 / res)
    Y = np.log(_box_counts(x, res.astype(int)))
    out = np.empty(int(K))
    for k in range(1, int(K) + 1):
        m = max(k, 2)
        out[k - 1] = _ls_slope(X[:m], Y[:m])
    return out


def kurtosis(samples) -> float:
    """Fourth central moment over squared population variance (not excess)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise TooFewSamples("kurtosis needs at least two samples")
    d = x - x.mean()
    var = np.mean(d * d)
    if var == 0.0 or var < 1e-300:
        raise ZeroVariance("kurtosis undefined for a constant signal")
    return float(np.mean(d ** 4) / (var * var))
