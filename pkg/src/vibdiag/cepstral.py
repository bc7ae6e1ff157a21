"""Mel-frequency cepstral coefficients for vibration frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    FrameTooLong,
    InvalidLength,
    InvalidParameter,
    NegativeFrequency,
    TooManyCoefficients,
    TooManyFilters,
)
from .signal_io import frame as split_frames

LOG_FLOOR = 1e-12


def hamming_window(n: int) -> np.ndarray:
    """Raised-cosine window scaled to unit RMS.

    Two points give the all-zero window, which no scale brings to unit RMS,
    so the shortest accepted length is 3.
    """
    if int(n) != n or n < 3:
        raise InvalidLength(f"window length must be an integer >= 3, got {n!r}")
    k = np.arange(n)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * k / (n - 1))
    return w / np.sqrt(np.mean(w * w))


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def power_spectrum(frame, fft_size: int) -> np.ndarray:
    """Squared magnitudes of bins ``0..fft_size/2`` of the windowed,
    zero-padded frame, with the DFT scaled by ``1/fft_size``."""
    x = np.asarray(frame, dtype=np.float64).ravel()
    if not _is_pow2(int(fft_size)):
        raise InvalidParameter(f"fft_size must be a power of two, got {fft_size}")
    if x.size > fft_size:
        raise FrameTooLong(f"frame of {x.size} samples exceeds fft_size {fft_size}")
    spec = np.fft.rfft(x * hamming_window(x.size), n=fft_size) / fft_size
    return spec.real ** 2 + spec.imag ** 2


def hz_to_mel(f_hz):
    f = np.asarray(f_hz, dtype=np.float64)
    if np.any(f < 0):
        raise NegativeFrequency("frequency must be nonnegative")
    mel = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(mel) if mel.ndim == 0 else mel


def mel_to_hz(mel):
    m = np.asarray(mel, dtype=np.float64)
    hz = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(hz) if hz.ndim == 0 else hz


@dataclass(frozen=True)
class MelFilterbank:
    n_filters: int
    sample_rate_hz: float
    fft_size: int
    weights: np.ndarray          # (n_filters, fft_size // 2 + 1)
    center_freqs_hz: np.ndarray
    boundary_mels: np.ndarray    # n_filters + 2 points, uniform in mel
    boundary_bins: np.ndarray


def build_filterbank(n_filters: int = 26, sample_rate_hz: float = 12000.0, fft_size: int = 256) -> MelFilterbank:
    if n_filters < 2:
        raise InvalidParameter("need at least two filters")
    if not _is_pow2(int(fft_size)):
        raise InvalidParameter(f"fft_size must be a power of two, got {fft_size}")
    if not sample_rate_hz > 0:
        raise InvalidParameter("sample_rate_hz must be positive")
    n_bins = fft_size // 2 + 1
    mels = np.linspace(0.0, hz_to_mel(sample_rate_hz / 2.0), n_filters + 2)
    hz = mel_to_hz(mels)
    bins = np.floor(hz / sample_rate_hz * fft_size + 0.5).astype(int)
    bins = np.clip(bins, 0, n_bins - 1)
    if np.any(np.diff(bins) <= 0):
        raise TooManyFilters(
            f"{n_filters} filters collide on a {fft_size}-point bin grid at {sample_rate_hz:g} Hz"
        )
    weights = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        lo, mid, hi = bins[i], bins[i + 1], bins[i + 2]
        k = np.arange(lo, mid + 1)
        weights[i, lo:mid + 1] = (k - lo) / (mid - lo)
        k = np.arange(mid, hi + 1)
        weights[i, mid:hi + 1] = (hi - k) / (hi - mid)
    weights.flags.writeable = False
    return MelFilterbank(
        n_filters=int(n_filters),
        sample_rate_hz=float(sample_rate_hz),
        fft_size=int(fft_size),
        weights=weights,
        center_freqs_hz=hz[1:-1],
        boundary_mels=mels,
        boundary_bins=bins,
    )


def dct_matrix(n_filters: int, L: int) -> np.ndarray:
    """Rows ``cos(m*pi*(n + 0.5)/n_filters)`` for ``m = 0..L-1``."""
    m = np.arange(L)[:, None]
    n = np.arange(n_filters)[None, :]
    return np.cos(m * np.pi * (n + 0.5) / n_filters)


def inverse_dct(coeffs) -> np.ndarray:
    """Invert the full-length cosine transform back to log energies."""
    c = np.asarray(coeffs, dtype=np.float64)
    nf = c.size
    basis = dct_matrix(nf, nf)
    scale = np.full(nf, 2.0 / nf)
    scale[0] = 1.0 / nf
    return (scale * c) @ basis


def filter_energies(frame, bank: MelFilterbank) -> np.ndarray:
    return bank.weights @ power_spectrum(frame, bank.fft_size)


def mfcc(frame, bank: MelFilterbank, L: int = 13) -> np.ndarray:
    if L < 1 or L > bank.n_filters:
        raise TooManyCoefficients(f"L={L} must lie in [1, {bank.n_filters}]")
    log_e = np.log10(np.maximum(filter_energies(frame, bank), LOG_FLOOR))
    return dct_matrix(bank.n_filters, L) @ log_e


@dataclass(frozen=True)
class MfccConfig:
    n_frames: int = 14
    fft_size: int = 256
    n_filters: int = 26
    L: int = 13


def mfcc_segment(segment, config: MfccConfig = MfccConfig(), sample_rate_hz=None) -> np.ndarray:
    """``n_frames x L`` MFCC matrix of one segment."""
    if sample_rate_hz is None:
        sample_rate_hz = getattr(segment, "sample_rate_hz", 12000.0)
    bank = _cached_bank(config.n_filters, float(sample_rate_hz), config.fft_size)
    return np.vstack([mfcc(fr.samples, bank, config.L) for fr in split_frames(segment, config.n_frames)])


_BANKS: dict = {}


def _cached_bank(n_filters, sample_rate_hz, fft_size) -> MelFilterbank:
    key = (n_filters, sample_rate_hz, fft_size)
    if key not in _BANKS:
        _BANKS[key] = build_filterbank(n_filters, sample_rate_hz, fft_size)
    return _BANKS[key]
