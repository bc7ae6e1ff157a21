"""
Features of a faulty bearing
============================

Synthesize one recording per bearing condition, cut it into five-revolution
segments and look at the three feature families on each class.
"""

import numpy as np

from vibdiag import FaultClass, generate_synthetic, segment
from vibdiag.cepstral import MfccConfig, mfcc_segment
from vibdiag.fractal import kurtosis, mfd

np.set_printoptions(precision=3, suppress=True, linewidth=110)

# Four seconds per class at 12 kHz and 1797 rpm gives 23 segments of 2003 samples.
signals = {fc: generate_synthetic(fc, 4.0, seed=0) for fc in FaultClass}
segments = {fc: segment(sig) for fc, sig in signals.items()}
print("segments per class:", {fc.display: len(s) for fc, s in segments.items()})
print("segment length:", len(segments[FaultClass.NORMAL][0]))

# %%
# Multi-scale fractal dimension: one box-counting dimension per resolution set.
# Impulsive faults roughen the waveform at fine scales.
for fc, segs in segments.items():
    profile = np.mean([mfd(s.samples, K=8) for s in segs], axis=0)
    print(f"{fc.display:<7} MFD", profile)

# %%
# Shaft harmonics keep the healthy bearing below the Gaussian value of 3;
# fault impulses lift the others above it.
for fc, segs in segments.items():
    k = [kurtosis(s.samples) for s in segs]
    print(f"{fc.display:<7} kurtosis {np.mean(k):6.2f} +- {np.std(k):.2f}")

# %%
# MFCC: 14 frames per segment, 13 coefficients per frame.
cfg = MfccConfig()
for fc, segs in segments.items():
    coeffs = mfcc_segment(segs[0], cfg)
    print(f"{fc.display:<7} MFCC {coeffs.shape}, frame-mean of c1..c4:", coeffs.mean(axis=0)[1:5])
