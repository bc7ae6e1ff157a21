"""
Four classifiers on the synthetic benchmark
===========================================

Extract features from 200 segments per class, split 70/30 per class,
train SVM, HMM, GMM and ENN, print confusion matrices and check that a
saved bundle predicts exactly like the one in memory.
"""

import tempfile
from pathlib import Path

from vibdiag import FeatureSetSpec, evaluate, extract_features, load_bundle, save_bundle, split, train_all
from vibdiag.signal_io import synthetic_benchmark

segments = synthetic_benchmark(per_class=200, seed=7)
print(len(segments), "segments")

# %%
# Fractal features: 13 box-counting dimensions per segment.
train, test = split(extract_features(segments, FeatureSetSpec("mfd", mfd_k=13)), 0.7, seed=0)
bundle = train_all(train)
for name, cm in evaluate(bundle, test).items():
    print(cm.render(f"{name.upper()} on MFD, accuracy {cm.accuracy:.1f}%"))
    print()

# %%
# Cepstral features with kurtosis appended as an extra frame dimension.
train, test = split(extract_features(segments, FeatureSetSpec("mfcc+kurtosis")), 0.7, seed=0)
bundle = train_all(train)
matrices = evaluate(bundle, test)
print({name: round(cm.accuracy, 2) for name, cm in matrices.items()})

# %%
# Bundles round-trip exactly.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "bundle.vdmb"
    save_bundle(bundle, path)
    again = evaluate(load_bundle(path), test)
print("reloaded bundle agrees:", all((again[n].counts == cm.counts).all() for n, cm in matrices.items()))
