"""
Sensitivity to the MFD size and the MFCC count
==============================================

Retrain every classifier for each MFD size in 2..20 and each MFCC count
in 9..16 on a fixed split, and report how much each accuracy moves.
"""

from vibdiag import TrainConfig, sweep
from vibdiag.signal_io import synthetic_benchmark

segments = synthetic_benchmark(per_class=100, seed=3)
config = TrainConfig(seed=0)

for parameter in ("mfd_k", "mfcc_l"):
    result = sweep(parameter, segments, config)
    print(result.to_csv())
    for name in result.accuracy:
        print(f"  {name}: spread {result.spread(name):.2f} points, best {parameter}={result.best_value(name)}")
    print()
