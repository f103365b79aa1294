"""
Open-set metrics on toy scores
==============================

AUROC only cares about ranking knowns above unknowns. OSCR also asks that
the accepted knowns be classified correctly. DTACC picks the best single
threshold.
"""

import numpy as np

from vmfosr.metrics import auroc, dtacc, oscr, oscr_curve
from vmfosr.numerics import seeded_rng

rng = seeded_rng(0)
known = rng.normal(1.0, 1.0, 200)
unknown = rng.normal(0.0, 1.0, 200)
correct = rng.uniform(size=200) < 0.9

print(f"AUROC {auroc(known, unknown):.4f}")
print(f"DTACC {dtacc(known, unknown):.4f}")
print(f"OSCR  {oscr((known, correct), unknown):.4f}  (closed-set accuracy {correct.mean():.2f})")

# Push every unknown below every known: OSCR collapses to plain accuracy.
separated = oscr((known - known.min() + 1, correct), unknown - unknown.max())
print(f"OSCR with perfect separation {separated} == accuracy {correct.mean()}")

fpr, ccr = oscr_curve(known, correct, unknown)
for target in (0.01, 0.05, 0.1):
    print(f"CCR at FPR <= {target:.2f}: {ccr[fpr <= target].max():.3f}")
