"""
A synthetic open-set benchmark
==============================

Known and unknown classes are vMF components in a 16-dimensional latent
space. One dial, ``hardness``, moves every unknown class from orthogonal to
all known classes (0) to 15 degrees from one of them (1).
"""

import numpy as np

from vmfosr.datagen import SyntheticSpec, generate_class_directions, generate_dataset, openness
from vmfosr.numerics import seeded_rng

for h in (0.0, 0.25, 0.5, 0.75, 1.0):
    dirs = generate_class_directions(SyntheticSpec(hardness=h), seeded_rng(0))
    nearest = np.degrees(np.arccos(np.max(dirs[8:] @ dirs[:8].T, axis=1)))
    print(f"hardness {h:.2f}: unknown-to-nearest-known angle {nearest.mean():5.1f} deg")

# Known classes are kept at least 60 degrees apart.
known = generate_class_directions(SyntheticSpec(), seeded_rng(0))[:8]
off = ~np.eye(8, dtype=bool)
print("closest pair of known classes:", np.degrees(np.arccos((known @ known.T)[off].max())).round(1), "deg")

# The default dataset: 8 known classes for training, 8 more at test time.
train, test = generate_dataset(SyntheticSpec())
print(f"train {train.inputs.shape}, test {test.inputs.shape}, "
      f"{(~test.known).sum()} unknown test samples")
print(f"openness {openness(8, 16):.4f}")
