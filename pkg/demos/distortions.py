"""
Per-epoch distortions
=====================

Each epoch warps every training image with a fresh random rotation,
scaling and translation, and optionally an elastic displacement field.
The output of this script is a set of PGM files showing one glyph under
several draws.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from mcdnn.augment import MNIST_ELASTIC, NORB_DISTORTION, distort, sample_params
from mcdnn.data import synthetic_shapes, write_pnm
from mcdnn.tensor import Rng

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="distort_"))
out.mkdir(parents=True, exist_ok=True)

image = synthetic_shapes(Rng(0), 8, 8, 32).images[6]
write_pnm(out / "original.pgm", image)

rng = Rng(1)
for epoch in range(1, 5):
    write_pnm(out / f"affine_epoch_{epoch}.pgm", distort(rng, image, NORB_DISTORTION))
    write_pnm(out / f"elastic_epoch_{epoch}.pgm", distort(rng, image, MNIST_ELASTIC))
print("wrote previews to", out)

# %%
# The sampled parameters never leave their bounds.
draws = np.array([sample_params(Rng(s), NORB_DISTORTION, 48, 48) for s in range(2000)])
for name, col in zip(("angle", "scale x", "scale y", "shift x", "shift y"), draws.T):
    print(f"{name:8s} in [{col.min():+.3f}, {col.max():+.3f}]")
