"""
Contrast normalizations
=======================

The four intensity normalizations used in front of colour columns, applied
to a natural photograph. Histogram equalization flattens the global
histogram; the adaptive version does so per tile and blends neighbouring
tile mappings; imadjust stretches so 1% saturates at each end; conorm
keeps band-pass structure only.
"""

import numpy as np
from skimage import data

from mcdnn.data import bytes_to_unit
from mcdnn.preprocess import adapthisteq_plane, conorm_plane, histeq_plane, imadjust_plane

plane = bytes_to_unit(data.camera()[::4, ::4])  # 128x128 in [-1, 1]


def flatness(p, bins=32):
    counts, _ = np.histogram(p, bins=bins, range=(-1, 1))
    return counts.max() / counts.mean()


for name, op in [("original", lambda p: p), ("imadjust", imadjust_plane),
                 ("histeq", histeq_plane), ("adapthisteq", lambda p: adapthisteq_plane(p, 16, 16)),
                 ("conorm", conorm_plane)]:
    q = op(plane)
    print(f"{name:12s} range [{q.min():+.2f}, {q.max():+.2f}]  std {q.std():.3f}  "
          f"max/mean histogram bin {flatness(q):.2f}")

# %%
# Colour images are normalized on the lightness channel of L*a*b* only.
from mcdnn.preprocess import histeq

rgb = bytes_to_unit(data.astronaut()[::8, ::8].transpose(2, 0, 1))
print("colour histeq output shape", histeq(rgb).shape)
