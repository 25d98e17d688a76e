"""
MNIST at desk scale
===================

One MNIST column trained for 30 epochs on the first 10000 training digits,
padded from 28x28 to 29x29. The last 1000 training digits serve as the
validation set. Expect roughly 10 to 12 minutes per run on one core.

Usage::

    python demos/mnist_desk_scale.py /path/to/mnist [--no-distortion]

The directory must hold the four standard IDX files.
"""

import sys
import time
from pathlib import Path

import numpy as np

from mcdnn.augment import MNIST_DISTORTION, NO_DISTORTION
from mcdnn.data import load_idx, pad_canvas
from mcdnn.evaluator import evaluate, summary
from mcdnn.trainer import MNIST_SCHEDULE, TrainConfig, predict_all, train_column

root = Path(sys.argv[1] if len(sys.argv) > 1 else "/root/data/mnist")
distortion = NO_DISTORTION if "--no-distortion" in sys.argv else MNIST_DISTORTION

train = pad_canvas(load_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte"), 29, 29)
test = pad_canvas(load_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte"), 29, 29)
subset, validation = train.subset(np.arange(10_000)), train.subset(np.arange(59_000, 60_000))

start = time.perf_counter()


def progress(state):
    print(f"epoch {state.epoch:2d}  eta {state.eta:.6f}  loss {state.train_loss[-1]:.4f}  "
          f"validation error {100 * state.validation_error[-1]:.2f}%  "
          f"{time.perf_counter() - start:.0f}s", flush=True)


cfg = TrainConfig(**MNIST_SCHEDULE, max_epochs=30, seed=1, distortion=distortion)
net, _ = train_column("1x29x29-20C4-MP2-40C5-MP3-150N-10N", subset, cfg,
                      validation_set=validation, on_epoch=progress)
print(summary(evaluate(predict_all(net, test.images), test.labels)))
