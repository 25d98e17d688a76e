"""
Training a single column
========================

Synthetic shapes stand in for a real dataset here, so the script runs in
seconds. Training is fully online: one image, one update. The learning
rate shrinks by a constant factor each epoch, and every epoch sees freshly
distorted copies of the training images.
"""

import numpy as np

from mcdnn.augment import DistortionParams
from mcdnn.data import synthetic_shapes
from mcdnn.evaluator import evaluate, summary
from mcdnn.tensor import Rng
from mcdnn.trainer import TrainConfig, predict_all, train_column

train = synthetic_shapes(Rng(0), 400, 4, 16)
test = synthetic_shapes(Rng(1), 200, 4, 16)

cfg = TrainConfig(eta_start=0.01, eta_factor=0.95, eta_min=1e-4, max_epochs=8, seed=0,
                  distortion=DistortionParams(max_translate=0.1, max_rotate=10, max_scale=0.1))


def report(state):
    print(f"epoch {state.epoch}: eta {state.eta:.5f}, loss {state.train_loss[-1]:.4f}, "
          f"validation error {state.validation_error[-1]:.3f}")


net, state = train_column("1x16x16-8C5-MP2-16C3-MP2-32N-4N", train, cfg, on_epoch=report)
print("stopped because of", state.stop_reason)

# %%
probs = predict_all(net, test.images)
print(summary(evaluate(probs, test.labels)))
