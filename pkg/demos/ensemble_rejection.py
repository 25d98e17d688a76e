"""
Averaging columns and rejecting uncertain inputs
================================================

Columns trained from different seeds and behind different preprocessors
make different mistakes. Their probability vectors are averaged with equal
weight. The top averaged probability doubles as a confidence, and
withholding low-confidence answers trades coverage for accuracy.
"""

import numpy as np

from mcdnn.data import Dataset, synthetic_shapes
from mcdnn.ensemble import Column, Ensemble
from mcdnn.evaluator import evaluate
from mcdnn.preprocess import parse_chain
from mcdnn.tensor import Rng
from mcdnn.trainer import TrainConfig, train_column

DESCRIPTOR = "1x16x16-8C5-MP2-16C3-MP2-32N-4N"
train = synthetic_shapes(Rng(10), 400, 4, 16)
test = synthetic_shapes(Rng(11), 400, 4, 16)

columns = []
for seed, chain in enumerate(["original", "imadjust", "blur(1,0.75)"]):
    pre = parse_chain(chain)
    prepped = Dataset(pre.apply_all(train.images), train.labels, train.class_count)
    cfg = TrainConfig(eta_start=0.01, eta_factor=0.95, eta_min=1e-4, max_epochs=10, seed=seed)
    net, _ = train_column(DESCRIPTOR, prepped, cfg)
    columns.append(Column(net, pre, seed))

# %%
ensemble = Ensemble(columns)
per_column = ensemble.column_predictions(test.images)
for col, probs in zip(columns, per_column):
    err = np.mean(probs.argmax(1) != test.labels)
    print(f"column {col.seed} ({col.preprocessor}): error {100 * err:.1f}%")
report = evaluate(ensemble.predict_all(test.images), test.labels)
print(f"average of {len(columns)} columns: error {100 * report.error_rate:.1f}%")

# %%
for point in report.rejection_curve:
    print(f"threshold {point.threshold:.1f}: reject {100 * point.reject_fraction:5.1f}%, "
          f"error on the rest {100 * point.error_on_accepted:5.1f}%")
