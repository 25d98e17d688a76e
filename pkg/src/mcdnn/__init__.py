"""Multi-column deep convolutional networks trained by online backpropagation."""

from .descriptor import NetDescriptor, format_descriptor, parse_descriptor
from .ensemble import Column, Ensemble, classify, classify_with_reject, predict_column, predict_ensemble
from .evaluator import evaluate, rejection_curve
from .network import Network
from .tensor import Rng
from .trainer import TrainConfig, fit, lr_at_epoch, train_column

__all__ = [
    "Column", "Ensemble", "NetDescriptor", "Network", "Rng", "TrainConfig",
    "classify", "classify_with_reject", "evaluate", "fit", "format_descriptor",
    "lr_at_epoch", "parse_descriptor", "predict_column", "predict_ensemble",
    "rejection_curve", "train_column",
]
__version__ = "0.1.0"
