"""Fully online gradient descent with a geometrically annealed learning rate.

Every sample triggers one forward pass, one backward pass and an
immediate update ``w <- w - eta * grad``. At the start of each epoch the
whole training set is re-distorted and re-shuffled; validation always uses
the undistorted images.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .augment import NO_DISTORTION, DistortionParams, distort_all
from .data import Dataset
from .network import Network
from .tensor import Rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    eta_start: float = 0.001
    eta_factor: float = 0.993
    eta_min: float = 0.00003
    max_epochs: int = 800
    seed: int = 0
    distortion: DistortionParams = NO_DISTORTION
    validation_fraction: float = 0.1

    def __post_init__(self):
        if not 0 < self.eta_min < self.eta_start:
            raise ValueError("need 0 < eta_min < eta_start")
        if not 0 < self.eta_factor < 1:
            raise ValueError("eta_factor must lie in (0, 1)")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")


MNIST_SCHEDULE = dict(eta_start=0.001, eta_factor=0.993, eta_min=0.00003)
NORB_SCHEDULE = dict(eta_start=0.001, eta_factor=0.95, eta_min=0.000003)


def raw_lr(cfg: TrainConfig, epoch: int) -> float:
    return cfg.eta_start * cfg.eta_factor**epoch


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return max(cfg.eta_min, raw_lr(cfg, epoch))


def crossing_epoch(cfg: TrainConfig) -> int:
    """First epoch whose unclamped rate is at or below ``eta_min``."""
    e = 0
    while raw_lr(cfg, e) > cfg.eta_min:
        e += 1
    return e


def crossing_epoch_closed_form(cfg: TrainConfig) -> int:
    return math.ceil(math.log(cfg.eta_min / cfg.eta_start) / math.log(cfg.eta_factor))


@dataclass
class TrainState:
    epoch: int = 0
    eta: float = 0.0
    train_loss: list = field(default_factory=list)
    validation_error: list = field(default_factory=list)
    stop_reason: str = ""
    rng: Rng | None = None


def init_weights(net: Network, rng: Rng) -> Network:
    """U[-0.05, 0.05) for every weight and bias, layer by layer, weights before biases."""
    return net.init_weights(rng)


def split_validation(ds: Dataset, fraction: float, rng: Rng) -> tuple[Dataset, Dataset | None]:
    """Hold out ``fraction`` of ``ds`` (chosen by ``rng``) as an undistorted validation set."""
    n_val = int(round(len(ds) * fraction))
    if n_val == 0:
        return ds, None
    order = rng.permutation(len(ds))
    val, train = np.sort(order[:n_val]), np.sort(order[n_val:])
    return ds.subset(train, ds.name + ":train"), ds.subset(val, ds.name + ":validation")


def predict_all(net: Network, images) -> np.ndarray:
    return np.stack([net.predict(im) for im in images])


def error_rate(net: Network, ds: Dataset) -> float:
    if len(ds) == 0:
        return 0.0
    pred = predict_all(net, ds.images).argmax(axis=1)
    return float(np.mean(pred != ds.labels))


def train_epoch(net: Network, train_set: Dataset, cfg: TrainConfig, state: TrainState) -> TrainState:
    if len(train_set) == 0:
        raise ValueError("empty training set")
    rng = state.rng
    eta = lr_at_epoch(cfg, state.epoch)
    images = distort_all(rng, train_set.images, cfg.distortion)
    order = rng.permutation(len(train_set))
    total = 0.0
    for i in order:
        loss, _, _ = net.loss_and_grad(images[i], int(train_set.labels[i]))
        net.sgd_step(eta)
        total += loss
    state.eta = eta
    state.train_loss.append(total / len(train_set))
    state.epoch += 1
    return state


def fit(net: Network, train_set: Dataset, validation_set: Dataset | None, cfg: TrainConfig,
        rng: Rng | None = None,
        on_epoch: Callable[[TrainState], None] | None = None) -> tuple[Network, TrainState]:
    """Train until validation error hits zero, the rate reaches ``eta_min`` or ``max_epochs``.

    ``net`` is expected to be initialized already. ``rng`` drives distortion
    and shuffling; by default it is derived from ``cfg.seed``.
    """
    state = TrainState(rng=rng if rng is not None else Rng(cfg.seed).child(1))
    while True:
        if state.epoch >= cfg.max_epochs:
            state.stop_reason = "max_epochs"
            break
        if raw_lr(cfg, state.epoch) <= cfg.eta_min:
            state.stop_reason = "eta_min"
            break
        train_epoch(net, train_set, cfg, state)
        if validation_set is not None and len(validation_set):
            state.validation_error.append(error_rate(net, validation_set))
        log.info("epoch %d eta %.6g loss %.6f validation error %s", state.epoch, state.eta,
                 state.train_loss[-1], state.validation_error[-1] if state.validation_error else "n/a")
        if on_epoch is not None:
            on_epoch(state)
        if state.validation_error and state.validation_error[-1] == 0.0:
            state.stop_reason = "validation_error_zero"
            break
    return net, state


def train_column(descriptor, train_set: Dataset, cfg: TrainConfig, validation_set: Dataset | None = None,
                 on_epoch=None) -> tuple[Network, TrainState]:
    """Build, initialize and fit one column from ``cfg.seed``.

    Without an explicit validation set, ``cfg.validation_fraction`` of the
    training images is held out.
    """
    root = Rng(cfg.seed)
    net = init_weights(Network(descriptor), root.child(0))
    if validation_set is None:
        train_set, validation_set = split_validation(train_set, cfg.validation_fraction, root.child(2))
    return fit(net, train_set, validation_set, cfg, rng=root.child(1), on_epoch=on_epoch)
