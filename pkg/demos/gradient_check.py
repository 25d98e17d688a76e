"""
Checking backpropagation against finite differences
===================================================

Every trainable number gets nudged by +-h and the change in loss is
compared with the analytic gradient. Max pooling routes gradients only to
the winning input of each region, so pooling layers contribute no
parameters but still have to pass the check on their inputs.
"""

import numpy as np

from mcdnn.layers import cross_entropy
from mcdnn.network import Network
from mcdnn.tensor import Rng

net = Network("1x8x8-3C3-MP2-4C2-MP2-5N-3N").init_weights(Rng(0), scale=0.5)
x = np.random.default_rng(0).uniform(-1, 1, (1, 8, 8))
label = 2

loss, p, grad_input = net.loss_and_grad(x, label, need_input_grad=True)
print(f"loss {loss:.4f}, probabilities {np.round(p, 3)}")

# %%
h = 1e-5
for i, (param, grad) in enumerate(zip(net.params(), [g.copy() for g in net.grads()])):
    numeric = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        old = param[idx]
        param[idx] = old + h
        up = cross_entropy(net.predict(x), label)[0]
        param[idx] = old - h
        down = cross_entropy(net.predict(x), label)[0]
        param[idx] = old
        numeric[idx] = (up - down) / (2 * h)
    rel = np.abs(grad - numeric) / np.maximum(np.abs(grad) + np.abs(numeric), 1e-12)
    print(f"parameter array {i} {param.shape}: max relative error {rel.max():.1e}")
