"""A DNN column built from a :class:`~mcdnn.descriptor.NetDescriptor`.

Conv and hidden fully connected layers use the scaled tanh, pooling layers
are linear, and the last fully connected layer feeds a softmax.
"""

from __future__ import annotations

import numpy as np

from .descriptor import Conv, Fully, MaxPool, NetDescriptor, parse_descriptor
from .layers import ConvLayer, FullyLayer, MaxPoolLayer, ScaledTanh, cross_entropy, softmax
from .tensor import Rng, fill_uniform

INIT_RANGE = 0.05


class Network:
    def __init__(self, descriptor: NetDescriptor | str, activation: ScaledTanh | None = None):
        if isinstance(descriptor, str):
            descriptor = parse_descriptor(descriptor)
        self.descriptor = descriptor
        self.activation = activation or ScaledTanh()
        self.layers = []
        prev = descriptor.shapes[0]
        for spec, shape in zip(descriptor.layers[1:], descriptor.shapes[1:]):
            if isinstance(spec, Conv):
                self.layers.append(ConvLayer(prev[0], spec.maps, spec.kernel))
            elif isinstance(spec, MaxPool):
                self.layers.append(MaxPoolLayer(spec.size))
            elif isinstance(spec, Fully):
                self.layers.append(FullyLayer(int(np.prod(prev)), spec.units))
            prev = shape
        self._outputs = None

    @property
    def class_count(self) -> int:
        return self.descriptor.class_count

    def params(self) -> list[np.ndarray]:
        """Trainable arrays in layer order, weights before biases."""
        return [p for layer in self.layers for p in layer.params]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads]

    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_param_vector(self, v) -> None:
        i = 0
        for p in self.params():
            p[...] = np.reshape(v[i:i + p.size], p.shape)
            i += p.size
        if i != len(v):
            raise ValueError(f"expected {i} parameters, got {len(v)}")

    def init_weights(self, rng: Rng, scale: float = INIT_RANGE) -> "Network":
        for p in self.params():
            fill_uniform(p, rng, -scale, scale)
        return self

    def logits(self, x) -> np.ndarray:
        """Forward pass up to the pre-softmax output; caches activations for :meth:`backward`."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.descriptor.input_shape:
            raise ValueError(f"input shape {x.shape} != {self.descriptor.input_shape}")
        outputs = []
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer.forward(x)
            if i != last and not isinstance(layer, MaxPoolLayer):
                x = self.activation(x)
            outputs.append(x)
        self._outputs = outputs
        return x

    def predict(self, x) -> np.ndarray:
        return softmax(self.logits(x))

    def backward(self, grad_logits, need_input_grad: bool = False):
        """Backpropagate from the logits, filling every layer's gradient arrays."""
        if self._outputs is None:
            raise RuntimeError("backward called before forward")
        g = grad_logits
        last = len(self.layers) - 1
        for i in range(last, -1, -1):
            layer = self.layers[i]
            if i != last and not isinstance(layer, MaxPoolLayer):
                g = g * self.activation.grad_from_output(self._outputs[i])
            if isinstance(layer, FullyLayer) and g.ndim != 1:
                g = g.reshape(-1)
            g = layer.backward(g, need_input_grad=need_input_grad or i > 0)
            if i > 0 and g is not None:
                g = g.reshape(self._outputs[i - 1].shape)
        return g

    def loss_and_grad(self, x, label: int, need_input_grad: bool = False):
        """Cross-entropy loss of one sample; gradients land in :meth:`grads`.

        Returns ``(loss, probabilities, input_gradient_or_None)``.
        """
        p = softmax(self.logits(x))
        loss, gz = cross_entropy(p, label)
        gin = self.backward(gz, need_input_grad=need_input_grad)
        return loss, p, gin

    def sgd_step(self, eta: float) -> None:
        for p, g in zip(self.params(), self.grads()):
            p -= eta * g

    def copy(self) -> "Network":
        other = Network(self.descriptor, self.activation)
        other.set_param_vector(self.param_vector())
        return other
