"""Generative neurons and 1D operational layers.

A generative neuron replaces the fixed convolution kernel with a learned
truncated power series: the layer output is the sum over q = 1..Q of a
convolution applied to the q-th elementwise power of the input,

    out = bias + sum_q conv1d(weights[q], input**q)

so each kernel tap carries Q coefficients.  The constant (q = 0) term is
folded into the bias.  With Q = 1 the layer is numerically identical to a
plain convolutional layer.  Inputs are expected in [-1, 1] (the preceding
tanh guarantees this), which keeps the power terms bounded.

The transposed variant swaps the convolution for its adjoint, giving the
upsampling analogue used by decoder stages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    ShapeError,
    Tensor,
    conv1d,
    power_stack,
    transposed_conv1d,
)

__all__ = [
    "GenerativeLayerParams",
    "OperationalLayerConfig",
    "OperationalLayer",
    "generative_forward",
    "transposed_generative_forward",
    "operational_layer_forward",
    "init_generative_weights",
]


@dataclass
class GenerativeLayerParams:
    """Taylor-coefficient kernels ``weights[Q][out][in][K]`` plus biases ``[out]``."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ShapeError(f"generative weights must be (Q, out, in, K), got {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[1],):
            raise ShapeError(
                f"bias shape {self.biases.shape} does not match out channels {self.weights.shape[1]}"
            )
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ValueError("generative layer parameters must be finite")

    @property
    def q(self):
        return self.weights.shape[0]

    @property
    def out_channels(self):
        return self.weights.shape[1]

    @property
    def in_channels(self):
        return self.weights.shape[2]

    @property
    def kernel(self):
        return self.weights.shape[3]


@dataclass(frozen=True)
class OperationalLayerConfig:
    in_channels: int
    out_channels: int
    kernel: int
    q: int
    stride: int = 1
    padding: int = 0
    transposed: bool = False
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ("tanh", "none"):
            raise ValueError(f"activation must be 'tanh' or 'none', got {self.activation!r}")
        for name in ("in_channels", "out_channels", "kernel", "q", "stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")


def init_generative_weights(rng, config: OperationalLayerConfig, dtype=np.float32):
    """Uniform init in [-s, s] with s = 1/sqrt(in*K*Q), the same scale per q slice.

    Keeps pre-tanh activations near the linear region at start, which the
    power-series operator assumes.
    """
    c = config
    s = 1.0 / np.sqrt(c.in_channels * c.kernel * c.q)
    weights = rng.uniform(-s, s, size=(c.q, c.out_channels, c.in_channels, c.kernel))
    biases = np.zeros(c.out_channels)
    return GenerativeLayerParams(weights.astype(dtype), biases.astype(dtype))


def _power_stack(y, q):
    if q == 1:
        return y if isinstance(y, Tensor) else Tensor(y)
    return power_stack(y, q)


def _stacked_conv_weights(weights):
    # (Q, out, in, K) -> (out, Q*in, K); stacked channel q*in + c carries w[q, :, c, :]
    q, out_ch, in_ch, k = weights.shape
    return weights.transpose(1, 0, 2, 3).reshape(out_ch, q * in_ch, k)


def _stacked_tconv_weights(weights):
    # (Q, out, in, K) -> (Q*in, out, K)
    q, out_ch, in_ch, k = weights.shape
    return weights.transpose(0, 2, 1, 3).reshape(q * in_ch, out_ch, k)


def generative_forward(y, weights, biases=None, stride=1, padding=0):
    """Forward pass of a generative layer (sum of Q convolutions of input powers).

    ``weights`` is ``(Q, out, in, K)``; channel count of ``y`` must equal ``in``.
    """
    weights = weights if isinstance(weights, Tensor) else Tensor(weights)
    if weights.data.ndim != 4:
        raise ShapeError(f"generative weights must be (Q, out, in, K), got {weights.shape}")
    q = weights.data.shape[0]
    stacked = _power_stack(y, q)
    return conv1d(stacked, _stacked_conv_weights(weights), biases, stride, padding)


def transposed_generative_forward(y, weights, biases=None, stride=1, padding=0):
    """Transposed (upsampling) analogue: sum of Q adjoint convolutions of powers."""
    weights = weights if isinstance(weights, Tensor) else Tensor(weights)
    if weights.data.ndim != 4:
        raise ShapeError(f"generative weights must be (Q, out, in, K), got {weights.shape}")
    q = weights.data.shape[0]
    stacked = _power_stack(y, q)
    return transposed_conv1d(stacked, _stacked_tconv_weights(weights), biases, stride, padding)


def operational_layer_forward(y, layer):
    """Generative (or transposed-generative) pass followed by the configured activation."""
    return layer(y)


class OperationalLayer:
    """One operational layer: trainable generative kernels + optional tanh."""

    def __init__(self, config: OperationalLayerConfig, rng=None, dtype=np.float32):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng()
        params = init_generative_weights(rng, config, dtype)
        self.weights = Tensor(params.weights, requires_grad=True)
        self.biases = Tensor(params.biases, requires_grad=True)

    def __call__(self, y):
        c = self.config
        if c.transposed:
            out = transposed_generative_forward(y, self.weights, self.biases, c.stride, c.padding)
        else:
            out = generative_forward(y, self.weights, self.biases, c.stride, c.padding)
        if c.activation == "tanh":
            out = out.tanh()
        return out

    def output_length(self, length):
        c = self.config
        if c.transposed:
            return (length - 1) * c.stride + c.kernel - 2 * c.padding
        return (length + 2 * c.padding - c.kernel) // c.stride + 1

    def parameters(self):
        return [self.weights, self.biases]

    def parameter_count(self):
        return self.weights.data.size + self.biases.data.size
