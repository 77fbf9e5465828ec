"""Parameterised building blocks shared by the encoders, fusion, filter and classifier."""
from dataclasses import dataclass, field

import numpy as np

from .autograd import dropout, layer_norm, weight_norm_linear


def xavier_uniform(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


@dataclass
class ForwardContext:
    """Train/eval switch and the generator that drives dropout masks."""

    training: bool = False
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def dropout(self, x, p):
        return dropout(x, p, self.training, self.rng)


EVAL = ForwardContext(training=False)


class WeightNormLinear:
    """
    A weight-normalised linear map with dropout on its input.

    The gain starts at the row norms of the initial direction, so the layer
    begins as the plain linear map given by that direction.
    """

    def __init__(self, store, name, in_features, out_features, rng, dropout=0.0):
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.p = dropout
        initial = xavier_uniform(rng, out_features, in_features)
        self.direction = store.create(f"{name}.direction", initial)
        self.gain = store.create(f"{name}.gain", np.sqrt((initial * initial).sum(axis=1)))
        self.bias = store.create(f"{name}.bias", np.zeros(out_features))

    def __call__(self, x, ctx=EVAL):
        if self.p:
            x = ctx.dropout(x, self.p)
        return weight_norm_linear(x, self.direction, self.gain, self.bias)


class LayerNorm:
    def __init__(self, store, name, width):
        self.gain = store.create(f"{name}.gain", np.ones(width))
        self.bias = store.create(f"{name}.bias", np.zeros(width))

    def __call__(self, x):
        return layer_norm(x, self.gain, self.bias)


def split_heads(x, heads):
    """(..., n, d) -> (..., heads, n, d/heads)."""
    *lead, n, width = x.shape
    x = x.reshape(*lead, n, heads, width // heads)
    order = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    return x.transpose(order)


def merge_heads(x):
    """(..., heads, n, d/heads) -> (..., n, d)."""
    *lead, heads, n, width = x.shape
    order = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    return x.transpose(order).reshape(*lead, n, heads * width)
