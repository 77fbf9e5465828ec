"""
Dense tensors with reverse-mode automatic differentiation.

Every tensor holds a float64 numpy array. Operations record their inputs and a
closure that pushes the output gradient back into them; ``Tensor.backward``
walks the recorded graph in reverse topological order. Gradients accumulate
additively, so callers zero them between steps (``adamax_step`` does).
"""
import numpy as np

from .exceptions import (
    ConfigError,
    DataError,
    DegenerateInputError,
    DegenerateSliceError,
    DimensionError,
    NumericError,
    UsageError,
)


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array that can take part in gradient computation."""

    __slots__ = ('data', 'requires_grad', 'grad', 'name', '_parents', '_backward')
    # numpy scalars on the left of an operator defer to Tensor's reflected methods
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self.name = name
        self._parents = ()
        self._backward = None

    @classmethod
    def _result(cls, data, parents, backward):
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.name = None
        out.requires_grad = any(parent.requires_grad for parent in parents)
        if out.requires_grad:
            out.grad = np.zeros_like(out.data)
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.grad = None
            out._parents = ()
            out._backward = None
        return out

    # -- introspection -------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def T(self):
        return self.transpose()

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def numpy(self):
        return self.data.copy()

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ''
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # -- gradient plumbing ---------------------------------------------------

    def _accumulate(self, delta):
        if self.requires_grad:
            self.grad += _unbroadcast(np.asarray(delta, dtype=np.float64), self.data.shape)

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self, grad=None):
        """Back-propagate from this tensor into every tensor it was computed from."""
        if not self.requires_grad:
            raise UsageError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise UsageError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(grad, dtype=np.float64)
            if seed.shape != self.data.shape:
                raise DimensionError(f"seed gradient shape {seed.shape} does not match {self.shape}")

        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        self.grad += seed
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic ---------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            a._accumulate(g)
            b._accumulate(g)
        return Tensor._result(a.data + b.data, (a, b), backward)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward(g):
            a._accumulate(-g)
        return Tensor._result(-a.data, (a,), backward)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            a._accumulate(g * b.data)
            b._accumulate(g * a.data)
        return Tensor._result(a.data * b.data, (a, b), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            a._accumulate(g / b.data)
            b._accumulate(-g * a.data / (b.data * b.data))
        return Tensor._result(a.data / b.data, (a, b), backward)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise UsageError("only scalar exponents are supported")
        a = self

        def backward(g):
            a._accumulate(g * exponent * a.data ** (exponent - 1))
        return Tensor._result(a.data ** exponent, (a,), backward)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(as_tensor(other), self)

    # -- unary functions -----------------------------------------------------

    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def backward(g):
            a._accumulate(g * out_data)
        return Tensor._result(out_data, (a,), backward)

    def log(self):
        if np.any(self.data <= 0.0):
            raise NumericError("log of a non-positive value")
        a = self

        def backward(g):
            a._accumulate(g / a.data)
        return Tensor._result(np.log(a.data), (a,), backward)

    def sqrt(self):
        if np.any(self.data < 0.0):
            raise NumericError("sqrt of a negative value")
        a = self
        out_data = np.sqrt(a.data)

        def backward(g):
            a._accumulate(g * 0.5 / out_data)
        return Tensor._result(out_data, (a,), backward)

    def relu(self):
        a = self
        active = a.data > 0.0

        def backward(g):
            a._accumulate(g * active)
        return Tensor._result(a.data * active, (a,), backward)

    def clamp_min(self, floor):
        """max(x, floor); the gradient passes only where x is above the floor."""
        a = self
        above = a.data > floor

        def backward(g):
            a._accumulate(g * above)
        return Tensor._result(np.where(above, a.data, floor), (a,), backward)

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape))
        return Tensor._result(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.data.shape[ax] for ax in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- shape manipulation --------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self

        def backward(g):
            a._accumulate(g.reshape(a.data.shape))
        return Tensor._result(a.data.reshape(shape), (a,), backward)

    def transpose(self, *axes):
        if not axes:
            axes = tuple(range(self.ndim - 2)) + (self.ndim - 1, self.ndim - 2)
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = np.argsort(axes)
        a = self

        def backward(g):
            a._accumulate(np.transpose(g, inverse))
        return Tensor._result(np.transpose(a.data, axes), (a,), backward)

    def __getitem__(self, index):
        if isinstance(index, Tensor):
            raise UsageError("index with integer arrays, not tensors")
        a = self

        def backward(g):
            full = np.zeros_like(a.data)
            np.add.at(full, index, g)
            a._accumulate(full)
        return Tensor._result(a.data[index], (a,), backward)


def as_tensor(value):
    """Wrap a constant (number or array) as a tensor that needs no gradient."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def matmul(a, b):
    """Matrix product over the last two axes, batched over any leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    try:
        out_data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}") from exc

    def backward(g):
        a._accumulate(np.matmul(g, np.swapaxes(b.data, -1, -2)))
        b._accumulate(np.matmul(np.swapaxes(a.data, -1, -2), g))
    return Tensor._result(out_data, (a, b), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for tensor, piece in zip(tensors, np.split(g, splits, axis=axis)):
            tensor._accumulate(piece)
    return Tensor._result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        for position, tensor in enumerate(tensors):
            tensor._accumulate(np.take(g, position, axis=axis))
    return Tensor._result(np.stack([t.data for t in tensors], axis=axis), tensors, backward)


def _softmax_backward(x, out_data, axis):
    def backward(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        x._accumulate(out_data * (g - inner))
    return backward


def softmax(x, axis=-1):
    """Numerically stable softmax along ``axis``."""
    x = as_tensor(x)
    if x.shape[axis] < 1:
        raise DegenerateInputError("softmax over an empty axis")
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax input contains non-finite values")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    out_data = exps / exps.sum(axis=axis, keepdims=True)
    return Tensor._result(out_data, (x,), _softmax_backward(x, out_data, axis))


def masked_softmax(x, mask, axis=-1):
    """
    Softmax restricted to the positions where ``mask`` is true.

    Masked-out positions come out as exactly 0. ``mask`` must have the shape
    of ``x`` or broadcast to it; every slice needs at least one true entry.
    """
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    try:
        mask = np.broadcast_to(mask, x.shape)
    except ValueError as exc:
        raise DimensionError(f"mask shape {mask.shape} does not fit {x.shape}") from exc
    if not np.all(mask.any(axis=axis)):
        raise DegenerateSliceError("masked softmax slice has no unmasked entry")
    if not np.all(np.isfinite(x.data)):
        raise NumericError("masked softmax input contains non-finite values")

    peak = np.where(mask, x.data, -np.inf).max(axis=axis, keepdims=True)
    exps = np.where(mask, np.exp(np.where(mask, x.data - peak, 0.0)), 0.0)
    out_data = exps / exps.sum(axis=axis, keepdims=True)
    return Tensor._result(out_data, (x,), _softmax_backward(x, out_data, axis))


def mean_pool(x, valid):
    """Mean over the valid rows of ``x[..., n, d]``; ``valid`` is ``[..., n]``."""
    x = as_tensor(x)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != x.shape[:-1]:
        raise DimensionError(f"valid mask shape {valid.shape} does not match rows of {x.shape}")
    counts = valid.sum(axis=-1, keepdims=True)
    if np.any(counts == 0):
        raise DegenerateInputError("mean pooling over zero valid rows")
    weights = valid / counts

    def backward(g):
        x._accumulate(weights[..., None] * np.expand_dims(g, -2))
    return Tensor._result((weights[..., None] * x.data).sum(axis=-2), (x,), backward)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def bce_with_logits(logits, targets):
    """
    Mean binary cross entropy in the stable logit form:
    max(z, 0) - z*y + log(1 + exp(-|z|)).
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise DimensionError(f"targets shape {targets.shape} does not match logits {logits.shape}")
    if np.any(targets < 0.0) or np.any(targets > 1.0):
        raise DataError("BCE targets must lie in [0, 1]")
    z = logits.data
    count = z.size
    loss = (np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))).sum() / count

    def backward(g):
        logits._accumulate(g * (_sigmoid(z) - targets) / count)
    return Tensor._result(loss, (logits,), backward)


def dropout(x, p, training, rng):
    """Inverted dropout: survivors are scaled by 1/(1-p) so eval mode is the identity."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * keep


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalise the last axis to zero mean and unit variance, then scale and shift."""
    centred = x - x.mean(axis=-1, keepdims=True)
    variance = (centred * centred).mean(axis=-1, keepdims=True)
    return centred / (variance + eps).sqrt() * gain + bias


def weight_norm_linear(x, direction, gain, bias):
    """
    y = x W^T + b with W = gain * direction / ||direction||, row by row.

    ``direction`` is (out, in), ``gain`` and ``bias`` are (out,).
    """
    norms = np.sqrt((direction.data * direction.data).sum(axis=1))
    if np.any(norms == 0.0):
        raise NumericError("weight-normalised layer has a zero-norm direction row")
    row_norms = (direction * direction).sum(axis=1, keepdims=True).sqrt()
    weight = direction * (gain.reshape(-1, 1) / row_norms)
    return matmul(x, weight.transpose()) + bias
