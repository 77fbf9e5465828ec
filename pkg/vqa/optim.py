"""Parameter storage, the Adamax optimizer and the warm-up learning-rate schedule."""
from dataclasses import dataclass
import math

import numpy as np

from .autograd import Tensor
from .exceptions import ConfigError, DimensionError, UsageError


@dataclass
class AdamaxState:
    m: np.ndarray
    u: np.ndarray
    step: int = 0


class ParameterStore:
    """Named trainable tensors plus their Adamax state, iterated in name order."""

    def __init__(self):
        self._params = {}
        self._state = {}

    def create(self, name, data):
        if name in self._params:
            raise UsageError(f"parameter {name!r} already exists")
        tensor = Tensor(data, requires_grad=True, name=name)
        self._params[name] = tensor
        self._state[name] = AdamaxState(np.zeros_like(tensor.data), np.zeros_like(tensor.data))
        return tensor

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self, prefix=None):
        names = sorted(self._params)
        if prefix is None:
            return names
        return [name for name in names if name.startswith(prefix)]

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def state(self, name):
        return self._state[name]

    def zero_grad(self):
        for _, tensor in self.items():
            tensor.zero_grad()

    def parameter_count(self):
        return sum(tensor.size for _, tensor in self.items())

    def load(self, name, data, m=None, u=None, step=0):
        """Overwrite a parameter (and optionally its optimizer state) in place."""
        tensor = self._params.get(name)
        if tensor is None:
            raise UsageError(f"unknown parameter {name!r}")
        data = np.asarray(data, dtype=np.float64)
        if data.shape != tensor.shape:
            raise DimensionError(f"parameter {name!r} has shape {tensor.shape}, got {data.shape}")
        tensor.data[...] = data
        state = self._state[name]
        if m is not None:
            state.m = np.array(m, dtype=np.float64)
        if u is not None:
            state.u = np.array(u, dtype=np.float64)
        state.step = int(step)
        if state.m.shape != tensor.shape or state.u.shape != tensor.shape:
            raise DimensionError(f"optimizer state for {name!r} does not match shape {tensor.shape}")


def adamax_step(store, lr, beta1=0.9, beta2=0.999, eps=1e-8, names=None):
    """
    One Adamax update of ``names`` (default: every parameter), then zero their grads.

    m <- b1 m + (1 - b1) g;  u <- max(b2 u, |g|);  p <- p - lr / (1 - b1^t) * m / (u + eps)
    """
    names = store.names() if names is None else sorted(names)
    for name in names:
        param = store[name]
        if param.grad is None:
            raise UsageError(f"parameter {name!r} has no gradient buffer")
        state = store.state(name)
        grad = param.grad
        state.step += 1
        state.m = beta1 * state.m + (1.0 - beta1) * grad
        state.u = np.maximum(beta2 * state.u, np.abs(grad))
        step_size = lr / (1.0 - beta1 ** state.step)
        param.data -= step_size * state.m / (state.u + eps)
        param.zero_grad()


@dataclass(frozen=True)
class LrSchedule:
    """Linear warm-up, a plateau, then step decay by a constant factor."""

    warmup_start: float
    warmup_end: float
    warmup_epochs: int
    decay_start_epoch: int
    decay_factor: float
    decay_every: int
    final_epoch: int
    fixed_encoder_lr: float

    def __post_init__(self):
        if self.warmup_start <= 0 or self.warmup_end <= 0 or self.fixed_encoder_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.warmup_epochs < 0 or self.decay_every < 1 or self.final_epoch < 0:
            raise ConfigError("warmup_epochs >= 0, decay_every >= 1 and final_epoch >= 0 are required")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigError(f"decay_factor must be in (0, 1], got {self.decay_factor}")
        if self.decay_start_epoch < self.warmup_epochs:
            raise ConfigError("decay cannot start before warm-up ends")

    @classmethod
    def from_config(cls, config):
        return cls(
            warmup_start=config.warmup_start,
            warmup_end=config.warmup_end,
            warmup_epochs=config.warmup_epochs,
            decay_start_epoch=config.decay_start_epoch,
            decay_factor=config.decay_factor,
            decay_every=config.decay_every,
            final_epoch=max(config.epochs - 1, 0),
            fixed_encoder_lr=config.fixed_encoder_lr,
        )


def lr_at(schedule, epoch):
    """Return ``(lr, encoder_lr)`` for a 0-based epoch."""
    if not 0 <= epoch <= schedule.final_epoch:
        raise UsageError(f"epoch {epoch} outside the schedule [0, {schedule.final_epoch}]")
    if epoch < schedule.warmup_epochs:
        fraction = epoch / schedule.warmup_epochs
        lr = schedule.warmup_start + (schedule.warmup_end - schedule.warmup_start) * fraction
    elif epoch < schedule.decay_start_epoch:
        lr = schedule.warmup_end
    else:
        decays = math.floor((epoch - schedule.decay_start_epoch) / schedule.decay_every)
        lr = schedule.warmup_end * schedule.decay_factor ** decays
    return lr, schedule.fixed_encoder_lr
