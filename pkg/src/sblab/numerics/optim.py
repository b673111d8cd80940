"""SGD (with momentum) and Adam over named parameters.

Both optimizers support an L2 weight penalty folded into the gradient and a
step schedule given as (epoch, multiplier) pairs: once training reaches a
listed epoch, the learning rate is multiplied by that factor (cumulatively
for multiple listed epochs).
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor


@dataclass
class Parameter:
    """A named trainable tensor. Identifiers are unique within a model."""

    name: str
    value: Tensor

    def __post_init__(self):
        self.value.requires_grad = True


@dataclass
class OptimizerConfig:
    kind: str = "sgd"  # "sgd" | "adam"
    learning_rate: float = 0.01
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    lr_schedule: list = field(default_factory=list)  # [(epoch, multiplier), ...]


class Optimizer:
    """Holds per-parameter moment buffers and the step counter."""

    def __init__(self, params: list, config: OptimizerConfig):
        if config.kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer kind: {config.kind!r}")
        if config.learning_rate <= 0:
            raise ConfigError(
                f"learning rate must be positive, got {config.learning_rate}"
            )
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate parameter identifiers in optimizer")
        self.params = list(params)
        self.config = config
        self.step_count = 0
        self.lr = config.learning_rate
        self._m = {p.name: np.zeros_like(p.value.data) for p in self.params}
        self._v = (
            {p.name: np.zeros_like(p.value.data) for p in self.params}
            if config.kind == "adam"
            else {}
        )

    def set_epoch(self, epoch: int):
        """Apply the step schedule: lr = base * prod(mult for listed e <= epoch)."""
        lr = self.config.learning_rate
        for at_epoch, mult in self.config.lr_schedule:
            if epoch >= at_epoch:
                lr *= mult
        self.lr = lr

    def zero_grad(self):
        for p in self.params:
            p.value.zero_grad()

    def step(self):
        """One update from the gradients currently stored on the parameters."""
        cfg = self.config
        self.step_count += 1
        for p in self.params:
            g = p.value.grad
            if g is None:
                g = np.zeros_like(p.value.data)
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p.value.data
            if cfg.kind == "sgd":
                if cfg.momentum:
                    buf = self._m[p.name]
                    buf *= cfg.momentum
                    buf += g
                    g = buf
                p.value.data -= self.lr * g
            else:
                m = self._m[p.name]
                v = self._v[p.name]
                m *= cfg.beta1
                m += (1 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1 - cfg.beta2) * g * g
                m_hat = m / (1 - cfg.beta1**self.step_count)
                v_hat = v / (1 - cfg.beta2**self.step_count)
                p.value.data -= self.lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
