"""Adam and AdamW with bias correction, operating on named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .tensor import Array, Tensor


@dataclass
class OptimizerState:
    """Per-parameter moment buffers plus the shared step counter."""

    lr: float
    beta1: float
    beta2: float
    eps: float
    weight_decay: float
    step_count: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


class Adam:
    """Standard Adam. Updates parameter tensors in place."""

    decoupled_decay = False

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = params
        self.state = OptimizerState(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            weight_decay=weight_decay,
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )

    def step(self, grads: dict[str, Array]) -> None:
        s = self.state
        s.step_count += 1
        t = s.step_count
        bc1 = 1.0 - s.beta1**t
        bc2 = 1.0 - s.beta2**t
        for name, param in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(param.data)
            if g.shape != param.data.shape:
                raise DimensionError(
                    f"optimizer: gradient shape {g.shape} does not match parameter "
                    f"'{name}' shape {param.data.shape}"
                )
            if not self.decoupled_decay and s.weight_decay:
                g = g + s.weight_decay * param.data
            m = s.m[name]
            v = s.v[name]
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * (g * g)
            if self.decoupled_decay and s.weight_decay:
                param.data *= 1.0 - s.lr * s.weight_decay
            param.data -= s.lr * (m / bc1) / (np.sqrt(v / bc2) + s.eps)


class AdamW(Adam):
    """Adam with decoupled weight decay (decay applied to weights, not grads)."""

    decoupled_decay = True

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4, weight_decay: float = 0.01, **kw):
        super().__init__(params, lr=lr, weight_decay=weight_decay, **kw)


def make_optimizer(kind: str, params: dict[str, Tensor], lr: float, weight_decay: float = 0.01) -> Adam:
    if kind == "adam":
        return Adam(params, lr=lr)
    if kind == "adamw":
        return AdamW(params, lr=lr, weight_decay=weight_decay)
    raise ValueError(f"unknown optimizer kind '{kind}'")
