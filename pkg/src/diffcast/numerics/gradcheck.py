"""Central-difference verification of autodiff gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensor import Tensor, backward, grad_of


@dataclass
class GradCheckReport:
    """Per-parameter max relative error between autodiff and central differences."""

    tolerance: float
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        return max(self.per_param.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _rel_error(a: float, b: float) -> float:
    denom = max(abs(a), abs(b), 1e-6)
    return abs(a - b) / denom


def finite_difference_check(
    fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    tolerance: float = 1e-4,
    h: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare autodiff gradients of the scalar `fn()` against central differences.

    `fn` must be deterministic and close over `params`. Parameters with
    requires_grad=False are excluded from the report. `max_entries` caps how
    many entries per parameter are probed (random subset, for large tensors).
    """
    checked = {k: p for k, p in params.items() if p.requires_grad}
    loss = fn()
    grads = backward(loss, checked.values())
    report = GradCheckReport(tolerance=tolerance)
    for name, param in checked.items():
        ad = grad_of(grads, param)
        flat = param.data.reshape(-1)
        idxs = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            gen = rng if rng is not None else np.random.default_rng(0)
            idxs = gen.choice(flat.size, size=max_entries, replace=False)
        worst = 0.0
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            up = fn().item()
            flat[i] = orig - h
            down = fn().item()
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            a = ad.reshape(-1)[i]
            if abs(a) < 1e-10 and abs(fd) < 1e-10:
                continue
            worst = max(worst, _rel_error(a, fd))
        report.per_param[name] = worst
    return report
