"""Central-difference gradient verification for scalar-valued graphs."""

import math

import numpy as np

from ..errors import NumericError
from .tensor import Tensor


def grad_check(f, tensors, eps: float = 1e-4) -> float:
    """Compare reverse-mode gradients of f() against central differences.

    f is a nullary callable returning a scalar Tensor built (directly or
    through a model) from the given tensors. Returns the max over all
    coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    if not (1e-6 <= eps <= 1e-3):
        raise ValueError(f"eps must lie in [1e-6, 1e-3], got {eps}")
    tensors = list(tensors)
    for t in tensors:
        t.requires_grad = True
        t.zero_grad()
    out = f()
    if not isinstance(out, Tensor) or out.size != 1:
        raise ValueError("grad_check target must return a scalar Tensor")
    out.backward()
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        for t in tensors
    ]

    def probe() -> float:
        val = f().item()
        if not math.isfinite(val):
            raise NumericError("non-finite value at gradient-check probe point")
        return val

    worst = 0.0
    for t, a in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        a_flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = probe()
            flat[i] = orig - eps
            f_minus = probe()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            err = abs(a_flat[i] - numeric) / max(1.0, abs(a_flat[i]), abs(numeric))
            worst = max(worst, err)
    for t in tensors:
        t.zero_grad()
    return worst
