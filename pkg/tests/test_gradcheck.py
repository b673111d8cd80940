import numpy as np
import pytest

from sblab.errors import NumericError
from sblab.numerics import Tensor, grad_check, mul, sum_


def test_quadratic_closed_form():
    x = Tensor([3.0], requires_grad=True)
    err = grad_check(lambda: sum_(mul(x, x)), [x], eps=1e-4)
    assert err < 1e-8


def test_linear_is_exact_to_rounding():
    x = Tensor(np.arange(1.0, 5.0), requires_grad=True)
    w = np.array([2.0, -1.0, 0.5, 3.0])
    for eps in (1e-6, 1e-4, 1e-3):
        assert grad_check(lambda: sum_(x * w), [x], eps=eps) < 1e-9


def test_eps_range_enforced():
    x = Tensor([1.0], requires_grad=True)
    with pytest.raises(ValueError, match="eps"):
        grad_check(lambda: sum_(x * x), [x], eps=1e-2)


def test_nonfinite_probe_raises_numeric_error():
    x = Tensor([1e-5], requires_grad=True)

    def f():
        # sqrt goes NaN at the minus-eps probe point
        with np.errstate(invalid="ignore"):
            out = Tensor(np.sqrt(x.data))
        out.requires_grad = True
        return sum_(out)

    with pytest.raises(NumericError):
        grad_check(f, [x], eps=1e-4)
