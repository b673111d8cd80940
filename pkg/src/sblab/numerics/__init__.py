from .checkpoint import load_params, save_params
from .gradcheck import grad_check
from .optim import Optimizer, OptimizerConfig, Parameter
from .tensor import (
    Tensor,
    add,
    affine,
    as_tensor,
    check_finite,
    concat_rows,
    euclid_dist_rows,
    l2_normalize,
    l2_normalize_rows,
    matmul,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    set_max_pool,
    slice_rows,
    softmax_cross_entropy,
    stack_rows,
    sum_,
    transpose2d,
)

__all__ = [
    "Tensor",
    "Parameter",
    "Optimizer",
    "OptimizerConfig",
    "add",
    "affine",
    "as_tensor",
    "check_finite",
    "concat_rows",
    "euclid_dist_rows",
    "grad_check",
    "l2_normalize",
    "l2_normalize_rows",
    "load_params",
    "matmul",
    "mul",
    "neg",
    "no_grad",
    "relu",
    "reshape",
    "save_params",
    "set_max_pool",
    "slice_rows",
    "softmax_cross_entropy",
    "stack_rows",
    "sum_",
    "transpose2d",
]
