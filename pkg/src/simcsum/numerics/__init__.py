from .optim import AdamState, LrSchedule, adam_step, clip_grad_norm, lr_at
from .tensor import (
    ContractError,
    NumericError,
    ShapeError,
    Tensor,
    add,
    backward,
    concat,
    cross_entropy,
    dropout,
    embedding,
    gelu,
    get_dtype,
    grad_enabled,
    layer_norm,
    masked_fill,
    matmul,
    mul,
    no_grad,
    precision,
    reset_tape,
    reshape,
    set_precision,
    softmax,
    sub,
    tape_size,
    tensor_sum,
    transpose,
)

__all__ = [
    "AdamState", "LrSchedule", "adam_step", "clip_grad_norm", "lr_at",
    "ContractError", "NumericError", "ShapeError", "Tensor",
    "add", "backward", "concat", "cross_entropy", "dropout", "embedding", "gelu",
    "get_dtype", "grad_enabled", "layer_norm", "masked_fill", "matmul", "mul",
    "no_grad", "precision", "reset_tape", "reshape", "set_precision", "softmax",
    "sub", "tape_size", "tensor_sum", "transpose",
]
