from .engine import (
    NonFiniteError,
    Tensor,
    add,
    attention_scores,
    concat,
    exp,
    finite_checks,
    gather_rows,
    grad,
    layer_norm,
    linear,
    log,
    logabsdet,
    logsigmoid,
    logsumexp,
    masked_softmax,
    matmul,
    mul,
    narrow,
    neg,
    no_grad,
    relu,
    reshape,
    sigmoid,
    sub,
    tanh,
    tmean,
    transpose,
    tsum,
)
from .optim import AdamState, adam_step, lr_schedule, sgd_project_step

__all__ = [
    "NonFiniteError",
    "Tensor",
    "AdamState",
    "adam_step",
    "lr_schedule",
    "sgd_project_step",
    "add",
    "attention_scores",
    "concat",
    "exp",
    "finite_checks",
    "gather_rows",
    "grad",
    "layer_norm",
    "linear",
    "log",
    "logabsdet",
    "logsigmoid",
    "logsumexp",
    "masked_softmax",
    "matmul",
    "mul",
    "narrow",
    "neg",
    "no_grad",
    "relu",
    "reshape",
    "sigmoid",
    "sub",
    "tanh",
    "tmean",
    "transpose",
    "tsum",
]
