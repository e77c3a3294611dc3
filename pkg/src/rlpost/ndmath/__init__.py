"""Tensor math, reverse-mode differentiation, GRU/linear layers and Adam."""
from .gradcheck import grad_check, grad_check_report
from .layers import (
    GruLayerParams,
    LinearParams,
    gru_cell_forward,
    gru_layer_forward,
    init_gru,
    init_linear,
    linear_forward,
)
from .optim import AdamState, adam_step
from .tensor import (
    Tape,
    Tensor,
    add,
    backward,
    exp,
    gru_sequence,
    log_softmax,
    matmul,
    mean,
    mul,
    reshape,
    sigmoid,
    square,
    stack,
    sub,
    sum,
    take,
    tanh,
)
