"""Minimal reverse-mode autodiff over dense float64 tensors.

BLAS is pinned to a single thread for the lifetime of the process so
matrix products are bitwise reproducible regardless of machine load or
the PNSP_THREADS worker setting.
"""

from threadpoolctl import threadpool_limits

# Keep a module-lifetime reference; dropping it would restore the limits.
_BLAS_LIMIT = threadpool_limits(limits=1, user_api="blas")

from .checkpoint import read_checkpoint, write_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .optim import ParameterStore, adamw_step, cosine_lr
from .tensor import (
    Tape,
    Tensor,
    add,
    concat_rows,
    constant,
    cross_entropy_logits,
    duplicate_reshape_upsample,
    embedding_lookup,
    gather_rows,
    gelu,
    layernorm,
    make_op,
    matmul,
    mul,
    neg,
    scatter_add_rows,
    softmax_lastdim,
    straight_through,
    sub,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "GradCheckReport",
    "ParameterStore",
    "Tape",
    "Tensor",
    "adamw_step",
    "add",
    "concat_rows",
    "constant",
    "cosine_lr",
    "cross_entropy_logits",
    "duplicate_reshape_upsample",
    "embedding_lookup",
    "gather_rows",
    "gelu",
    "grad_check",
    "layernorm",
    "make_op",
    "matmul",
    "mul",
    "neg",
    "read_checkpoint",
    "scatter_add_rows",
    "softmax_lastdim",
    "straight_through",
    "sub",
    "tmean",
    "transpose",
    "tsum",
    "write_checkpoint",
]
