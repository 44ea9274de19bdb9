"""Differentiable-compute kernel: float32 arrays, reverse-mode tape, Adam, and
named reproducible random streams."""

from .checkpoint import load_checkpoint, read_arrays, save_checkpoint, write_arrays
from .optim import Adam, adam_step
from .ops import PRIMITIVES, affine, forward_primitive
from .params import ParameterStore, init_bias, init_embedding, init_weight
from .rng import RandomStream, StreamFamily
from .tensor import Tensor, as_tensor, backprop, no_tape

__all__ = [
    "Adam",
    "PRIMITIVES",
    "ParameterStore",
    "RandomStream",
    "StreamFamily",
    "Tensor",
    "adam_step",
    "affine",
    "as_tensor",
    "backprop",
    "forward_primitive",
    "init_bias",
    "init_embedding",
    "init_weight",
    "load_checkpoint",
    "no_tape",
    "read_arrays",
    "save_checkpoint",
    "write_arrays",
]
