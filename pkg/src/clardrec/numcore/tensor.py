"""Tape nodes for reverse-mode differentiation over float32 numpy arrays."""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import ContractError

_TAPE_ENABLED = True
_DTYPE = np.float32


@contextmanager
def no_tape():
    """Disable gradient recording inside the block (forward-only evaluation)."""
    global _TAPE_ENABLED
    prev = _TAPE_ENABLED
    _TAPE_ENABLED = False
    try:
        yield
    finally:
        _TAPE_ENABLED = prev


def tape_enabled() -> bool:
    return _TAPE_ENABLED


@contextmanager
def working_precision(dtype):
    """Run the kernel at a different storage precision.

    Production is float32 throughout; the finite-difference oracle runs the
    identical code at float64 so that h=1e-3 differences are not drowned by
    single-precision rounding.
    """
    global _DTYPE
    prev = _DTYPE
    _DTYPE = np.dtype(dtype).type
    try:
        yield
    finally:
        _DTYPE = prev


def current_dtype():
    return _DTYPE


class Tensor:
    """One node of the computation tape.

    `data` is always a float32 ndarray. Leaves created with requires_grad=True
    accumulate into `grad` across backward calls until explicitly zeroed;
    intermediate nodes are rebuilt every forward pass.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False, parents=(), grad_fn=None):
        arr = np.asarray(data, dtype=_DTYPE)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents if _TAPE_ENABLED else ()
        self._grad_fn = grad_fn if _TAPE_ENABLED else None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data.item())

    def detach(self) -> "Tensor":
        """A constant copy cut off from the tape."""
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backprop(loss: Tensor) -> None:
    """Propagate d(loss)/d(node) back through the tape rooted at `loss`.

    Gradients of leaf tensors accumulate additively; intermediates start from
    scratch because each forward pass creates fresh nodes.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    order = _topo_order(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad and not node._parents:
            node.grad = g if node.grad is None else node.grad + g
        if node._grad_fn is None:
            continue
        for parent, pg in node._grad_fn(g):
            if pg is None:
                continue
            pid = id(parent)
            if pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = pg
