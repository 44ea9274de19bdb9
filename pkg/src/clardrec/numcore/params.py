"""Named storage for trainable arrays and their gradient slots."""

from __future__ import annotations

import hashlib

import numpy as np

from ..errors import ContractError, DimensionError
from .rng import RandomStream
from .tensor import Tensor


class ParameterStore:
    """name -> (value tensor, trainable flag); gradients live on the tensors."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._entries:
            raise ContractError(f"duplicate parameter name '{name}'")
        t = Tensor(np.asarray(value), requires_grad=trainable)
        self._entries[name] = t
        self._trainable[name] = trainable
        return t

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __getitem__(self, name: str) -> Tensor:
        if name not in self._entries:
            raise ContractError(f"unknown parameter '{name}'")
        return self._entries[name]

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def trainable_items(self):
        return [(n, t) for n, t in self._entries.items() if self._trainable[n]]

    def zero_grads(self) -> None:
        for t in self._entries.values():
            t.grad = None

    def set_value(self, name: str, value: np.ndarray) -> None:
        t = self[name]
        value = np.asarray(value, dtype=t.data.dtype)
        if value.shape != t.data.shape:
            raise DimensionError(
                f"parameter '{name}': expected shape {t.data.shape}, got {value.shape}"
            )
        t.data = value

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self._entries):
            h.update(name.encode())
            h.update(self._entries[name].data.tobytes())
        return h.hexdigest()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._entries.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for n, v in snap.items():
            self.set_value(n, v)


def init_weight(store: ParameterStore, name: str, shape: tuple, stream: RandomStream) -> Tensor:
    """Uniform fan-in initialization: U[-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(shape[0])
    return store.add(name, stream.uniform(shape, -bound, bound))


def init_bias(store: ParameterStore, name: str, width: int) -> Tensor:
    return store.add(name, np.zeros(width, dtype=np.float32))


def init_embedding(store: ParameterStore, name: str, shape: tuple, stream: RandomStream) -> Tensor:
    """Embedding tables start small: U[-0.01, 0.01]."""
    return store.add(name, stream.uniform(shape, -0.01, 0.01))
