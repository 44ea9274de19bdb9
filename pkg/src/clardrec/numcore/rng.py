"""Named, counter-based random streams.

Each draw derives a fresh Philox generator from (label, seed, counter), so a
stream's sequence depends only on its own draw count. Streams never interfere
with each other, and a stream's state serializes as a single integer.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..errors import ContractError


def _key(label: str, seed: int, counter: int) -> np.random.Philox:
    digest = hashlib.sha256(f"{label}\x00{seed}\x00{counter}".encode()).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Philox(key=key)


class RandomStream:
    """A reproducible random source identified by (label, seed)."""

    def __init__(self, label: str, seed: int, counter: int = 0):
        if not label:
            raise ContractError("random stream label must be non-empty")
        self.label = label
        self.seed = int(seed)
        self.counter = int(counter)

    def _next(self) -> np.random.Generator:
        gen = np.random.Generator(_key(self.label, self.seed, self.counter))
        self.counter += 1
        return gen

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._next().uniform(low, high, size=shape).astype(np.float32)

    def normal(self, shape, std: float = 1.0) -> np.ndarray:
        return (self._next().standard_normal(size=shape) * std).astype(np.float32)

    def integers(self, shape, high: int, low: int = 0) -> np.ndarray:
        return self._next().integers(low, high, size=shape, dtype=np.int64)

    def permutation(self, n: int) -> np.ndarray:
        return self._next().permutation(n)

    def choice_without(self, pool_size: int, count: int, exclude: set) -> np.ndarray:
        """Draw `count` distinct indices from range(pool_size) avoiding `exclude`."""
        gen = self._next()
        if pool_size - len(exclude) < count:
            raise ContractError("candidate pool smaller than requested draw")
        picked: list[int] = []
        seen = set(exclude)
        # Rejection sampling; falls back to explicit pool when the exclusion
        # set dominates the catalog.
        if len(exclude) * 2 > pool_size:
            pool = np.array(sorted(set(range(pool_size)) - seen), dtype=np.int64)
            idx = gen.choice(len(pool), size=count, replace=False)
            return pool[idx]
        while len(picked) < count:
            draw = gen.integers(0, pool_size, size=2 * (count - len(picked)) + 4)
            for v in draw:
                v = int(v)
                if v not in seen:
                    seen.add(v)
                    picked.append(v)
                    if len(picked) == count:
                        break
        return np.array(picked, dtype=np.int64)

    def state(self) -> dict:
        return {"label": self.label, "seed": self.seed, "counter": self.counter}

    @classmethod
    def from_state(cls, state: dict) -> "RandomStream":
        return cls(state["label"], state["seed"], state["counter"])


class StreamFamily:
    """Factory handing out named streams that all share one base seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, RandomStream] = {}

    def get(self, label: str) -> RandomStream:
        if label not in self._streams:
            self._streams[label] = RandomStream(label, self.seed)
        return self._streams[label]

    def state(self) -> dict:
        return {
            "seed": self.seed,
            "streams": {k: v.counter for k, v in self._streams.items()},
        }

    def load_state(self, state: dict) -> None:
        self.seed = int(state["seed"])
        self._streams = {
            label: RandomStream(label, self.seed, counter)
            for label, counter in state["streams"].items()
        }
