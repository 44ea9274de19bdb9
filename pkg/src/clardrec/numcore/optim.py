"""Bias-corrected adaptive-moment optimizer."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .params import ParameterStore


class Adam:
    """Standard Adam. Moments persist across steps and serialize with runs."""

    def __init__(self, lr: float, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, store: ParameterStore) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for name, t in store.trainable_items():
            if t.grad is None:
                continue
            g = t.grad
            if name not in self._m:
                self._m[name] = np.zeros_like(t.data)
                self._v[name] = np.zeros_like(t.data)
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            t.data = t.data - (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(np.float32)

    def state(self) -> dict:
        return {
            "step_count": self.step_count,
            "m": {k: v.copy() for k, v in self._m.items()},
            "v": {k: v.copy() for k, v in self._v.items()},
        }

    def load_state(self, state: dict) -> None:
        self.step_count = int(state["step_count"])
        self._m = {k: np.asarray(v, dtype=np.float32) for k, v in state["m"].items()}
        self._v = {k: np.asarray(v, dtype=np.float32) for k, v in state["v"].items()}


def adam_step(
    store: ParameterStore,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One optimizer step with moment state kept on the store itself."""
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    opt = getattr(store, "_adam", None)
    if opt is None:
        opt = Adam(lr, betas, eps)
        store._adam = opt
    else:
        opt.lr = float(lr)
        opt.beta1, opt.beta2 = float(betas[0]), float(betas[1])
        opt.eps = float(eps)
    opt.step(store)
