"""Adam with bias correction over a named parameter collection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigError, GradientError
from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class Adam:
    """Standard Adam: moments are bias-corrected by ``1 - beta**t`` before the update."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got ({beta1}, {beta2})")
        names = list(params)
        if len(set(id(p) for p in params.values())) != len(names):
            raise ConfigError("a parameter tensor is registered under more than one name")
        self.params = dict(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, p in self.params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        st = self.state
        missing = [name for name, p in self.params.items() if p.grad is None]
        if missing:
            raise GradientError(f"no gradient for registered parameter(s): {', '.join(missing)}")
        st.step += 1
        t = st.step
        c1 = 1.0 - st.beta1 ** t
        c2 = 1.0 - st.beta2 ** t
        for name, p in self.params.items():
            g = p.grad
            m = st.beta1 * st.m[name] + (1.0 - st.beta1) * g
            v = st.beta2 * st.v[name] + (1.0 - st.beta2) * (g * g)
            st.m[name], st.v[name] = m, v
            p.data = p.data - st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
        self.zero_grad()
