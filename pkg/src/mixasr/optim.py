"""AdamW with a linear learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .engine import Tensor


def linear_lr(step: int, total_steps: int, lr_start: float, lr_end: float) -> float:
    """Learning rate decayed linearly from lr_start to lr_end over total_steps."""
    if total_steps <= 0:
        return lr_end
    frac = min(max(step, 0) / total_steps, 1.0)
    return lr_start + (lr_end - lr_start) * frac


class AdamW:
    """Decoupled-weight-decay Adam over a named parameter dict.

    Only the parameters passed in are ever touched; anything else in the
    model stays bitwise identical across steps.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 2e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        if lr is None:
            lr = self.lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data -= lr * update

    def state_dict(self) -> dict:
        out = {"t": self.t}
        for name in self.params:
            out[f"m/{name}"] = self.m[name]
            out[f"v/{name}"] = self.v[name]
        return out

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        for name in self.params:
            self.m[name] = np.array(state[f"m/{name}"])
            self.v[name] = np.array(state[f"v/{name}"])
