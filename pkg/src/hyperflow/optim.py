from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class SGD:
    def __init__(self, params: list[Tensor], lr: float = 0.01):
        self.params = params
        self.lr = lr

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        for p in self.params:
            if p.grad is not None:
                p.data = p.data - self.lr * p.grad


class Adam(SGD):
    """Adaptive-moment gradient descent with bias correction."""

    def __init__(self, params: list[Tensor], lr: float = 0.01, betas=(0.9, 0.999),
                 eps: float = 1e-8):
        super().__init__(params, lr)
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * p.grad
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * p.grad ** 2
            p.data = p.data - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


OPTIMIZERS = {"adam": Adam, "sgd": SGD}


def make_optimizer(kind: str, params: list[Tensor], lr: float):
    try:
        return OPTIMIZERS[kind](params, lr=lr)
    except KeyError:
        raise ValueError(f"unknown optimizer {kind!r}") from None
