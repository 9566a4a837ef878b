"""Adam with bias correction and a step-decay learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **kw):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params, grads, state: AdamState, lr: float):
    """Update ``params`` (numpy arrays) in place and return them."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeMismatch("params, grads and optimizer state differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            continue
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeMismatch(f"parameter {p.shape} vs gradient {g.shape}")
        dt = p.dtype.type
        m *= dt(b1)
        m += dt(1 - b1) * g
        v *= dt(b2)
        v += dt(1 - b2) * (g * g)
        p -= dt(lr) * (m / dt(c1)) / (np.sqrt(v / dt(c2)) + dt(state.eps))
    return params


class Adam:
    """Stateful wrapper driving :func:`adam_step` over autograd leaf tensors."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState.for_params([p.data for p in self.params], beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr):
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        adam_step([p.data for p in self.params], grads, self.state, lr)


@dataclass
class LrSchedule:
    initial_lr: float = 1e-3
    decay_factor: float = 0.96
    decay_every: int = 5000

    def __post_init__(self):
        if self.initial_lr <= 0 or not 0 < self.decay_factor <= 1 or self.decay_every < 1:
            raise ValueError("invalid learning-rate schedule")

    def __call__(self, step: int) -> float:
        return self.initial_lr * self.decay_factor ** (step // self.decay_every)
