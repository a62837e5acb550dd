"""Adam and the cosine-annealing warm-restart learning-rate schedule."""
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **kw):
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params], **kw)


def adam_step(params, grads, state: AdamState, lr: float):
    """In-place bias-corrected Adam update of each ``param.data``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state disagree in length")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if m.shape != p.shape:
            raise ValueError(f"moment shape {m.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data -= update.astype(p.dtype)
    return params


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, beta1=beta1, beta2=beta2, eps=eps)

    def step(self, lr):
        adam_step(self.params, [p.grad for p in self.params], self.state, lr)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


@dataclass(frozen=True)
class LrSchedule:
    lr_max: float = 1e-2
    lr_min: float = 1e-6
    cycle_length: int = 2000
    cycle_mult: float = 2.0
    warmup: int = 200


def lr_at(step: int, schedule: LrSchedule = LrSchedule()) -> float:
    """Linear warmup from lr_min to lr_max over ``warmup`` steps, then cosine
    cycles that fall from lr_max to exactly lr_min on their last step and
    restart at lr_max. Cycle i lasts cycle_length * cycle_mult**i steps."""
    if step < 0:
        raise ValueError("step must be non-negative")
    s = schedule
    if step < s.warmup:
        return s.lr_min + (s.lr_max - s.lr_min) * step / s.warmup
    u = step - s.warmup
    T = s.cycle_length
    while u >= T:
        u -= T
        T = max(1, int(round(T * s.cycle_mult)))
    if T == 1:
        return s.lr_max
    frac = u / (T - 1)
    return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + math.cos(math.pi * frac))
