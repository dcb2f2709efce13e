"""Adam with bias correction and a warmup + linear-decay schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import ContractError, ShapeError


@dataclass(frozen=True)
class LrSchedule:
    base_rate: float = 5e-5
    warmup_steps: int = 100
    total_steps: int = 1000

    def __post_init__(self):
        if not 0 < self.warmup_steps < self.total_steps:
            raise ContractError(
                f"need 0 < warmup_steps < total_steps, got {self.warmup_steps} and {self.total_steps}")
        if self.base_rate < 0:
            raise ContractError("base_rate must be non-negative")


def lr_at(t: int, schedule: LrSchedule) -> float:
    """Linear warmup from 0 to ``base_rate``, then linear decay to 0 at ``total_steps``."""
    if t < 0 or t > schedule.total_steps:
        raise ContractError(f"step {t} outside [0, {schedule.total_steps}]")
    if t < schedule.warmup_steps:
        return schedule.base_rate * t / schedule.warmup_steps
    remaining = schedule.total_steps - t
    return schedule.base_rate * remaining / (schedule.total_steps - schedule.warmup_steps)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> AdamState:
    """One Adam update of ``params`` (name -> Tensor) in place.

    Parameters without an entry in ``grads`` are treated as having a zero
    gradient, so their moments still decay.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {p.data.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


def clip_grad_norm(grads: dict, max_norm: float, order=None) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``.

    Squares are summed in ``order`` (default: dict order) so the norm is
    reproducible. Returns the pre-clipping norm.
    """
    names = list(order) if order is not None else list(grads)
    total = 0.0
    for name in names:
        g = grads.get(name)
        if g is not None:
            total += float(np.sum(g * g, dtype=np.float64))
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for name in names:
            if grads.get(name) is not None:
                grads[name] = grads[name] * np.asarray(scale, dtype=grads[name].dtype)
    return norm
