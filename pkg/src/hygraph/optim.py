"""Adam optimizer over named parameter dictionaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GradientError, ShapeError

__all__ = ["AdamState", "adam_init", "adam_step"]


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_init(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        step=0,
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Apply one in-place Adam update to every parameter.

    Parameters are visited in sorted name order so updates are
    reproducible regardless of dict construction order.  A non-finite
    gradient aborts the step before any parameter is touched.
    """
    for name in sorted(params):
        g = grads.get(name)
        if g is None:
            raise ShapeError(f"adam_step: missing gradient for {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(
                f"adam_step: gradient shape {g.shape} != parameter shape "
                f"{params[name].shape} for {name!r}"
            )
        if not np.all(np.isfinite(g)):
            raise GradientError(name)

    state.step += 1
    t = state.step
    bias1 = 1.0 - beta1 ** t
    bias2 = 1.0 - beta2 ** t
    for name in sorted(params):
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[name] -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)
