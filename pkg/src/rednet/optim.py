"""Parameter updates: Adam with the bias correction folded into the step
size, plus plain SGD for comparisons.

The Adam step, per parameter element:

    m <- b1*m + (1-b1)*g
    v <- b2*v + (1-b2)*g^2
    a_t = alpha * sqrt(1 - b2^t) / (1 - b1^t)
    theta <- theta - a_t * m / (sqrt(v) + eps)

All layers share the same base rate; no weight decay, no clipping.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamHyper", "AdamState", "adam_step", "sgd_step"]


@dataclass
class AdamHyper:
    alpha: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError(f"betas must be in [0, 1), got "
                             f"{self.beta1}, {self.beta2}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass
class AdamState:
    """Per-parameter first/second moments and the shared step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def _check_aligned(params, grads, extra=None, what="state"):
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params vs {len(grads)} grads")
    if extra is not None and len(extra) != len(params):
        raise ValueError(f"{len(params)} params vs {len(extra)} {what} slots")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"param {i}: shape {p.shape} vs grad {g.shape}")


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, hyper: AdamHyper) -> None:
    """One Adam update, applied to the parameter arrays in place."""
    _check_aligned(params, grads, state.m)
    for i, g in enumerate(grads):
        if not np.isfinite(g).all():
            raise ValueError(f"non-finite gradient elements in param {i}")
    state.t += 1
    t = state.t
    alpha_t = hyper.alpha * np.sqrt(1.0 - hyper.beta2 ** t) \
        / (1.0 - hyper.beta1 ** t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * np.square(g)
        p -= (alpha_t * m / (np.sqrt(v) + hyper.epsilon)).astype(
            p.dtype, copy=False)


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray],
             lr: float) -> None:
    """Plain gradient descent: theta <- theta - lr*g, in place."""
    _check_aligned(params, grads)
    for p, g in zip(params, grads):
        p -= (lr * g).astype(p.dtype, copy=False)
