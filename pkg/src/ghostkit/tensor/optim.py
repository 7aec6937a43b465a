"""Adam optimizer with decoupled weight decay."""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ghostkit.errors import ConfigError, ShapeError


@dataclass
class AdamState:
    """Per-parameter moments plus the hyperparameters of the update."""
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-2
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def create(
        cls,
        params: Sequence[np.ndarray],
        lr: float = 3e-4,
        weight_decay: float = 1e-2,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if weight_decay < 0:
            raise ConfigError(f"weight decay must be non-negative, got {weight_decay}")
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            weight_decay=weight_decay,
            m=[np.zeros(p.shape, dtype=np.float64) for p in params],
            v=[np.zeros(p.shape, dtype=np.float64) for p in params],
        )


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam step; weight decay is applied to the parameters directly.

    Returns new parameter arrays (same dtypes as the inputs) and the
    advanced state. The inputs are not modified.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ConfigError(
            f"adam_step: {len(params)} parameters, {len(grads)} gradients, {len(state.m)} moments"
        )
    t = state.t + 1
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    new_params: List[np.ndarray] = []
    new_m: List[np.ndarray] = []
    new_v: List[np.ndarray] = []
    for index, (param, grad, m, v) in enumerate(zip(params, grads, state.m, state.v)):
        if param.shape != grad.shape:
            raise ShapeError("adam_step", f"parameter {index}", param.shape, grad.shape)
        g = np.asarray(grad, dtype=np.float64)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p = param.astype(np.float64)
        p = p - state.lr * state.weight_decay * p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_params.append(p.astype(param.dtype))
        new_m.append(m)
        new_v.append(v)

    new_state = AdamState(
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
        weight_decay=state.weight_decay,
        t=t,
        m=new_m,
        v=new_v,
    )
    return new_params, new_state
