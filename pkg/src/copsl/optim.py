"""Adam with bias correction, applied to the model's routed gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, InternalError
from .model import CoPslModel, ParamGrads, parameter_arrays, with_parameters


@dataclass
class AdamState:
    """First/second moment accumulators aligned with the parameter order."""

    beta1: float
    beta2: float
    epsilon: float
    step: int
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]


def init_adam_state(
    model: CoPslModel, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8
) -> AdamState:
    params = parameter_arrays(model)
    return AdamState(
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        step=0,
        first_moment=[np.zeros_like(p) for p in params],
        second_moment=[np.zeros_like(p) for p in params],
    )


def adam_step(
    model: CoPslModel, grads: ParamGrads, state: AdamState, learning_rate: float
) -> tuple[CoPslModel, AdamState]:
    """One bias-corrected Adam update.

    Returns a fresh model (layers are immutable) and the advanced state; the
    moment accumulators are updated in place.
    """
    if not learning_rate > 0.0:
        raise InputError(f"learning rate must be positive, got {learning_rate}")
    params = parameter_arrays(model)
    grad_arrays = grads.arrays()
    if len(params) != len(grad_arrays):
        raise InternalError(
            f"model has {len(params)} parameter tensors but got {len(grad_arrays)} gradients"
        )

    t = state.step + 1
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    updated: list[np.ndarray] = []
    for p, g, m, v in zip(params, grad_arrays, state.first_moment, state.second_moment):
        if g.shape != p.shape:
            raise InternalError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        updated.append(p - learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
    state.step = t
    return with_parameters(model, updated), state
