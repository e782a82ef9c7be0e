"""
Adam optimizer over the 14 raw stain-model scalars
"""
from dataclasses import dataclass, field

import numpy as np

from errors import ShapeMismatch
from models.configs import TrainConfig
from models.params import N_RAW, SLICE_BIAS, Gradients, NslParams


def _zeros() -> np.ndarray:
    return np.zeros(N_RAW)


@dataclass(frozen=True, eq=False)
class AdamState:
    """Step counter and moment accumulators in NslParams.to_vector() layout"""

    step: int = 0
    m: np.ndarray = field(default_factory=_zeros)
    v: np.ndarray = field(default_factory=_zeros)

    def __post_init__(self):
        if self.step < 0:
            raise ShapeMismatch("optimizer step must be non-negative")
        for name in ("m", "v"):
            array = np.array(getattr(self, name), dtype=np.float64)
            if array.shape != (N_RAW,):
                raise ShapeMismatch(f"Adam {name} must have {N_RAW} entries, got {array.shape}")
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if np.any(self.v < 0):
            raise ShapeMismatch("Adam second moments must be non-negative")


def adam_step(params: NslParams, grads: Gradients, state: AdamState, config: TrainConfig):
    """One bias-corrected Adam update followed by row normalization of D"""
    theta = params.to_vector()
    g = grads.to_vector()
    if g.shape != theta.shape or state.m.shape != theta.shape:
        raise ShapeMismatch("parameters, gradients and optimizer state disagree in shape")
    if not config.use_stain_bias:
        g = g.copy()
        g[SLICE_BIAS] = 0.0

    step = state.step + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * g
    v = config.beta2 * state.v + (1.0 - config.beta2) * (g * g)

    bias1 = 1.0 - config.beta1**step
    bias2 = 1.0 - config.beta2**step
    theta = theta - config.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + config.adam_eps)

    updated = NslParams.from_vector(theta).with_normalized_stain()
    return updated, AdamState(step, m, v)
