"""First-order disturbance estimator.

The estimate follows ``w_hat(k+1) = w_hat(k) - L (w_hat(k) - w(k))`` with the
measured disturbance taken as the model residual ``w(k) = y(k) - f(phi(k-1))``.
For ``L = 1`` the estimate is the residual delayed by one step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .edlm import predict_increment
from .errors import GainOutOfRange
from .plants import exact_pg, get_plant, model_output
from .signals import SampleHistory, assemble_regression


@dataclass(frozen=True)
class ObserverState:
    w_hat: np.ndarray
    gain: np.ndarray  # diagonal of L

    def __post_init__(self):
        w_hat = np.atleast_1d(np.asarray(self.w_hat, dtype=float))
        gain = np.broadcast_to(np.asarray(self.gain, dtype=float), w_hat.shape).copy()
        if np.any(gain < 0.0) or np.any(gain > 2.0):
            raise GainOutOfRange(f"observer gains must lie in [0, 2], got {gain}")
        object.__setattr__(self, "w_hat", w_hat)
        object.__setattr__(self, "gain", gain)

    @classmethod
    def initial(cls, dim: int, gain) -> ObserverState:
        return cls(np.zeros(dim), gain)


def observer_step(state: ObserverState, w_measured) -> ObserverState:
    """Advance the estimate from ``w_hat(k)`` to ``w_hat(k+1)``."""
    w = np.broadcast_to(np.asarray(w_measured, dtype=float), state.w_hat.shape)
    # convex-combination form keeps L = 1 an exact copy of w(k)
    return ObserverState((1.0 - state.gain) * state.w_hat + state.gain * w, state.gain)


def residual_disturbance(plant_id: str, history: SampleHistory, k: int):
    """Disturbance implied by the plant model, ``y(k) - f(phi(k-1))``."""
    w = history.y[k] - model_output(plant_id, history, k - 1)
    return float(w[0]) if get_plant(plant_id).siso else w


def incremental_disturbance(plant_id: str, history: SampleHistory, k: int):
    """Increment form ``dy(k) - Phi_L(k-1)^T dH(k-1)``."""
    plant = get_plant(plant_id)
    pg = exact_pg(plant_id, history, k - 1)
    dh = assemble_regression(history, k - 1, plant.l_y, plant.l_u)
    dw = history.y.delta(k) - predict_increment(pg, dh)
    return float(dw[0]) if plant.siso else dw
