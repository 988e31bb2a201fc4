"""Model-free adaptive control laws with disturbance compensation.

Both laws minimise the one-step cost ``|y*(k+1) - y(k+1)|^2 + lam |du(k)|^2``
with ``y(k+1)`` predicted by the dynamic linearization. The disturbance
increment enters the prediction as a known term, so with ``lam = 0`` and
an exact model the output lands on the reference in one step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .edlm import PgVector, Pjm, predict_increment
from .errors import ConfigInvalid, DimensionMismatch, GainOutOfRange, SingularGain, SingularNormalMatrix
from .signals import RegressionVector, SampleHistory, assemble_regression

GAIN_FLOOR = 1e-12
CONDITION_LIMIT = 1e12


class Compensation(str, enum.Enum):
    TRUE = "true"
    ESTIMATED = "estimated"
    NONE = "none"


@dataclass(frozen=True)
class ControllerConfig:
    lam: float
    l_y: int
    l_u: int
    compensation: Compensation = Compensation.TRUE
    observer_gain: float = 1.0
    # negative weights only make sense when reproducing the published table
    allow_negative_lambda: bool = False

    def __post_init__(self):
        object.__setattr__(self, "compensation", Compensation(self.compensation))
        if self.lam < 0 and not self.allow_negative_lambda:
            raise ConfigInvalid(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 <= self.observer_gain <= 2.0:
            raise GainOutOfRange(f"observer gain must lie in [0, 2], got {self.observer_gain}")


@dataclass(frozen=True)
class ControlContext:
    """What the controller knows at time ``k`` before choosing ``du(k)``."""

    y_now: np.ndarray
    regression: RegressionVector  # du(k) slot is zero


def control_context(history: SampleHistory, k: int, l_y: int, l_u: int) -> ControlContext:
    return ControlContext(history.y[k], assemble_regression(history, k, l_y, l_u, pending_input=True))


def cost(yd, y_pred, du, lam: float) -> float:
    yd, y_pred, du = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (yd, y_pred, du))
    if yd.shape != y_pred.shape:
        raise DimensionMismatch(f"desired output {yd.shape} vs prediction {y_pred.shape}")
    err = yd - y_pred
    return float(err @ err + lam * (du @ du))


def _bracket(pg: PgVector | Pjm, ctx: ControlContext, yd_next, dw_next) -> np.ndarray:
    # y*(k+1) - y(k) - (every EDLM term except du(k)) - compensation
    known = predict_increment(pg, ctx.regression, dw_next)
    return np.atleast_1d(np.asarray(yd_next, dtype=float)) - ctx.y_now - known


def siso_control(pg: PgVector, history: SampleHistory, k: int, yd_next, dw_next,
                 cfg: ControllerConfig) -> float:
    """Input increment ``du(k)``; the applied input is ``u(k-1) + du(k)``."""
    ctx = control_context(history, k, cfg.l_y, cfg.l_u)
    return siso_law(pg, ctx, yd_next, dw_next, cfg.lam)


def siso_law(pg: PgVector, ctx: ControlContext, yd_next, dw_next, lam: float) -> float:
    denom = lam + pg.lead ** 2
    if abs(denom) <= GAIN_FLOOR:
        raise SingularGain(f"lambda + phi^2 = {denom:g} is singular")
    return pg.lead / denom * float(_bracket(pg, ctx, yd_next, dw_next)[0])


def mimo_control(pjm: Pjm, history: SampleHistory, k: int, yd_next, dw_next,
                 cfg: ControllerConfig) -> np.ndarray:
    """Input increment vector from the regularised normal equations."""
    ctx = control_context(history, k, cfg.l_y, cfg.l_u)
    return mimo_law(pjm, ctx, yd_next, dw_next, cfg.lam)


def mimo_law(pjm: Pjm, ctx: ControlContext, yd_next, dw_next, lam: float) -> np.ndarray:
    lead = pjm.lead
    normal = lead.T @ lead + lam * np.eye(pjm.m_u)
    if not np.isfinite(normal).all() or np.linalg.cond(normal) >= CONDITION_LIMIT:
        raise SingularNormalMatrix("Phi^T Phi + lambda I is numerically singular")
    return np.linalg.solve(normal, lead.T @ _bracket(pjm, ctx, yd_next, dw_next))


def control_law(pg: PgVector | Pjm, ctx: ControlContext, yd_next, dw_next, lam: float) -> np.ndarray:
    """Dispatch to the SISO or MIMO law; always returns an array."""
    if isinstance(pg, PgVector):
        return np.array([siso_law(pg, ctx, yd_next, dw_next, lam)])
    return mimo_law(pg, ctx, yd_next, dw_next, lam)


def optimality_check(pg: PgVector | Pjm, dh_context: ControlContext, yd_next, dw_next,
                     lam: float, du_star, delta: float = 1e-3) -> bool:
    """True when no coordinate probe ``du* +/- delta e_i`` lowers the cost."""
    du_star = np.atleast_1d(np.asarray(du_star, dtype=float))

    def J(du):
        y_pred = dh_context.y_now + predict_increment(pg, dh_context.regression.with_current_input(du), dw_next)
        return cost(yd_next, y_pred, du, lam)

    best = J(du_star)
    for i in range(du_star.size):
        for sign in (1.0, -1.0):
            probe = du_star.copy()
            probe[i] += sign * delta
            if J(probe) < best - 1e-12:
                return False
    return True
