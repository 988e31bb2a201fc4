"""Example plants, reference trajectories and disturbance generators.

Each plant carries two independent descriptions:

* ``model`` evaluates ``f(phi(k))`` directly from the plant equation;
* ``terms`` lists the separable polynomial terms of ``f`` per output, lag and
  component. :func:`exact_pg` builds the pseudo-gradient/Jacobian from these
  through first partials plus finite Taylor remainders.

Agreement of the two is checked by :func:`mfac.edlm.identity_residual`.

Time conventions: ``reference(id, k)`` returns ``y*(k)`` and
``disturbance(id, k)`` returns ``w(k)``. Generators printed as
``w(k+1) = g(k)`` or ``y*(k+1) = g(k)`` are therefore evaluated at ``k - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .edlm import PgVector, Pjm, TaylorRemainder, assemble_pg, pad_pjm, taylor_eps_scalar
from .errors import (UnknownDisturbance, UnknownPlant, UnknownTrajectory,
                     UnsupportedOrders)
from .signals import SampleHistory, Signal

# (signal, lag, output index, component index) -> polynomial in that coordinate
TermTable = dict[tuple[str, int, int, int], Polynomial]


@dataclass(frozen=True)
class PlantDescriptor:
    id: str
    m_y: int
    m_u: int
    n_y: int
    n_u: int
    model: Callable[[list[np.ndarray], list[np.ndarray]], np.ndarray] = field(repr=False)
    terms: TermTable = field(repr=False)
    linear: bool = False
    description: str = ""

    @property
    def l_y(self) -> int:
        """Smallest admissible output pseudo order (``n_y + 1``)."""
        return self.n_y + 1

    @property
    def l_u(self) -> int:
        return self.n_u + 1

    @property
    def siso(self) -> bool:
        return self.m_y == 1 and self.m_u == 1


def round_half_away(x: float) -> int:
    """Round to nearest integer with ties away from zero (``round(0.5) == 1``)."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _sq(x):
    return x * x


def _ex1(ys, us):
    return -_sq(ys[0]) + us[0] + 0.2 * _sq(us[1])


def _ex1_1(ys, us):
    return -_sq(ys[0]) + us[0]


def _ex2(ys, us):
    return us[0].copy()


def _ex3(ys, us):
    (y1, y2), (u1, u2), (v1, v2) = ys[0], us[0], us[1]
    return np.array([
        -0.7 * y1 ** 3 + y2 ** 2 + u1 + 0.4 * u2 + 0.1 * v1 ** 2 + 0.2 * v2 ** 4,
        -0.9 * y1 ** 2 + 0.8 * y2 ** 3 + 0.5 * u1 + 1.1 * u2 - 0.1 * v1 ** 3 + 0.1 * v2 ** 2,
    ])


EX3_INPUT_GAIN = np.array([[1.0, 0.4], [0.5, 1.1]])
EX4_PHI1 = np.array([[-1.0, 2.0], [-1.0, -1.4]])
EX4_PHI2 = np.array([[0.6, 6.0], [0.6, -3.0]])
EX4_PHI3 = np.array([[1.3, 1.0], [1.0, 0.0]])


def _ex4(ys, us):
    return EX4_PHI1 @ ys[0] + EX4_PHI2 @ ys[1] + EX4_PHI3 @ us[0]


def _P(*coeffs) -> Polynomial:
    return Polynomial(coeffs)


def _linear_terms(signal: str, lag: int, gain: np.ndarray) -> TermTable:
    return {(signal, lag, i, j): _P(0.0, gain[i, j])
            for i in range(gain.shape[0]) for j in range(gain.shape[1]) if gain[i, j] != 0.0}


_EX3_TERMS: TermTable = {
    ("y", 0, 0, 0): _P(0, 0, 0, -0.7),
    ("y", 0, 0, 1): _P(0, 0, 1),
    ("y", 0, 1, 0): _P(0, 0, -0.9),
    ("y", 0, 1, 1): _P(0, 0, 0, 0.8),
    ("u", 1, 0, 0): _P(0, 0, 0.1),
    ("u", 1, 0, 1): _P(0, 0, 0, 0, 0.2),
    ("u", 1, 1, 0): _P(0, 0, 0, -0.1),
    ("u", 1, 1, 1): _P(0, 0, 0.1),
    **_linear_terms("u", 0, EX3_INPUT_GAIN),
}

_EX4_TERMS: TermTable = {
    **_linear_terms("y", 0, EX4_PHI1),
    **_linear_terms("y", 1, EX4_PHI2),
    **_linear_terms("u", 0, EX4_PHI3),
}

PLANTS: dict[str, PlantDescriptor] = {
    "ex1": PlantDescriptor(
        "ex1", 1, 1, 0, 1, _ex1,
        {("y", 0, 0, 0): _P(0, 0, -1), ("u", 0, 0, 0): _P(0, 1), ("u", 1, 0, 0): _P(0, 0, 0.2)},
        description="y(k+1) = -y(k)^2 + u(k) + 0.2 u(k-1)^2 + w(k+1)"),
    "ex1_1": PlantDescriptor(
        "ex1_1", 1, 1, 0, 0, _ex1_1,
        {("y", 0, 0, 0): _P(0, 0, -1), ("u", 0, 0, 0): _P(0, 1)},
        description="y(k+1) = -y(k)^2 + u(k) + w(k+1)"),
    "ex2": PlantDescriptor(
        "ex2", 1, 1, -1, 0, _ex2, {("u", 0, 0, 0): _P(0, 1)}, linear=True,
        description="y(k+1) = u(k) + w(k+1)"),
    "ex3": PlantDescriptor(
        "ex3", 2, 2, 0, 1, _ex3, _EX3_TERMS,
        description="two-output polynomial plant with cubic and quartic terms"),
    "ex4": PlantDescriptor(
        "ex4", 2, 2, 1, 0, _ex4, _EX4_TERMS, linear=True,
        description="y(k+1) = Phi1 y(k) + Phi2 y(k-1) + Phi3 u(k) + w(k+1)"),
}

# the controller solves for u(k) from the coefficient of du(k), which must not depend on du(k)
for _plant in PLANTS.values():
    assert all(p.degree() <= 1 for (sig, lag, _, _), p in _plant.terms.items() if sig == "u" and lag == 0)


def get_plant(plant_id: str) -> PlantDescriptor:
    try:
        return PLANTS[plant_id]
    except KeyError:
        raise UnknownPlant(f"unknown plant {plant_id!r}; known: {sorted(PLANTS)}") from None


def _level(sig: Signal, k: int) -> np.ndarray:
    # before the record the plant is at rest at its first stored value
    if k < sig.start and len(sig):
        return sig[sig.start]
    return sig[k]


def _lags(history: SampleHistory, plant: PlantDescriptor, k: int, u_k=None):
    ys = [_level(history.y, k - i) for i in range(plant.n_y + 1)]
    us = [_level(history.u, k - j) for j in range(1, plant.n_u + 1)]
    current = _level(history.u, k) if u_k is None else np.atleast_1d(np.asarray(u_k, dtype=float))
    return ys, [current] + us


def model_output(plant_id: str, history: SampleHistory, k: int, u_k=None) -> np.ndarray:
    """Disturbance-free output ``f(phi(k))``; ``u_k`` overrides ``u(k)`` when given."""
    plant = get_plant(plant_id)
    ys, us = _lags(history, plant, k, u_k)
    return np.asarray(plant.model(ys, us), dtype=float).reshape(plant.m_y)


def plant_step(plant_id: str, history: SampleHistory, k: int, u_k, w_next) -> np.ndarray:
    """Next output ``y(k+1) = f(phi(k)) + w(k+1)`` with ``u(k) = u_k``."""
    plant = get_plant(plant_id)
    w_next = np.broadcast_to(np.asarray(w_next, dtype=float), (plant.m_y,))
    return model_output(plant_id, history, k, u_k) + w_next


def _coefficient_blocks(plant: PlantDescriptor, history: SampleHistory, k: int):
    """First partials and remainders per lag slot, as arrays ``(lags, M_y, M_sig)``."""
    shapes = {"y": (plant.n_y + 1, plant.m_y, plant.m_y), "u": (plant.n_u + 1, plant.m_y, plant.m_u)}
    partials = {s: np.zeros(shape) for s, shape in shapes.items()}
    eps = {s: np.zeros(shape) for s, shape in shapes.items()}
    for (sig_name, lag, i, j), poly in plant.terms.items():
        sig = history.signal(sig_name)
        base = _level(sig, k - 1 - lag)[j]
        if sig_name == "u" and lag == 0 and not sig.has(k):
            step = 0.0  # du(k) not decided yet; affine in u(k) so the step is irrelevant
        else:
            step = _level(sig, k - lag)[j] - base
        derivs = [poly.deriv(n)(base) for n in range(1, poly.degree() + 1)]
        if derivs:
            partials[sig_name][lag, i, j] = derivs[0]
            eps[sig_name][lag, i, j] = taylor_eps_scalar(derivs[1:], step)
    return partials, eps


def exact_pg(plant_id: str, history: SampleHistory, k: int,
             l_y: int | None = None, l_u: int | None = None) -> PgVector | Pjm:
    """Exact pseudo-gradient (SISO) or pseudo-Jacobian (MIMO) at time ``k``.

    Pseudo orders above the plant's true orders are zero-padded. Orders below
    them are not supported.
    """
    plant = get_plant(plant_id)
    l_y = plant.l_y if l_y is None else l_y
    l_u = plant.l_u if l_u is None else l_u
    if l_y < plant.l_y or l_u < plant.l_u:
        raise UnsupportedOrders(
            f"{plant_id} needs l_y >= {plant.l_y} and l_u >= {plant.l_u}, got ({l_y}, {l_u})")
    partials, eps = _coefficient_blocks(plant, history, k)
    pad_y, pad_u = l_y - plant.l_y, l_u - plant.l_u
    if plant.siso:
        first = np.concatenate([partials["y"].reshape(-1), partials["u"].reshape(-1)])
        remainder = TaylorRemainder(eps["y"].reshape(-1), eps["u"].reshape(-1))
        return assemble_pg(first, remainder, pad_y, pad_u)
    pjm = Pjm(partials["y"] + eps["y"], partials["u"] + eps["u"])
    return pad_pjm(pjm, pad_y, pad_u)


# --- reference trajectories -------------------------------------------------

def _traj_eq20(k):
    return 0.3 * (-1) ** round_half_away(k / 50)


def _traj_eq24(k):
    return 5.0 * (-1) ** round_half_away((k - 1) / 80)


def _traj_eq48(k):
    m = k - 1
    if m <= 400:
        return np.array([0.3 * math.sin(m / 40) - 0.1 * math.cos(m / 5),
                         0.2 * math.sin(m / 10) - 0.3 * math.cos(m / 30)])
    v = 0.1 * (-1) ** round_half_away(m / 50)
    return np.array([v, -v])


def _traj_eq50(k):
    v = 3.0 * (-1) ** round_half_away((k - 1) / 50)
    return np.array([v, v])


TRAJECTORIES: dict[str, Callable[[int], float | np.ndarray]] = {
    "traj_eq20": _traj_eq20,
    "traj_eq24": _traj_eq24,
    "traj_eq48": _traj_eq48,
    "traj_eq50": _traj_eq50,
    "traj_zero": lambda k: 0.0,
}


def reference(traj_id: str, k: int):
    """Desired output ``y*(k)``."""
    try:
        gen = TRAJECTORIES[traj_id]
    except KeyError:
        raise UnknownTrajectory(f"unknown trajectory {traj_id!r}; known: {sorted(TRAJECTORIES)}") from None
    return gen(k)


# --- disturbances -----------------------------------------------------------

def _dist_eq19(m):
    return 0.5 * math.sin(m / 40) + 0.5 * math.cos(m / 30)


def _dist_ex2(m):
    return 10.0 * math.sin(m / 10)


def _dist_eq47(m):
    return np.array([math.sin(m / 10), math.cos(m / 30)])


def _dist_ex4(m):
    return np.array([20 * math.sin(m / 20) + 40 * math.cos(m / 40) + 9 * math.exp(m / 100),
                     20 * math.cos(m / 30) + 40 * math.cos(m / 50) + 20 * math.exp(m / 150)])


# keyed by the printed argument m, where the printed formula gives w(m+1)
DISTURBANCES: dict[str, Callable[[int], float | np.ndarray]] = {
    "dist_eq19": _dist_eq19,
    "dist_ex2": _dist_ex2,
    "dist_eq47": _dist_eq47,
    "dist_ex4": _dist_ex4,
    "dist_ramp": lambda m: float(m),
    "dist_zero": lambda m: 0.0,
}


def disturbance(dist_id: str, k: int):
    """Disturbance ``w(k)`` acting on ``y(k)``."""
    try:
        gen = DISTURBANCES[dist_id]
    except KeyError:
        raise UnknownDisturbance(f"unknown disturbance {dist_id!r}; known: {sorted(DISTURBANCES)}") from None
    return gen(k - 1)

