"""Equivalent dynamic linearization with an additive disturbance term.

A plant ``y(k+1) = f(phi(k)) + w(k+1)`` is written in increments as::

    dy(k+1) = Phi_L(k)^T dH(k) + dw(k+1)

where ``dH(k)`` stacks output and input increments (see
:func:`mfac.signals.assemble_regression`). Each coefficient is a first partial
of ``f`` at ``phi(k-1)`` plus a Taylor remainder that vanishes with the
increments. For polynomial plants the Taylor series is finite, so the identity
holds exactly and :func:`identity_residual` is zero up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, DimensionMismatch
from .signals import RegressionVector, SampleHistory, assemble_regression


@dataclass(frozen=True)
class PgVector:
    """Pseudo-gradient of a SISO plant, split into output- and input-side parts."""

    phi_y: np.ndarray
    phi_u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi_y", np.asarray(self.phi_y, dtype=float).reshape(-1))
        object.__setattr__(self, "phi_u", np.asarray(self.phi_u, dtype=float).reshape(-1))
        if self.phi_u.size < 1:
            raise LengthMismatch("a pseudo-gradient needs at least one input-side entry")
        if not (np.all(np.isfinite(self.phi_y)) and np.all(np.isfinite(self.phi_u))):
            raise ValueError("pseudo-gradient entries must be finite")

    @property
    def l_y(self) -> int:
        return self.phi_y.size

    @property
    def l_u(self) -> int:
        return self.phi_u.size

    @property
    def lead(self) -> float:
        """Coefficient of the current input increment ``du(k)``."""
        return float(self.phi_u[0])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.phi_y, self.phi_u])

    def as_pjm(self) -> Pjm:
        return Pjm(self.phi_y.reshape(-1, 1, 1), self.phi_u.reshape(-1, 1, 1))


@dataclass(frozen=True)
class Pjm:
    """Pseudo-Jacobian block row ``[Phi_1 .. Phi_Ly, Phi_Ly+1 .. Phi_Ly+Lu]``.

    ``phi_y_blocks`` has shape ``(L_y, M_y, M_y)`` and ``phi_u_blocks`` has
    shape ``(L_u, M_y, M_u)``.
    """

    phi_y_blocks: np.ndarray
    phi_u_blocks: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.phi_u_blocks, dtype=float)
        if u.ndim != 3 or u.shape[0] < 1:
            raise DimensionMismatch("phi_u_blocks must have shape (L_u, M_y, M_u) with L_u >= 1")
        m_y, m_u = u.shape[1:]
        y = np.asarray(self.phi_y_blocks, dtype=float).reshape(-1, m_y, m_y)
        if m_u < m_y:
            raise DimensionMismatch(f"need M_u >= M_y, got M_u={m_u}, M_y={m_y}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(u))):
            raise ValueError("pseudo-Jacobian entries must be finite")
        object.__setattr__(self, "phi_y_blocks", y)
        object.__setattr__(self, "phi_u_blocks", u)

    @property
    def l_y(self) -> int:
        return self.phi_y_blocks.shape[0]

    @property
    def l_u(self) -> int:
        return self.phi_u_blocks.shape[0]

    @property
    def m_y(self) -> int:
        return self.phi_u_blocks.shape[1]

    @property
    def m_u(self) -> int:
        return self.phi_u_blocks.shape[2]

    @property
    def lead(self) -> np.ndarray:
        """Block multiplying ``du(k)``."""
        return self.phi_u_blocks[0]

    def matrix(self) -> np.ndarray:
        """Blocks laid side by side, shape ``(M_y, L_y*M_y + L_u*M_u)``."""
        parts = list(self.phi_y_blocks) + list(self.phi_u_blocks)
        return np.hstack(parts)


@dataclass(frozen=True)
class TaylorRemainder:
    """Correction terms added to the first partials; same layout as :class:`PgVector`."""

    eps_y: np.ndarray
    eps_u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eps_y", np.asarray(self.eps_y, dtype=float).reshape(-1))
        object.__setattr__(self, "eps_u", np.asarray(self.eps_u, dtype=float).reshape(-1))

    def __len__(self) -> int:
        return self.eps_y.size + self.eps_u.size

    def contribution(self, dh: RegressionVector) -> float:
        """Remainder collapsed onto the increments (the scalar ``sum eps_i dH_i``)."""
        eps = np.concatenate([self.eps_y, self.eps_u])
        if eps.size != len(dh):
            raise LengthMismatch("remainder and regression vector differ in length")
        return float(eps @ dh.vector)


def taylor_eps_scalar(higher_partials: Sequence[float], increment: float) -> float:
    """Remainder ``sum_n f^(n)/n! * d^(n-1)`` for ``n >= 2``.

    ``higher_partials`` holds the second, third, ... derivatives of one
    coordinate at the base point; ``increment`` is the step ``d`` in that
    coordinate.
    """
    total = 0.0
    for offset, value in enumerate(higher_partials):
        n = offset + 2
        total += value / math.factorial(n) * increment ** (n - 1)
    return total


def assemble_pg(first_partials: Sequence[float], remainder: TaylorRemainder,
                pad_y: int = 0, pad_u: int = 0) -> PgVector:
    """Sum first partials and remainder, then zero-pad each block.

    The split between output- and input-side entries is taken from the
    remainder. Padding covers pseudo orders larger than the plant's true
    orders; the padded coefficients multiply increments the plant ignores.
    """
    partials = np.asarray(first_partials, dtype=float).reshape(-1)
    if partials.size != len(remainder):
        raise LengthMismatch(f"{partials.size} partials for {len(remainder)} remainder terms")
    if pad_y < 0 or pad_u < 0:
        raise ValueError("padding must be non-negative")
    n_y = remainder.eps_y.size
    phi_y = partials[:n_y] + remainder.eps_y
    phi_u = partials[n_y:] + remainder.eps_u
    return PgVector(np.concatenate([phi_y, np.zeros(pad_y)]), np.concatenate([phi_u, np.zeros(pad_u)]))


def pad_pjm(pjm: Pjm, pad_y: int = 0, pad_u: int = 0) -> Pjm:
    """Append zero blocks to a pseudo-Jacobian (MIMO analogue of the padding in :func:`assemble_pg`)."""
    m_y, m_u = pjm.m_y, pjm.m_u
    y = np.concatenate([pjm.phi_y_blocks, np.zeros((pad_y, m_y, m_y))])
    u = np.concatenate([pjm.phi_u_blocks, np.zeros((pad_u, m_y, m_u))])
    return Pjm(y, u)


def _check_layout(pg: PgVector | Pjm, dh: RegressionVector) -> None:
    if pg.l_y != dh.l_y or pg.l_u != dh.l_u:
        raise LengthMismatch(f"coefficients are ({pg.l_y}, {pg.l_u}) but increments are ({dh.l_y}, {dh.l_u})")
    if isinstance(pg, Pjm) and (pg.m_y != dh.m_y or pg.m_u != dh.m_u):
        raise LengthMismatch("block dimensions do not match the regression vector")


def predict_increment(pg: PgVector | Pjm, dh: RegressionVector, dw=0.0):
    """One-step output increment ``Phi_L^T dH + dw``.

    Returns a float for a :class:`PgVector` and an array for a :class:`Pjm`.
    """
    _check_layout(pg, dh)
    if isinstance(pg, PgVector):
        return float(pg.vector @ dh.vector) + float(np.asarray(dw).reshape(-1)[0])
    return pg.matrix() @ dh.vector + np.asarray(dw, dtype=float)


def identity_residual(plant_id: str, history: SampleHistory, k: int,
                      l_y: int | None = None, l_u: int | None = None):
    """``dy(k+1) - Phi_L(k)^T dH(k) - dw(k+1)`` for a registered plant.

    Requires ``y(k+1)``, ``u(k)`` and ``w(k+1)`` in the history.
    """
    from .plants import exact_pg, get_plant

    plant = get_plant(plant_id)
    l_y = plant.l_y if l_y is None else l_y
    l_u = plant.l_u if l_u is None else l_u
    pg = exact_pg(plant_id, history, k, l_y, l_u)
    dh = assemble_regression(history, k, l_y, l_u)
    dy_next = history.y[k + 1] - history.y[k]
    dw_next = history.w[k + 1] - history.w[k]
    residual = dy_next - predict_increment(pg, dh, dw_next)
    if isinstance(pg, PgVector):
        return float(residual[0])
    return residual
