"""Time-indexed signal storage and regression-vector assembly.

Samples are stored as 1-D float arrays, so a scalar signal is a signal of
dimension 1. Time indices are 1-based by default. Increments before the first
stored sample are zero, which is the same as saying the plant was at rest
before the record starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidOrders, MissingSamples, NonContiguousIndex


def _as_sample(value) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch(f"samples must be scalars or 1-D vectors, got shape {arr.shape}")
    return arr.copy()


class Signal:
    """Append-only sequence of equally sized samples starting at ``start``."""

    def __init__(self, start: int = 1, dim: int | None = None):
        self.start = start
        self.dim = dim
        self._values: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._values)

    @property
    def last_index(self) -> int:
        """Index of the newest sample (``start - 1`` when empty)."""
        return self.start + len(self._values) - 1

    def append(self, k: int, value) -> None:
        sample = _as_sample(value)
        if self.dim is None:
            self.dim = sample.size
        elif sample.size != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, got {sample.size}")
        if k != self.last_index + 1:
            raise NonContiguousIndex(f"next index must be {self.last_index + 1}, got {k}")
        sample.flags.writeable = False
        self._values.append(sample)

    def has(self, k: int) -> bool:
        return self.start <= k <= self.last_index

    def __getitem__(self, k: int) -> np.ndarray:
        if not self.has(k):
            raise MissingSamples(f"no sample at index {k} (stored {self.start}..{self.last_index})")
        return self._values[k - self.start]

    def delta(self, k: int) -> np.ndarray:
        """``s(k) - s(k-1)``; zero at (and before) the first stored index."""
        if k <= self.start:
            if self.dim is None:
                raise MissingSamples("empty signal has no dimension")
            return np.zeros(self.dim)
        return self[k] - self[k - 1]

    def as_array(self) -> np.ndarray:
        """All samples stacked into shape ``(len, dim)``."""
        if not self._values:
            return np.zeros((0, self.dim or 0))
        return np.vstack(self._values)


class SampleHistory:
    """Outputs ``y``, inputs ``u`` and disturbances ``w`` of one run.

    The three signals advance independently because within one control period
    ``y(k)`` and ``w(k)`` are known before ``u(k)`` is computed.
    """

    def __init__(self, start_index: int = 1, m_y: int | None = None, m_u: int | None = None):
        self.start_index = start_index
        self.y = Signal(start_index, m_y)
        self.u = Signal(start_index, m_u)
        self.w = Signal(start_index, m_y)

    @property
    def m_y(self) -> int | None:
        return self.y.dim if self.y.dim is not None else self.w.dim

    @property
    def m_u(self) -> int | None:
        return self.u.dim

    def signal(self, name: str) -> Signal:
        try:
            return {"y": self.y, "u": self.u, "w": self.w}[name]
        except KeyError:
            raise KeyError(f"unknown signal {name!r}") from None

    def push_sample(self, k: int, y=None, u=None, w=None) -> SampleHistory:
        """Append the given samples at index ``k``; omitted signals are untouched."""
        if y is not None and self.w.dim is not None and _as_sample(y).size != self.w.dim:
            raise DimensionMismatch("output and disturbance must share a dimension")
        if w is not None and self.y.dim is not None and _as_sample(w).size != self.y.dim:
            raise DimensionMismatch("output and disturbance must share a dimension")
        for sig, value in ((self.y, y), (self.u, u), (self.w, w)):
            if value is not None:
                sig.append(k, value)
        return self

    def delta(self, name: str, k: int) -> np.ndarray:
        return self.signal(name).delta(k)


@dataclass(frozen=True)
class RegressionVector:
    """Stacked increments ``[dy(k) .. dy(k-Ly+1), du(k) .. du(k-Lu+1)]``."""

    dy_block: np.ndarray
    du_block: np.ndarray
    l_y: int
    l_u: int
    m_y: int = 1
    m_u: int = 1
    vector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_orders(self.l_y, self.l_u)
        if self.dy_block.size != self.l_y * self.m_y or self.du_block.size != self.l_u * self.m_u:
            raise DimensionMismatch("block sizes do not match pseudo orders")
        object.__setattr__(self, "vector", np.concatenate([self.dy_block, self.du_block]))

    def __len__(self) -> int:
        return self.vector.size

    def dy(self, i: int) -> np.ndarray:
        """Output increment at lag ``i`` (``i = 0`` is ``dy(k)``)."""
        return self.dy_block[i * self.m_y:(i + 1) * self.m_y]

    def du(self, j: int) -> np.ndarray:
        """Input increment at lag ``j`` (``j = 0`` is ``du(k)``)."""
        return self.du_block[j * self.m_u:(j + 1) * self.m_u]

    def with_current_input(self, du_k) -> RegressionVector:
        """Copy with the ``du(k)`` slot replaced, used to score candidate inputs."""
        du_block = self.du_block.copy()
        du_block[: self.m_u] = np.atleast_1d(np.asarray(du_k, dtype=float))
        return RegressionVector(self.dy_block.copy(), du_block, self.l_y, self.l_u, self.m_y, self.m_u)


def _lag_delta(sig: Signal, k: int, dim: int) -> np.ndarray:
    # lags at or before the record start are zero by convention
    if k <= sig.start:
        return np.zeros(dim)
    return sig.delta(k)


def _check_orders(l_y: int, l_u: int) -> None:
    if l_y < 0 or l_u < 1:
        raise InvalidOrders(f"need l_y >= 0 and l_u >= 1, got l_y={l_y}, l_u={l_u}")


def assemble_regression(history: SampleHistory, k: int, l_y: int, l_u: int,
                        pending_input: bool = False) -> RegressionVector:
    """Build the increment regression vector at time ``k``.

    With ``pending_input=True`` the ``du(k)`` slot is left at zero; this is the
    controller's view, where ``u(k)`` is still being decided.
    """
    _check_orders(l_y, l_u)
    if k < history.start_index:
        raise MissingSamples(f"k={k} precedes the history start {history.start_index}")
    m_y, m_u = history.m_y or 1, history.m_u or 1
    dy = [_lag_delta(history.y, k - i, m_y) for i in range(l_y)]
    du = [np.zeros(m_u) if j == 0 and pending_input else _lag_delta(history.u, k - j, m_u)
          for j in range(l_u)]
    dy_block = np.concatenate(dy) if dy else np.zeros(0)
    return RegressionVector(dy_block, np.concatenate(du), l_y, l_u, m_y, m_u)
