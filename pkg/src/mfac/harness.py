"""Closed-loop simulation engine, experiment configs and trace files.

One run proceeds as follows. The initial window ``k = 1 .. k0`` holds the
configured outputs (and inputs up to ``k0 - 1``) with the plant at rest, so the
recorded disturbance is zero there. From ``k = k0`` on, each step

1. forms the disturbance compensation term for ``w(k+1) - w(k)``;
2. evaluates the exact pseudo-gradient/Jacobian at ``k``;
3. computes ``du(k)`` and applies ``u(k) = u(k-1) + du(k)``;
4. steps the plant with ``w(k+1)`` from the generator.

Runs halt as soon as ``|y|`` exceeds :data:`DIVERGENCE_LIMIT`.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .analysis import steady_state_error_ramp
from .controller import Compensation, ControllerConfig, control_context, control_law, optimality_check
from .errors import ConfigInvalid, ConfigParse, IoFailure, MfacError
from .observer import ObserverState, observer_step, residual_disturbance
from .plants import (DISTURBANCES, TRAJECTORIES, disturbance, exact_pg, get_plant, plant_step,
                     reference)
from .signals import SampleHistory

DIVERGENCE_LIMIT = 1e3
TABLE1_LAMBDAS = (0.0, 0.1, -0.1, 0.2)
TABLE1_WINDOW = (40, 700)


@dataclass(frozen=True)
class ExperimentConfig:
    plant_id: str
    trajectory_id: str
    disturbance_id: str
    lam: float = 0.0
    l_y: int | None = None
    l_u: int | None = None
    compensation: str = "true"
    observer_gain: float = 1.0
    horizon: int = 400
    out: str | None = None
    initial_y: list | None = None
    initial_u: list | None = None
    rms_window: list | None = None
    exclude_after_switch: int = 0
    allow_negative_lambda: bool = False

    def __post_init__(self):
        plant = get_plant_or_invalid(self.plant_id)
        if self.l_y is None:
            object.__setattr__(self, "l_y", plant.l_y)
        if self.l_u is None:
            object.__setattr__(self, "l_u", plant.l_u)
        self.validate()

    # JSON key -> attribute name; "lambda" is a Python keyword
    KEYS = {"lambda": "lam"}

    def validate(self) -> None:
        plant = get_plant_or_invalid(self.plant_id)
        if self.trajectory_id not in TRAJECTORIES:
            raise ConfigInvalid(f"trajectory_id: unknown trajectory {self.trajectory_id!r}")
        if self.disturbance_id not in DISTURBANCES:
            raise ConfigInvalid(f"disturbance_id: unknown disturbance {self.disturbance_id!r}")
        if self.l_y < plant.l_y or self.l_u < plant.l_u:
            raise ConfigInvalid(
                f"l_y/l_u: {self.plant_id} needs l_y >= {plant.l_y} and l_u >= {plant.l_u}, "
                f"got ({self.l_y}, {self.l_u})")
        if self.horizon < 10:
            raise ConfigInvalid(f"horizon: must be >= 10, got {self.horizon}")
        if not math.isfinite(self.lam):
            raise ConfigInvalid("lambda: must be finite")
        try:
            ControllerConfig(self.lam, self.l_y, self.l_u, Compensation(self.compensation),
                             self.observer_gain, self.allow_negative_lambda)
        except ValueError as exc:
            key = "compensation" if "Compensation" in str(exc) else "lambda/observer_gain"
            raise ConfigInvalid(f"{key}: {exc}") from None
        k0 = self.k0
        if k0 < max(self.l_y, self.l_u) + 1:
            raise ConfigInvalid(f"initial_y: need at least {max(self.l_y, self.l_u) + 1} samples, got {k0}")
        if k0 >= self.horizon:
            raise ConfigInvalid("initial_y: initial window must be shorter than the horizon")
        if self.initial_u is not None and len(self.initial_u) != k0 - 1:
            raise ConfigInvalid(f"initial_u: expected {k0 - 1} samples (u(1)..u(k0-1)), got {len(self.initial_u)}")
        for key, samples, dim in (("initial_y", self.initial_y, plant.m_y), ("initial_u", self.initial_u, plant.m_u)):
            for s in samples or ():
                if np.atleast_1d(np.asarray(s, dtype=float)).size != dim:
                    raise ConfigInvalid(f"{key}: samples must have dimension {dim}")
        if self.rms_window is not None:
            if len(self.rms_window) != 2:
                raise ConfigInvalid(f"rms_window: expected [start, end], got {self.rms_window}")
            a, b = self.rms_window
            if not 1 <= a <= b <= self.horizon:
                raise ConfigInvalid(f"rms_window: need 1 <= start <= end <= horizon, got {self.rms_window}")

    @property
    def k0(self) -> int:
        """Last index of the initial window, i.e. the first control step."""
        if self.initial_y is not None:
            return len(self.initial_y)
        return max(self.l_y, self.l_u) + 1

    def controller(self) -> ControllerConfig:
        return ControllerConfig(self.lam, self.l_y, self.l_u, Compensation(self.compensation),
                                self.observer_gain, self.allow_negative_lambda)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.default is not dataclasses.MISSING and value == f.default and f.name not in _CORE_KEYS:
                continue
            out["lambda" if f.name == "lam" else f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a JSON object")
        kwargs = {}
        for key, value in data.items():
            name = cls.KEYS.get(key, key)
            if name not in _FIELD_TYPES or key == "lam":
                raise ConfigInvalid(f"{key}: unknown config key")
            kwargs[name] = _check_type(key, value, _FIELD_TYPES[name])
        missing = [k for k in ("plant_id", "trajectory_id", "disturbance_id") if k not in kwargs]
        if missing:
            raise ConfigInvalid(f"{missing[0]}: required key missing")
        return cls(**kwargs)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


_CORE_KEYS = {"plant_id", "trajectory_id", "disturbance_id", "lam", "l_y", "l_u",
              "compensation", "observer_gain", "horizon", "out"}

_FIELD_TYPES = {
    "plant_id": str, "trajectory_id": str, "disturbance_id": str, "lam": float,
    "l_y": int, "l_u": int, "compensation": str, "observer_gain": float, "horizon": int,
    "out": (str, type(None)), "initial_y": (list, type(None)), "initial_u": (list, type(None)),
    "rms_window": (list, type(None)), "exclude_after_switch": int, "allow_negative_lambda": bool,
}


def _check_type(key: str, value, expected):
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is int and isinstance(value, bool):
        raise ConfigInvalid(f"{key}: expected int, got bool")
    if expected is float and isinstance(value, bool):
        raise ConfigInvalid(f"{key}: expected number, got bool")
    if not isinstance(value, expected):
        names = expected.__name__ if isinstance(expected, type) else "/".join(t.__name__ for t in expected)
        raise ConfigInvalid(f"{key}: expected {names}, got {type(value).__name__}")
    return value


def get_plant_or_invalid(plant_id):
    try:
        return get_plant(plant_id)
    except MfacError as exc:
        raise ConfigInvalid(f"plant_id: {exc}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(read_config_dict(path))


def read_config_dict(path: str | Path) -> dict[str, Any]:
    path = resolve_config_path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        keys = re.findall(r'"([^"\\]*)"\s*:', text[: exc.pos])
        near = f" (after key {keys[-1]!r})" if keys else ""
        raise ConfigParse(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}{near}: {exc.msg}") from None


def resolve_config_path(path: str | Path) -> Path:
    """A file on disk, or else the name of a bundled canonical config (``ex2`` or ``ex2.json``)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".json" else p.name + ".json"
    bundled = resources.files("mfac") / "configs" / name
    if bundled.is_file():
        return Path(str(bundled))
    return p


def canonical_config(name: str) -> ExperimentConfig:
    """One of the bundled example setups: ``ex1``, ``ex1_1``, ``ex2``, ``ex3``, ``ex4``."""
    return load_config(name)


def apply_overrides(data: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    """Apply ``key=value`` strings; values are parsed as JSON, falling back to plain strings."""
    data = dict(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigInvalid(f"{item!r}: overrides must look like key=value")
        name = ExperimentConfig.KEYS.get(key, key)
        if name not in _FIELD_TYPES or key == "lam":
            raise ConfigInvalid(f"{key}: unknown config key")
        expected = _FIELD_TYPES[name]
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        # string keys take the text as written, so "compensation=true" stays a string
        accepts_str = expected is str or (isinstance(expected, tuple) and str in expected)
        if accepts_str and not isinstance(value, str) and value is not None:
            value = raw
        data[key] = _check_type(key, value, expected)
    return data


# --- simulation -------------------------------------------------------------

@dataclass
class SimulationTrace:
    config: ExperimentConfig
    k: np.ndarray
    y_star: np.ndarray
    y: np.ndarray
    u: np.ndarray
    w: np.ndarray
    w_hat: np.ndarray
    e: np.ndarray
    summary: dict[str, Any] = field(default_factory=dict)
    history: SampleHistory | None = field(default=None, repr=False)
    du: np.ndarray | None = field(default=None, repr=False)

    @property
    def diverged(self) -> bool:
        return bool(self.summary["diverged"])

    def rows_between(self, start: int, end: int) -> np.ndarray:
        """Boolean mask of rows with ``start <= k <= end``."""
        return (self.k >= start) & (self.k <= end)


def _vec(value, dim: int) -> np.ndarray:
    return np.broadcast_to(np.atleast_1d(np.asarray(value, dtype=float)), (dim,)).copy()


def run(config: ExperimentConfig, check_optimality: bool = False, probe: float = 1e-3) -> SimulationTrace:
    plant = get_plant(config.plant_id)
    ctrl = config.controller()
    m_y, m_u, N, k0 = plant.m_y, plant.m_u, config.horizon, config.k0
    history = SampleHistory(1, m_y, m_u)
    init_y = config.initial_y if config.initial_y is not None else [0.0] * k0
    init_u = config.initial_u if config.initial_u is not None else [0.0] * (k0 - 1)
    for k in range(1, k0 + 1):
        history.push_sample(k, y=_vec(init_y[k - 1], m_y), w=np.zeros(m_y),
                            u=_vec(init_u[k - 1], m_u) if k < k0 else None)

    w_hat = [np.zeros(m_y) for _ in range(k0)]  # w_hat(1..k0)
    obs = ObserverState.initial(m_y, ctrl.observer_gain)
    dus, violations, diverged = [], 0, False
    last = N
    for k in range(k0, N + 1):
        yd_next = _vec(reference(config.trajectory_id, k + 1), m_y)
        if ctrl.compensation is Compensation.ESTIMATED:
            obs = observer_step(obs, residual_disturbance(config.plant_id, history, k))
            dw_comp = obs.w_hat - w_hat[-1]
            w_hat_next = obs.w_hat
        elif ctrl.compensation is Compensation.TRUE:
            w_next = _vec(disturbance(config.disturbance_id, k + 1), m_y)
            dw_comp = w_next - history.w[k]
            w_hat_next = w_next
        else:
            dw_comp = np.zeros(m_y)
            w_hat_next = np.zeros(m_y)

        pg = exact_pg(config.plant_id, history, k, ctrl.l_y, ctrl.l_u)
        ctx = control_context(history, k, ctrl.l_y, ctrl.l_u)
        du = control_law(pg, ctx, yd_next, dw_comp, ctrl.lam)
        if check_optimality and not optimality_check(pg, ctx, yd_next, dw_comp, ctrl.lam, du, probe):
            violations += 1
        dus.append(du)
        u_k = history.u[k - 1] + du
        history.push_sample(k, u=u_k)
        if k == N:
            break
        w_next = _vec(disturbance(config.disturbance_id, k + 1), m_y)
        y_next = plant_step(config.plant_id, history, k, u_k, w_next)
        history.push_sample(k + 1, y=y_next, w=w_next)
        w_hat.append(np.asarray(w_hat_next, dtype=float))
        if not np.all(np.isfinite(y_next)) or np.max(np.abs(y_next)) > DIVERGENCE_LIMIT:
            diverged, last = True, k + 1
            break

    ks = np.arange(1, last + 1)
    y = history.y.as_array()[:last]
    u = np.full((last, m_u), np.nan)
    u_hist = history.u.as_array()
    u[: len(u_hist)] = u_hist[:last]
    y_star = np.vstack([_vec(reference(config.trajectory_id, k), m_y) for k in ks])
    trace = SimulationTrace(
        config=config, k=ks, y_star=y_star, y=y, u=u, w=history.w.as_array()[:last],
        w_hat=np.vstack(w_hat[:last]), e=y_star - y, history=history, du=np.vstack(dus))
    trace.summary = summarize(trace, diverged)
    trace.summary["k0"] = k0
    if check_optimality:
        trace.summary["optimality_violations"] = violations
    return trace


def _rms_mask(trace: SimulationTrace) -> np.ndarray:
    cfg = trace.config
    start, end = cfg.rms_window if cfg.rms_window is not None else (cfg.horizon // 2, cfg.horizon)
    mask = trace.rows_between(start, end)
    if cfg.exclude_after_switch > 0:
        jumps = np.abs(np.diff(trace.y_star, axis=0)).max(axis=1)
        scale = float(np.max(np.abs(trace.y_star))) or 1.0
        for idx in np.flatnonzero(jumps > 0.1 * scale) + 1:
            mask[idx: idx + cfg.exclude_after_switch] = False
    return mask


def summarize(trace: SimulationTrace, diverged: bool = False) -> dict[str, Any]:
    mask = _rms_mask(trace)
    window = trace.e[mask]
    rms = float(np.sqrt(np.mean(window ** 2))) if window.size else float("nan")
    max_abs = float(np.max(np.abs(trace.y))) if np.all(np.isfinite(trace.y)) else float("inf")
    final_e = trace.e[-1]
    return {
        "rms_error": rms,
        "steady_state_error": float(final_e[0]) if final_e.size == 1 else final_e.tolist(),
        "max_abs_output": max_abs,
        "diverged": bool(diverged or max_abs > DIVERGENCE_LIMIT),
        "rows": int(trace.k.size),
    }


def sweep(base_config: ExperimentConfig, lambdas: Sequence[float], workers: int | None = None,
          check_optimality: bool = False) -> list[SimulationTrace]:
    """One run per weight, returned in the order of ``lambdas``."""
    if not lambdas:
        raise ConfigInvalid("lambdas: need at least one value")
    configs = [base_config.replace(lam=float(lam)) for lam in lambdas]
    if workers == 1:
        return [run(c, check_optimality) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: run(c, check_optimality), configs))


def sweep_rows(traces: Sequence[SimulationTrace]) -> list[dict[str, Any]]:
    return [{"lambda": t.config.lam, "rms_error": t.summary["rms_error"],
             "steady_state_error": t.summary["steady_state_error"],
             "max_abs_output": t.summary["max_abs_output"], "diverged": t.summary["diverged"]}
            for t in traces]


@dataclass(frozen=True)
class Table1Row:
    lam: float
    measured: float  # output offset y - y* over the window
    spread: float
    constant: bool
    final_value: float

    def as_dict(self) -> dict[str, Any]:
        return {"lambda": self.lam, "measured_e": self.measured, "spread": self.spread,
                "constant": self.constant, "final_value_e": self.final_value}


def table1(out_path: str | Path | None = None, lambdas: Sequence[float] = TABLE1_LAMBDAS,
           window: tuple[int, int] = TABLE1_WINDOW) -> list[Table1Row]:
    """Offset caused by a ramp disturbance on ``ex1_1`` under true compensation.

    The measured value is ``y(k) - y*(k)`` over ``window``; it is reported next to
    the final-value prediction evaluated on the pseudo-gradient at the window end.
    """
    base = canonical_config("ex1_1").replace(allow_negative_lambda=True, horizon=max(window[1], 10))
    rows = []
    for lam in lambdas:
        trace = run(base.replace(lam=float(lam)))
        offset = -trace.e[trace.rows_between(*window), 0]
        pg = exact_pg(base.plant_id, trace.history, window[1] - 1)
        rows.append(Table1Row(
            lam=float(lam), measured=float(np.mean(offset)),
            spread=float(offset.max() - offset.min()), constant=bool(offset.max() - offset.min() <= 1e-9),
            final_value=steady_state_error_ramp(pg, float(lam))))
    if out_path is not None:
        write_table(out_path, [r.as_dict() for r in rows])
    return rows


# --- persistence ------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def trace_header(trace: SimulationTrace) -> list[str]:
    m_y, m_u = trace.y.shape[1], trace.u.shape[1]
    cols = ["k"]
    for name, dim in (("y_star", m_y), ("y", m_y), ("u", m_u), ("w", m_y), ("w_hat", m_y), ("e", m_y)):
        cols += [f"{name}_{i}" for i in range(1, dim + 1)]
    return cols


def summary_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".summary.json")


def export_trace(trace: SimulationTrace, path: str | Path) -> Path:
    """Write the trace CSV and its JSON summary sidecar; returns the CSV path."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(trace_header(trace))
            for i, k in enumerate(trace.k):
                row = [str(int(k))]
                for arr in (trace.y_star, trace.y, trace.u, trace.w, trace.w_hat, trace.e):
                    row += [_fmt(v) for v in arr[i]]
                writer.writerow(row)
        summary = dict(trace.summary, config=trace.config.to_dict())
        summary_path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write trace to {path}: {exc}") from exc
    return path


def write_table(path: str | Path, rows: Sequence[dict[str, Any]]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(v) if isinstance(v, float) else v for k, v in row.items()})
    except OSError as exc:
        raise IoFailure(f"cannot write table to {path}: {exc}") from exc
    return path
