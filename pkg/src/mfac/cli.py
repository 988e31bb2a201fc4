"""Command-line front end: ``mfac simulate | analyze | sweep | table1``.

Exit codes: 0 success, 1 runtime failure, 2 config parse/validation error,
3 divergence when ``--fail-on-divergence`` is given. Tables go to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import harness
from .analysis import MatrixZPolynomial, char_poly, poles, steady_state_error_ramp
from .edlm import PgVector
from .errors import ConfigInvalid, ConfigParse, MfacError
from .plants import exact_pg

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("MFAC_OUT_DIR") or ".")


def _config(args) -> harness.ExperimentConfig:
    data = harness.read_config_dict(args.config)
    if not isinstance(data, dict):
        raise ConfigInvalid("config must be a JSON object")
    data = harness.apply_overrides(data, args.set or [])
    return harness.ExperimentConfig.from_dict(data)


def _trace_path(args, config: harness.ExperimentConfig, suffix: str = "") -> Path:
    if config.out and not args.out and not os.environ.get("MFAC_OUT_DIR") and not suffix:
        return Path(config.out)
    return _out_dir(args) / f"{config.plant_id}{suffix}.csv"


def _table(rows: list[dict], columns: Sequence[str]) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{v + 0.0:.6f}" if abs(v) < 1e6 else f"{v:.6g}"
        if isinstance(v, list):
            return "[" + ", ".join(cell(x) for x in v) + "]"
        return str(v)

    body = [[cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    config = _config(args)
    trace = harness.run(config)
    path = harness.export_trace(trace, _trace_path(args, config))
    if args.figures:
        from .plotting import plot_trace
        plot_trace(trace, path.with_suffix(".png"))
    s = trace.summary
    print(_table([{"plant": config.plant_id, "lambda": config.lam, **s}],
                 ["plant", "lambda", "rms_error", "steady_state_error", "max_abs_output", "diverged"]))
    print(f"wrote {path}", file=sys.stderr)
    if s["diverged"]:
        print(f"run diverged at k={int(trace.k[-1])}", file=sys.stderr)
        if args.fail_on_divergence:
            return EXIT_DIVERGED
    return EXIT_OK


def analysis_report(config: harness.ExperimentConfig, at_step: int | None = None) -> dict:
    """Frozen-coefficient stability report at one time step of a simulated run."""
    if at_step is not None and not config.k0 <= at_step <= config.horizon:
        raise ConfigInvalid(f"at-step: must lie in [{config.k0}, {config.horizon}], got {at_step}")
    trace = harness.run(config.replace(horizon=at_step) if at_step and at_step >= 10 else config)
    k = at_step if at_step is not None else int(trace.k[-1])
    if k > trace.history.u.last_index:
        k = trace.history.u.last_index
    pg = exact_pg(config.plant_id, trace.history, k, config.l_y, config.l_u)
    T = char_poly(pg, config.lam)
    report = poles(T)
    poly = T.det() if isinstance(T, MatrixZPolynomial) else T
    out = {"plant_id": config.plant_id, "lambda": config.lam, "at_step": k,
           "char_poly_q": poly.coeffs.tolist(), **report.to_dict()}
    if isinstance(T, MatrixZPolynomial):
        out["char_poly_matrix_q"] = T.coeffs.tolist()
    if isinstance(pg, PgVector) and report.stable:
        out["ramp_steady_state_error"] = steady_state_error_ramp(pg, config.lam)
    return out


def cmd_analyze(args) -> int:
    config = _config(args)
    report = analysis_report(config, args.at_step)
    path = _out_dir(args) / f"{config.plant_id}_analysis.json"
    _write_json(path, report)
    row = {k: report[k] for k in ("plant_id", "lambda", "at_step", "max_modulus", "stable")}
    cols = list(row)
    if "ramp_steady_state_error" in report:
        row["ramp_e_ss"] = report["ramp_steady_state_error"]
        cols.append("ramp_e_ss")
    print(_table([row], cols))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _parse_lambdas(text: str | None) -> list[float]:
    items = [t for t in (text or "").split(",") if t.strip()]
    if not items:
        raise ConfigInvalid("lambdas: need at least one value")
    try:
        return [float(t) for t in items]
    except ValueError:
        raise ConfigInvalid(f"lambdas: cannot parse {text!r} as numbers") from None


def cmd_sweep(args) -> int:
    lambdas = _parse_lambdas(args.lambdas)
    config = _config(args)
    traces = harness.sweep(config, lambdas, workers=args.workers)
    rows = harness.sweep_rows(traces)
    path = harness.write_table(_out_dir(args) / f"{config.plant_id}_sweep.csv", rows)
    if args.figures:
        from .plotting import plot_sweep
        plot_sweep(traces, path.with_suffix(".png"))
    print(_table(rows, ["lambda", "rms_error", "steady_state_error", "max_abs_output", "diverged"]))
    print(f"wrote {path}", file=sys.stderr)
    if args.fail_on_divergence and any(r["diverged"] for r in rows):
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_table1(args) -> int:
    path = _out_dir(args) / "table1.csv"
    rows = harness.table1(path)
    print(_table([r.as_dict() for r in rows], ["lambda", "measured_e", "final_value_e", "constant"]))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _write_json(path: Path, data: dict) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    except OSError as exc:
        from .errors import IoFailure
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfac", description="Simulate and analyse MFAC loops with disturbance compensation.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="config file, or a bundled name such as ex2")
            p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--out", help="output directory (default: $MFAC_OUT_DIR or .)")

    p = sub.add_parser("simulate", help="run one closed-loop simulation")
    common(p)
    p.add_argument("--fail-on-divergence", action="store_true", help="exit 3 when the run diverges")
    p.add_argument("--figures", action="store_true", help="also write a PNG next to the CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="closed-loop poles for a frozen PG/PJM")
    common(p)
    p.add_argument("--at-step", type=int, help="snapshot time k (default: last step)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="one run per lambda")
    common(p)
    p.add_argument("--lambdas", required=True, help="comma-separated weights, e.g. 0,1.5,3")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--fail-on-divergence", action="store_true")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("table1", help="ramp-disturbance offset table on ex1_1")
    common(p, needs_config=False)
    p.set_defaults(func=cmd_table1)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigParse, ConfigInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MfacError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
