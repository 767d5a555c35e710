"""Command-line front end: ``nhcrit {sweep,find-ep,fit,check}``.

Exit statuses: 0 success, 2 validation error, 3 no result (e.g. no
exceptional point in the bracket), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .checks import run_checks
from .criticality import (
    FitError,
    NoExceptionalPointError,
    SweepRecord,
    fit_exponent,
    locate_ep,
    sweep,
)
from .eigensolver import DEFECT_TOL, EigenSolverError
from .model import ModelSpec, load_matrix_file, lmg_model

EXIT_OK, EXIT_INVALID, EXIT_NO_RESULT, EXIT_NUMERICAL = 0, 2, 3, 4

CSV_COLUMNS = ["gamma", "re_E", "im_E", "sz", "qfi", "re_h1b", "im_h1b", "min_gap", "degenerate"]


class ConfigError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{x:.17g}"


def parse_grid(text: str) -> tuple[float, float, int]:
    """``start:stop:points`` with both endpoints included."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be start:stop:points, got {text!r}")
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    return start, stop, points


@dataclass
class RunConfig:
    model: str = "lmg"
    matrix_path: str | None = None
    n_spins: int | None = None
    gamma_grid: tuple[float, float, int] | None = None
    tie_tol: float | None = None
    defect_tol: float = DEFECT_TOL
    fd_step: float | None = None
    output: dict = field(default_factory=lambda: {"path": None, "format": "csv"})

    def validate(self, need_grid: bool = True) -> None:
        if self.model not in ("lmg", "matrix-file"):
            raise ConfigError(f"model must be 'lmg' or 'matrix-file', got {self.model!r}")
        if self.model == "lmg":
            if self.n_spins is None or int(self.n_spins) != self.n_spins or self.n_spins < 1:
                raise ConfigError(f"lmg model needs a positive integer n_spins, got {self.n_spins!r}")
        elif not self.matrix_path:
            raise ConfigError("matrix-file model needs a matrix path")
        if need_grid:
            if self.gamma_grid is None:
                raise ConfigError("gamma grid missing")
            start, stop, points = self.gamma_grid
            if not start < stop:
                raise ConfigError(f"grid start must be < stop, got {start} >= {stop}")
            if points < 2:
                raise ConfigError("grid needs at least 2 points")
        for name in ("tie_tol", "defect_tol", "fd_step"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        fmt_ = (self.output or {}).get("format", "csv")
        if fmt_ not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {fmt_!r}")

    def gammas(self) -> np.ndarray:
        start, stop, points = self.gamma_grid
        return np.linspace(start, stop, points)

    def build_model(self) -> ModelSpec:
        if self.model == "lmg":
            return lmg_model(int(self.n_spins))
        return load_matrix_file(self.matrix_path)


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = RunConfig()
    for key, value in raw.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config key {key!r}")
        if key == "gamma_grid":
            if isinstance(value, str):
                value = parse_grid(value)
            elif isinstance(value, dict):
                value = (float(value["start"]), float(value["stop"]), int(value["points"]))
            else:
                value = tuple(value)
        if key == "output" and isinstance(value, str):
            value = {"path": value, "format": "json" if value.endswith(".json") else "csv"}
        setattr(cfg, key, value)
    return cfg


# --- record serialization -----------------------------------------------------


def records_to_csv(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        h1 = r.h1_density
        writer.writerow([
            fmt(r.gamma), fmt(r.energy.real), fmt(r.energy.imag), fmt(r.sz), fmt(r.qfi),
            "" if h1 is None else fmt(h1.real), "" if h1 is None else fmt(h1.imag),
            fmt(r.min_gap), int(r.degenerate),
        ])
    return buf.getvalue()


def _cplx(z):
    return None if z is None else {"re": z.real, "im": z.imag}


def records_to_json(records: list[SweepRecord]) -> str:
    rows = []
    for r in records:
        d = asdict(r)
        d["energy"] = _cplx(r.energy)
        d["h1_density"] = _cplx(r.h1_density)
        rows.append({k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()})
    return json.dumps(rows, indent=1, sort_keys=False) + "\n"


def _f(row, key, default=math.nan):
    v = row.get(key, "")
    return float(v) if v not in ("", None) else default


def read_records(path) -> list[tuple[SweepRecord, dict]]:
    """Read a sweep CSV (or any CSV with a ``gamma`` column) back into records.

    Each record comes with a dict of any columns outside the sweep schema.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "gamma" not in reader.fieldnames:
            raise ConfigError(f"{path}: CSV needs a 'gamma' column")
        extra = [c for c in reader.fieldnames if c not in CSV_COLUMNS]
        out = []
        for row in reader:
            has_h1 = row.get("re_h1b", "") not in ("", None)
            h1 = complex(_f(row, "re_h1b"), _f(row, "im_h1b")) if has_h1 else None
            rec = SweepRecord(
                gamma=_f(row, "gamma"),
                energy=complex(_f(row, "re_E"), _f(row, "im_E")),
                h1_density=h1,
                sz=_f(row, "sz"),
                qfi=_f(row, "qfi"),
                degenerate=row.get("degenerate", "0") in ("1", "true", "True"),
                min_gap=_f(row, "min_gap"),
                defective="re_h1b" in reader.fieldnames and not has_h1,
            )
            out.append((rec, {c: _f(row, c) for c in extra}))
    return out


# --- commands -----------------------------------------------------------------


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "model", None):
        cfg.model = args.model
    if getattr(args, "matrix", None):
        cfg.matrix_path = args.matrix
        if not getattr(args, "model", None):
            cfg.model = "matrix-file"
    if getattr(args, "n", None) is not None:
        cfg.n_spins = args.n
    if getattr(args, "gamma", None):
        cfg.gamma_grid = parse_grid(args.gamma)
    for name in ("tie_tol", "defect_tol", "fd_step"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "out", None):
        cfg.output = dict(cfg.output or {})
        cfg.output["path"] = args.out
        if getattr(args, "format", None) is None:
            cfg.output["format"] = "json" if args.out.endswith(".json") else "csv"
    if getattr(args, "format", None):
        cfg.output = dict(cfg.output or {})
        cfg.output["format"] = args.format
    return cfg


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    spec = cfg.build_model()
    records = sweep(spec, cfg.gammas(), tie_tol=cfg.tie_tol, defect_tol=cfg.defect_tol,
                    workers=args.workers)
    fmt_ = cfg.output.get("format", "csv")
    text = records_to_json(records) if fmt_ == "json" else records_to_csv(records)
    path = cfg.output.get("path")
    if path:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from None
        failed = sum(r.error is not None for r in records)
        print(f"wrote {len(records)} rows to {path}" + (f" ({failed} failed points)" if failed else ""),
              file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def ep_report(ep) -> dict:
    return {
        "gamma_c": ep.gamma_c,
        "p": ep.p,
        "p_fit": None if math.isnan(ep.p_fit) else ep.p_fit,
        "multiplicity": ep.multiplicity,
        "e_c": _cplx(ep.e_c),
        "gap_at_min": ep.gap_at_min,
        "bracket": list(ep.bracket),
    }


def cmd_find_ep(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate(need_grid=False)
    lo, hi = args.bracket
    if not lo < hi:
        raise ConfigError(f"bracket must satisfy lo < hi, got {lo} {hi}")
    if not args.tol > 0:
        raise ConfigError("tol must be positive")
    spec = cfg.build_model()
    ep = locate_ep(spec, (lo, hi), tol=args.tol, tie_tol=cfg.tie_tol)
    report = ep_report(ep)
    print(f"gamma_c      = {ep.gamma_c:.9f}")
    print(f"p            = {ep.p}  (fit {ep.p_fit:.4f}, cluster size {ep.multiplicity})")
    print(f"e_c          = {ep.e_c.real:.9g}{ep.e_c.imag:+.9g}j")
    print(f"gap_at_min   = {ep.gap_at_min:.3e}")
    text = json.dumps(report, sort_keys=True)
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
    return EXIT_OK


def cmd_fit(args) -> int:
    rows = read_records(args.input)
    if args.column in ("sz", "qfi", "re_E", "im_E", "re_h1b", "im_h1b", "min_gap"):
        data = [rec for rec, _ in rows]
    else:
        if not rows or args.column not in rows[0][1]:
            raise ConfigError(f"column {args.column!r} not found in {args.input}")
        data = [(rec.gamma, extra[args.column]) for rec, extra in rows]
    res = fit_exponent(data, column=args.column, gamma_c=args.gamma_c,
                       window=tuple(args.window), side=args.side, reference=args.reference)
    print(f"exponent   = {fmt(res.exponent)}")
    print(f"amplitude  = {fmt(res.amplitude)}")
    print(f"stderr     = {fmt(res.stderr)}")
    print(f"r_squared  = {fmt(res.r_squared)}")
    print(f"window     = [{fmt(res.window[0])}, {fmt(res.window[1])}]")
    print(f"n_points   = {res.n_points}")
    if args.json:
        print(json.dumps(asdict(res)))
    return EXIT_OK


def cmd_check(args) -> int:
    if args.n < 1:
        raise ConfigError(f"--n must be a positive integer, got {args.n}")
    results = run_checks(args.n, inject_fault=args.inject_fault)
    for r in results:
        print(r.row())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_NUMERICAL


# --- argument parsing ---------------------------------------------------------


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--tie-tol", dest="tie_tol", type=float, default=default)
    parser.add_argument("--defect-tol", dest="defect_tol", type=float, default=default)
    parser.add_argument("--fd-step", dest="fd_step", type=float, default=default)
    parser.add_argument("--config", default=default, help="JSON file with RunConfig fields")


def _model_flags(parser):
    parser.add_argument("--model", choices=("lmg", "matrix-file"))
    parser.add_argument("--n", type=int, help="number of spins (lmg)")
    parser.add_argument("--matrix", help="path to a dim/H0/H1 matrix file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhcrit", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="steady-state sweep over a gamma grid")
    _global_flags(p, suppress=True)
    _model_flags(p)
    p.add_argument("--gamma", help="start:stop:points (inclusive)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("find-ep", help="locate the steady-state exceptional point")
    _global_flags(p, suppress=True)
    _model_flags(p)
    p.add_argument("--bracket", nargs=2, type=float, required=True, metavar=("LO", "HI"))
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--report", help="also write the JSON report to this file")
    p.set_defaults(func=cmd_find_ep)

    p = sub.add_parser("fit", help="log-log exponent fit on a sweep file")
    _global_flags(p, suppress=True)
    p.add_argument("--input", required=True)
    p.add_argument("--column", default="sz")
    p.add_argument("--gamma-c", dest="gamma_c", type=float, required=True)
    p.add_argument("--window", nargs=2, type=float, default=[1e-3, 1e-1], metavar=("LO", "HI"))
    p.add_argument("--side", choices=("above", "below"), default="above")
    p.add_argument("--reference", type=float, default=None)
    p.add_argument("--json", action="store_true", help="also print the result as JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("check", help="run the invariant suite")
    _global_flags(p, suppress=True)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, FitError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NO_RESULT
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoExceptionalPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_RESULT
    except (EigenSolverError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
