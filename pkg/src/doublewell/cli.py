"""Command-line front end: ``doublewell solve-single | sweep | verify``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DoubleWellError
from .grid_ops import build_grid, write_gridfunction
from .potential import PotentialSpec
from .sweep import (
    CHECK_NAMES,
    CheckSettings,
    SweepSettings,
    estimate_kappa_min,
    evaluate_checks,
    run_sweep,
    solve_single_well,
)

log = logging.getLogger("doublewell")

SCHEMA_VERSION = 1
LEVEL_FIELDS = ("j", "e_j", "residual", "parity", "kappa")
# Upper limit on bound states searched by solve-single.
MAX_LEVELS = 64

_TOL_DEFAULTS = {
    "eig_tol": 1e-10,
    "ratio_tol": 0.05,
    "rate_tol": 0.01,
    "epsilon": None,
    "agreement_tol": 1e-3,
    "tail_tol": 0.02,
    "agmon_tol": None,
}
_TOP_KEYS = {"schema_version", "potential", "nu", "h", "levels", "d_values", "tolerances", "output_dir"}


@dataclass
class RunConfig:
    potential: PotentialSpec
    nu: int
    h: float
    levels: tuple[int, ...]
    d_values: tuple[float, ...]
    tolerances: dict = field(default_factory=lambda: dict(_TOL_DEFAULTS))
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "potential": self.potential.to_dict(),
            "nu": self.nu,
            "h": self.h,
            "levels": list(self.levels),
            "d_values": list(self.d_values),
            "tolerances": dict(self.tolerances),
            "output_dir": self.output_dir,
        }

    def sweep_settings(self) -> SweepSettings:
        return SweepSettings(
            spec=self.potential,
            nu=self.nu,
            h=self.h,
            levels=self.levels,
            d_values=self.d_values,
            eig_tol=self.tolerances["eig_tol"],
        )

    def check_settings(self, enabled=CHECK_NAMES) -> CheckSettings:
        t = self.tolerances
        return CheckSettings(
            ratio_tol=t["ratio_tol"],
            rate_tol=t["rate_tol"],
            epsilon=t["epsilon"],
            agreement_tol=t["agreement_tol"],
            tail_tol=t["tail_tol"],
            agmon_tol=t["agmon_tol"],
            enabled=tuple(enabled),
        )


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return n
    return None


def _fail(text: str, key: str, msg: str, source: str):
    n = _line_of(text, key)
    where = f"{source}:{n}" if n else source
    raise ConfigError(f"{where}: {msg}")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Validate a JSON run configuration; errors name the offending line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be an object")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        _fail(text, unknown[0], f"unknown key {unknown[0]!r}", source)
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        _fail(text, "schema_version", f"schema_version must be {SCHEMA_VERSION}, got {version!r}", source)
    for key in ("potential", "nu", "h", "d_values"):
        if key not in data:
            raise ConfigError(f"{source}: missing required key {key!r}")

    try:
        spec = PotentialSpec.from_dict(data["potential"])
    except (KeyError, ValueError, TypeError, DoubleWellError) as exc:
        _fail(text, "potential", f"bad potential: {exc}", source)
    nu = data["nu"]
    if nu not in (1, 2) or isinstance(nu, bool):
        _fail(text, "nu", f"nu must be 1 or 2, got {nu!r}", source)
    h = data["h"]
    if not isinstance(h, (int, float)) or isinstance(h, bool) or not h > 0:
        _fail(text, "h", f"h must be a positive number, got {h!r}", source)

    levels = data.get("levels", [1])
    if not isinstance(levels, list) or not all(isinstance(j, int) and not isinstance(j, bool) for j in levels):
        _fail(text, "levels", "levels must be a list of integers", source)
    if any(j < 1 for j in levels):
        _fail(text, "levels", "levels must all be >= 1", source)
    if len(set(levels)) != len(levels):
        _fail(text, "levels", "levels must not repeat", source)

    d_values = data["d_values"]
    if not isinstance(d_values, list) or not all(
        isinstance(d, (int, float)) and not isinstance(d, bool) for d in d_values
    ):
        _fail(text, "d_values", "d_values must be a list of numbers", source)
    if any(b <= a for a, b in zip(d_values, d_values[1:])):
        _fail(text, "d_values", "d_values must be strictly increasing", source)
    if any(d <= 2 * spec.a for d in d_values):
        _fail(text, "d_values", f"every d must exceed 2a = {2 * spec.a}", source)

    tol = dict(_TOL_DEFAULTS)
    given = data.get("tolerances", {})
    if not isinstance(given, dict):
        _fail(text, "tolerances", "tolerances must be an object", source)
    for key, value in given.items():
        if key not in tol:
            _fail(text, key, f"unknown tolerance {key!r}", source)
        if value is not None and (not isinstance(value, (int, float)) or not value > 0):
            _fail(text, key, f"tolerance {key!r} must be a positive number or null", source)
        tol[key] = value
    if tol["eig_tol"] is None:
        _fail(text, "eig_tol", "eig_tol cannot be null", source)

    out = data.get("output_dir", "out")
    if not isinstance(out, str):
        _fail(text, "output_dir", "output_dir must be a string", source)
    return RunConfig(
        potential=spec,
        nu=nu,
        h=float(h),
        levels=tuple(levels),
        d_values=tuple(float(d) for d in d_values),
        tolerances=tol,
        output_dir=out,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), str(path))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return "%.16e" % v if math.isfinite(v) else str(v)
    return str(v)


def write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(row.get(k)) for k in fields])


def _output_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.output or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_checks(spec: str | None) -> tuple[str, ...]:
    if not spec:
        return CHECK_NAMES
    names = tuple(s.strip() for s in spec.split(",") if s.strip())
    bad = [n for n in names if n not in CHECK_NAMES]
    if bad:
        raise ConfigError(f"unknown check(s) {', '.join(bad)}; choose from {', '.join(CHECK_NAMES)}")
    return names


def cmd_solve_single(args) -> int:
    cfg = load_config(args.config)
    if not cfg.levels:
        log.warning("levels is empty, nothing to solve")
        return 0
    spec = cfg.potential
    kappa_min = estimate_kappa_min(spec, cfg.nu, cfg.h, cfg.levels, cfg.tolerances["eig_tol"])
    grid = build_grid(cfg.nu, 0.0, kappa_min, cfg.h, spec.a)
    if args.dry_run:
        print(f"solve-single: grid {grid.n} nodes at h = {cfg.h}, box half-width from kappa_min = {kappa_min:.6g}")
        return 0
    k = max(cfg.levels) + 1
    while True:
        sw = solve_single_well(spec, grid, min(k, grid.size), cfg.tolerances["eig_tol"])
        if len(sw.bound) < len(sw.pairs) or k >= min(MAX_LEVELS, grid.size):
            break
        k *= 2
    out = _output_dir(args, cfg)
    rows = []
    for j, p in enumerate(sw.bound, start=1):
        rows.append({"j": j, "e_j": p.energy, "residual": p.residual, "parity": p.parity.value, "kappa": p.kappa})
        write_gridfunction(out / f"phi_{j}.bin", p.vector)
    write_csv(out / "levels.csv", LEVEL_FIELDS, rows)
    for r in rows:
        print(f"j={r['j']}  e={r['e_j']:.12g}  kappa={r['kappa']:.10g}  parity={r['parity']}")
    missing = [j for j in cfg.levels if j > len(rows)]
    if missing:
        log.warning("requested levels %s are not bound", missing)
    print(f"{len(rows)} bound level(s) written to {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    enabled = _parse_checks(args.checks)
    if not cfg.levels:
        log.warning("levels is empty, nothing to sweep")
        return 0
    settings = cfg.sweep_settings()
    kappa_min = estimate_kappa_min(cfg.potential, cfg.nu, cfg.h, cfg.levels, settings.eig_tol)
    if args.dry_run:
        print(f"sweep plan: nu={cfg.nu} h={cfg.h} levels={list(cfg.levels)} kappa_min={kappa_min:.6g}")
        for d in cfg.d_values:
            g = build_grid(cfg.nu, d, kappa_min, cfg.h, cfg.potential.a)
            print(f"  d={d:g} (used {g.d:g}) grid {g.n} = {g.size} unknowns, levels {list(cfg.levels)}")
        print(f"checks: {', '.join(enabled)}")
        return 0
    jobs = args.jobs or os.cpu_count() or 1
    records = run_sweep(settings, jobs=jobs, kappa_min=kappa_min)
    checks = evaluate_checks(settings, records, cfg.check_settings(enabled))
    out = _output_dir(args, cfg)
    write_csv(out / "sweep.csv", records[0].CSV_FIELDS if records else (), [r.row() for r in records])
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "checks": [c.to_dict() for c in checks],
        "record_flags": [
            {"j": r.j, "d": r.d, "flags": r.flags} for r in records if r.flags
        ],
        "summary": {"passed": sum(c.passed for c in checks), "total": len(checks)},
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return _print_summary(report["checks"])


def _print_summary(checks: list[dict]) -> int:
    width = max((len(c["name"]) for c in checks), default=4)
    for c in checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status}  {c['name']:<{width}}  {c.get('paper_ref', '')}")
    n, total = sum(bool(c["pass"]) for c in checks), len(checks)
    if n == total:
        print(f"ALL CHECKS PASS ({n}/{total})")
        return 0
    failed = ", ".join(c["name"] for c in checks if not c["pass"])
    print(f"CHECKS FAILED ({n}/{total} pass): {failed}")
    return 1


def cmd_verify(args) -> int:
    path = Path(args.report)
    if not path.is_file():
        print(f"error: report not found: {path}", file=sys.stderr)
        return 2
    try:
        report = json.loads(path.read_text())
        checks = report["checks"]
        for c in checks:
            c["name"], c["pass"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: malformed report {path}: {exc}", file=sys.stderr)
        return 2
    return _print_summary(checks)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="doublewell", description="Tunnelling splittings of finite-difference double wells.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--output", help="output directory (overrides output_dir)")
        sp.add_argument("--dry-run", action="store_true", help="print the plan and write nothing")

    s = sub.add_parser("solve-single", help="bound states of one well")
    common(s)
    s.set_defaults(func=cmd_solve_single)

    s = sub.add_parser("sweep", help="hopping, splitting and checks over a range of d")
    common(s)
    s.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    s.add_argument("--checks", help=f"comma-separated subset of: {', '.join(CHECK_NAMES)}")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("verify", help="summarize a report.json")
    s.add_argument("report", help="path to report.json")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DoubleWellError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
