"""Command-line driver: configuration, pipelines and JSON/CSV reports."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import platform
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__, construction, covering, fields, functionals, geometry, kernels, maximal
from .verification import ANCHORS, DEFAULT_TOLERANCES, CheckRecord, _jsonable, run_all

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAX_EXIT = 100  # exit code = number of failed checks, capped here
CONFIG_ERROR = 101
RUN_ERROR = 102


class ConfigError(ValueError):
    pass


@dataclass
class FieldSpec:
    name: str = "gaussian_curl"
    params: dict[str, Any] = field(default_factory=dict)
    path: str | None = None

    def build(self) -> fields.VectorField:
        if self.path is not None:
            return fields.read_grid(self.path)
        return fields.make_field(self.name, **self.params)


@dataclass
class PointSource:
    csv: str | None = None
    lattice: dict[str, list] | None = None

    def load(self) -> np.ndarray:
        if self.csv is not None:
            return read_points(self.csv)
        if self.lattice is not None:
            lo = np.asarray(self.lattice["lo"], dtype=float)
            hi = np.asarray(self.lattice["hi"], dtype=float)
            n = np.broadcast_to(np.asarray(self.lattice.get("n", 2), dtype=int), (3,))
            axes = [np.linspace(lo[i], hi[i], n[i]) for i in range(3)]
            return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        return np.zeros((1, 3))

    def box(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.lattice is not None:
            return np.asarray(self.lattice["lo"], dtype=float), np.asarray(self.lattice["hi"], dtype=float)
        return pts.min(axis=0), pts.max(axis=0)


@dataclass
class RunConfig:
    field: FieldSpec = dataclasses.field(default_factory=FieldSpec)
    capsule: construction.CapsuleParams = dataclasses.field(default_factory=construction.CapsuleParams)
    maximal: maximal.MaximalConfig | None = None
    quadrature: geometry.QuadratureSpec | None = None
    points: PointSource = dataclasses.field(default_factory=PointSource)
    out: str | None = None
    seed: int = 0
    tolerances: dict[str, float] = dataclasses.field(default_factory=dict)
    cover_K: float = 1.0
    weak_p: float = 2.0
    workers: int = 1

    def __post_init__(self):
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}; known: {sorted(DEFAULT_TOLERANCES)}")
        if self.field.path is not None and not Path(self.field.path).exists():
            raise ConfigError(f"field file not found: {self.field.path}")
        if self.points.csv is not None and not Path(self.points.csv).exists():
            raise ConfigError(f"point file not found: {self.points.csv}")
        if not self.seed >= 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    def construction_setup(self) -> tuple[maximal.MaximalConfig, geometry.QuadratureSpec]:
        cfg, q = construction.default_construction_config()
        return self.maximal or cfg, self.quadrature or q

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))


def _build(cls, table: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"[{section}]: {err}") from None


def config_from_mapping(d: dict) -> RunConfig:
    d = dict(d)
    kw: dict[str, Any] = {}
    for key, cls in (("field", FieldSpec), ("capsule", construction.CapsuleParams), ("maximal", maximal.MaximalConfig), ("quadrature", geometry.QuadratureSpec), ("points", PointSource)):
        if key in d:
            kw[key] = _build(cls, d.pop(key), key)
    for key in ("out", "seed", "tolerances", "cover_K", "weak_p", "workers"):
        if key in d:
            kw[key] = d.pop(key)
    if d:
        raise ConfigError(f"unknown top-level config keys: {sorted(d)}")
    return RunConfig(**kw)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            return config_from_mapping(tomllib.load(fh))
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None


def read_points(path: str | Path) -> np.ndarray:
    """x,y,z rows; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                if not rows and lineno == 1:
                    continue
                raise ConfigError(f"{path}:{lineno}: non-numeric point row {row}") from None
            if len(vals) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 3 columns, got {len(vals)}")
            rows.append(vals)
    return np.asarray(rows, dtype=float).reshape(-1, 3)


# ---------------------------------------------------------------------------
# reports


def environment() -> dict:
    return {
        "capsulelab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


def build_report(command: str, config: RunConfig, records: Sequence[CheckRecord], results: dict | None = None) -> dict:
    for r in records:
        if r.anchor not in ANCHORS:
            raise KeyError(f"check {r.name!r} names unregistered anchor {r.anchor!r}")
    counts = {s: sum(r.status == s for r in records) for s in ("pass", "fail", "recorded")}
    return {
        "command": command,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "environment": environment(),
        "config": config.to_dict(),
        "checks": [r.to_dict() for r in records],
        "summary": counts,
        "results": _jsonable(results or {}),
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, out: str | Path | None, stem: str) -> list[Path]:
    if out is None:
        return []
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.json"
    path.write_text(dumps(report))
    table = out / f"{stem}_checks.csv"
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "anchor", "status", "bound"])
        for c in report["checks"]:
            w.writerow([c["name"], c["anchor"], c["status"], json.dumps(c["bound"])])
    return [path, table]


def exit_code(records: Sequence[CheckRecord]) -> int:
    return min(sum(r.status == "fail" for r in records), MAX_EXIT)


def _print_records(records: Sequence[CheckRecord]) -> None:
    for r in records:
        print(f"{r.status.upper():8s} {r.name}  [{r.anchor}]")


# ---------------------------------------------------------------------------
# pipelines


def run_verify(config: RunConfig) -> tuple[dict, list[CheckRecord]]:
    records = run_all(config.tolerances, config.seed)
    return build_report("verify", config, records), records


def run_construct(config: RunConfig, field_: fields.VectorField | None = None) -> tuple[dict, list[CheckRecord], construction.Classification]:
    vf = field_ or config.field.build()
    pts = config.points.load()
    cfg, q = config.construction_setup()
    fam = construction.classify_points(vf, pts, config.capsule, cfg, q, config.workers)
    built = fam.constructed()
    eps0 = config.capsule.eps0
    tol = config.tolerances.get("root_residual", DEFAULT_TOLERANCES["root_residual"])
    finite = [c for c in built if not c.unbounded]
    residuals = np.array([c.residual for c in finite]) if finite else np.zeros(0)
    records = [
        CheckRecord(
            "construction_residual",
            "construction.residual",
            "pass" if residuals.size == 0 or residuals.max() <= tol * eps0 else "fail",
            {"max_residual": float(residuals.max()) if residuals.size else 0.0, "constructed": len(finite)},
            tol * eps0,
        )
    ]
    xi2 = np.array([c.xi**2 for c in finite]) if finite else np.zeros(0)
    lo, hi = config.points.box(pts)
    vol = float(np.prod(np.where(hi > lo, hi - lo, 1.0)))
    distinct = np.unique(xi2[xi2 > 0])
    weak = maximal.weak_norm_from_values(xi2, config.weak_p, distinct * (1 - 1e-12) if distinct.size else [1.0], vol) if xi2.size else None
    if weak is not None:
        records.append(CheckRecord("xi_weak_norm", "maximal.weak_norm", "recorded", {"estimate": weak.estimate, "p": config.weak_p, "points": int(xi2.size)}))
    results = {
        "histogram": {"round": len(fam.round), "long": len(fam.long), "unbounded": len(fam.unbounded), "failed": len(fam.errors)},
        "residuals": {
            "max": float(residuals.max()) if residuals.size else 0.0,
            "mean": float(residuals.mean()) if residuals.size else 0.0,
            "max_over_eps0": float(residuals.max() / eps0) if residuals.size else 0.0,
        },
        "errors": {str(k): v for k, v in fam.errors.items()},
        "capsules": [None if c is None else c.to_dict() for c in fam.results],
    }
    return build_report("construct", config, records, results), records, fam


def parse_capsules(text: str) -> list[geometry.Capsule]:
    """Capsules from a JSON list of records or a construct report; raises ConfigError with line/column."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed capsule JSON at line {err.lineno}, column {err.colno} (offset {err.pos}): {err.msg}") from None
    if isinstance(data, dict):
        data = data.get("results", data).get("capsules")
    if not isinstance(data, list):
        raise ConfigError("capsule JSON must be a list of capsule records or a construct report")
    out = []
    for i, rec in enumerate(data):
        if rec is None:
            continue
        if "capsule" in rec:
            if rec.get("unbounded"):
                continue
            rec = rec["capsule"]
        try:
            out.append(geometry.Capsule.from_dict(rec))
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"capsule record {i}: {err}") from None
    return out


def run_cover(config: RunConfig, family: Sequence[geometry.Capsule]) -> tuple[dict, list[CheckRecord]]:
    sel = covering.vitali_select(family)
    rep = covering.coverage_check(sel, family, config.cover_K)
    meas = covering.measure_inequality(sel, family, max(rep.empirical_K, config.cover_K), seed=config.seed)
    records = [
        CheckRecord(
            "vitali_selection",
            "covering.vitali",
            "pass" if sel.disjoint and sel.elimination_verified else "fail",
            {"selected": len(sel.selected), "iterations": sel.iterations, "disjoint": sel.disjoint, "unexplained": sel.unexplained},
        ),
        CheckRecord(
            "coverage",
            "covering.vitali",
            "recorded",
            {"K": rep.K, "center_fraction": rep.center_fraction, "sample_fraction": rep.sample_fraction, "empirical_K": rep.empirical_K},
        ),
        CheckRecord("vitali_measure", "covering.vitali", "recorded" if meas.holds else "fail", {"union_volume": meas.union, "dilated_sum": meas.dilated_sum, "K": meas.K}),
    ]
    results = {"selected": sel.selected, "uncovered_indices": rep.uncovered_indices}
    return build_report("cover", config, records, results), records


def _vec(text: str) -> tuple[float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return tuple(parts)


def _exact(text: str):
    try:
        return Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a rational such as 1/9, got {text!r}") from None


def run_functional(config: RunConfig, args: argparse.Namespace) -> tuple[dict, list[CheckRecord]]:
    kind = args.kind
    records: list[CheckRecord] = []
    if kind == "thresholds":
        inp = functionals.ExponentInputs(alpha=args.alpha, beta=args.beta, delta=args.delta, sigma=args.sigma)
        t = functionals.thresholds(inp)
        results = {"thresholds": t.to_dict()}
        if args.s is not None:
            results["competitors"] = {k: str(v) for k, v in functionals.competitor_exponents(args.s).items()}
        if args.alpha < Fraction(1, 6):
            results["crossovers"] = {
                "seregin": str(functionals.seregin_crossover(args.alpha)),
                "chae_wolf": str(functionals.chae_wolf_crossover(args.alpha)),
            }
        return build_report("functional", config, records, results), records
    vf = config.field.build()
    q = config.quadrature or geometry.QuadratureSpec.gauss(8)
    if kind == "line":
        val = functionals.line_integral(vf, args.x0, args.x1, args.panels)
        results = {"line_integral": val, "x0": args.x0, "x1": args.x1}
    elif kind == "osc":
        val = functionals.mean_oscillation(vf, args.x, args.R, args.s_exp, q)
        results = {"oscillation": val, "x": args.x, "R": args.R, "s": args.s_exp}
    else:
        moment = functionals.stream_moment(vf, args.x, args.R, args.e, q)
        mag, bound = functionals.moment_oscillation_bound(vf, args.x, args.R, 1.0, args.e, q)
        results = {"stream_moment": moment, "oscillation_bound": bound, "x": args.x, "R": args.R, "e": args.e}
        records.append(CheckRecord("moment_oscillation_bound", "functionals.stream_moment", "pass" if mag <= bound * (1 + 1e-9) else "fail", {"moment": mag}, bound))
    return build_report("functional", config, records, results), records


def run_kernel(config: RunConfig, nu: float, U: float, table: Path | None) -> tuple[dict, list[CheckRecord]]:
    from .verification import random_shell

    k = kernels.OseenKernel(nu, U)
    pts = config.points.load() if (config.points.csv or config.points.lattice) else random_shell(1000, 0.1, 10.0, config.seed)
    pts = pts[np.linalg.norm(pts, axis=1) > 0]
    tol = config.tolerances.get("pde_residual", DEFAULT_TOLERANCES["pde_residual"])
    res = kernels.relative_residual(k, pts)
    records = [CheckRecord("pde_residual", "kernel.pde_residual", "pass" if res.max() < tol else "fail", {"max_relative_residual": float(res.max()), "points": len(pts)}, tol)]
    radii = [1e-3, 1e-2, 1e-1, 1.0]
    sweep = {f"r={r:g}": kernels.delta_normalization(k, r) for r in radii}
    records.append(CheckRecord("delta_normalization", "kernel.delta_normalization", "recorded", sweep))
    if table is not None:
        G = kernels.gamma(k, pts)
        dG = kernels.grad_gamma(k, pts)
        table.parent.mkdir(parents=True, exist_ok=True)
        with open(table, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "gamma", "dgamma_x", "dgamma_y", "dgamma_z", "relative_residual"])
            for p, g, d, r in zip(pts, G, dG, res):
                w.writerow([repr(float(v)) for v in (*p, g, *d, r)])
    results = {"nu": nu, "U": U, "residual_quantiles": {str(qq): float(np.quantile(res, qq)) for qq in (0.5, 0.9, 1.0)}}
    return build_report("kernel", config, records, results), records


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--out", help="output directory for JSON/CSV reports")
    p.add_argument("--points", help="CSV file of x,y,z points")
    p.add_argument("--field", help="field preset name or path to a VF3D grid file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capsulelab", description="Capsule constructions, maximal functions and kernel checks.")
    parser.add_argument("--version", action="version", version=f"capsulelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("verify", help="run the full property suite"))
    _common(sub.add_parser("construct", help="construct capsules at the given points"))
    p = sub.add_parser("cover", help="greedy disjoint selection over a capsule file")
    _common(p)
    p.add_argument("capsules", help="JSON list of capsules or a construct report")
    p.add_argument("--K", type=float, help="dilation factor for the coverage check")

    p = sub.add_parser("functional", help="line integrals, oscillations, moments, exponents")
    fsub = p.add_subparsers(dest="kind", required=True)
    q = fsub.add_parser("line")
    _common(q)
    q.add_argument("--x0", type=_vec, required=True)
    q.add_argument("--x1", type=_vec, required=True)
    q.add_argument("--panels", type=int, default=16)
    q = fsub.add_parser("osc")
    _common(q)
    q.add_argument("--x", type=_vec, default=(0.0, 0.0, 0.0))
    q.add_argument("--R", type=float, default=1.0)
    q.add_argument("--s", dest="s_exp", type=float, default=2.0)
    q = fsub.add_parser("moment")
    _common(q)
    q.add_argument("--x", type=_vec, default=(0.0, 0.0, 0.0))
    q.add_argument("--R", type=float, default=1.0)
    q.add_argument("--e", type=_vec, default=(1.0, 0.0, 0.0))
    q = fsub.add_parser("thresholds")
    _common(q)
    q.add_argument("--alpha", type=_exact, default=Fraction(1, 9))
    q.add_argument("--beta", type=_exact, default=Fraction(29, 193))
    q.add_argument("--delta", type=_exact, default=Fraction(5, 12))
    q.add_argument("--sigma", type=_exact, default=Fraction(5, 12))
    q.add_argument("--s", type=_exact, default=None)

    p = sub.add_parser("kernel", help="kernel tables and residual sweeps")
    _common(p)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--U", type=float, default=0.0)
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.points is not None:
        cfg.points = PointSource(csv=args.points)
    if args.field is not None:
        cfg.field = FieldSpec(path=args.field) if Path(args.field).exists() else FieldSpec(name=args.field)
    if getattr(args, "K", None) is not None:
        cfg.cover_K = args.K
    cfg.__post_init__()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        if args.command == "verify":
            report, records = run_verify(cfg)
        elif args.command == "construct":
            report, records, _ = run_construct(cfg)
        elif args.command == "cover":
            report, records = run_cover(cfg, parse_capsules(Path(args.capsules).read_text()))
        elif args.command == "functional":
            report, records = run_functional(cfg, args)
        else:
            table = Path(cfg.out) / "kernel_table.csv" if cfg.out else None
            report, records = run_kernel(cfg, args.nu, args.U, table)
        stem = args.command if args.command != "functional" else f"functional_{args.kind}"
        write_report(report, cfg.out, stem)
    except (ConfigError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return CONFIG_ERROR if isinstance(err, ConfigError) else RUN_ERROR
    _print_records(records)
    if args.command == "functional" or cfg.out is None:
        print(json.dumps(report["results"], indent=2, sort_keys=True))
    return exit_code(records)


if __name__ == "__main__":
    sys.exit(main())
