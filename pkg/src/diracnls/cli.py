"""Experiment driver: scenario registry, key = value configuration, reproducible runs.

    python -m diracnls --scenario critical-defocusing --out runs/crit
    python -m diracnls --config run.cfg --steps 5000

Each run writes diagnostics (CSV or JSON rows), a JSON manifest and, if
requested, an .npz of snapshots into the output directory. Wall time goes to a
separate timing.json so that identical configs give bit-identical manifests.
"""

from __future__ import annotations

import argparse
import cmath
import csv
import dataclasses
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, filament
from .closed_forms import SelfSimilarParams
from .equations import EquationSpec, Family
from .grid import FieldState, SpatialGrid
from .scattering import InsufficientHorizon, cauchy_tail
from .solver import StepRule, TimeMesh, integrate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


SCENARIOS = {
    "critical-defocusing": Family.CRITICAL_CONFORMAL,
    "subcritical-conformal": Family.CONFORMAL_PERTURBATION,
    "subcritical-direct": Family.DIRECT_PERTURBATION,
    "gp": Family.GROSS_PITAEVSKII,
    "filament-corner": None,
}

# scenario-specific defaults; anything not listed falls back to the RunConfig default
SCENARIO_DEFAULTS = {
    "critical-defocusing": dict(n=2048, half_width=256.0, t_start=1.0, t_end=1000.0, steps=2500,
                                alpha=2.0, amp=0.13, width=4.0),
    "subcritical-conformal": dict(n=4096, half_width=1024.0, t_start=1.0, t_end=1024.0, steps=2000,
                                  alpha=1.0, amp=0.1, width=4.0),
    "subcritical-direct": dict(n=1024, half_width=64.0, t_start=1.0, t_end=2.0, steps=1000,
                               alpha=1.0, amp=0.1, width=2.0),
    "gp": dict(n=256, half_width=32.0, t_start=0.0, t_end=10.0, steps=10000, alpha=2.0,
               amp=0.05, width=2.0),
    "filament-corner": dict(n=0, half_width=1.0, t_start=0.001, t_end=0.004, steps=2, alpha=2.0,
                            amp=0.0, width=1.0),
}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    n: int = 1024
    half_width: float = 64.0
    t_start: float = 1.0
    t_end: float = 10.0
    steps: int = 1000
    rule: str = ""  # empty: log for conformal families, uniform otherwise
    alpha: float = 2.0
    a_mod: float = 1.0
    a_arg: float = 0.0
    sign: str = "defocusing"
    sigma: int = 0  # 0: the family's own value
    profile: str = "gaussian"
    amp: float = 0.1
    width: float = 4.0
    mode_index: int = 1
    seed: int = 0
    out: str = "run"
    format: str = "csv"
    snapshots: int = 16
    record_every: int = 1
    energy_tol: float = 1e-4
    mass_tol: float = 1e-6
    inject_sign_fault: bool = False
    c0: float = 0.5
    metric: str = "euclidean"
    corner_h: float = 5e-3

    @property
    def family(self) -> Family | None:
        return SCENARIOS[self.scenario]

    @property
    def a(self) -> complex:
        return self.a_mod * cmath.exp(1j * self.a_arg) if self.a_arg else complex(self.a_mod)

    @property
    def sign_value(self) -> int:
        return -1 if self.sign == "defocusing" else 1

    def params(self, faulty: bool = False) -> SelfSimilarParams:
        sign = -self.sign_value if faulty else self.sign_value
        a = self.a.real if self.a.imag == 0 else self.a
        return SelfSimilarParams(a=a, alpha=self.alpha, d=1, sign=sign)

    def equation(self, faulty: bool = False) -> EquationSpec:
        return EquationSpec(self.family, self.params(faulty), t0=self.t_start,
                            sigma=self.sigma or None)

    def mesh(self) -> TimeMesh:
        rule = self.rule or ("log" if self.family in (Family.CRITICAL_CONFORMAL,
                                                      Family.CONFORMAL_PERTURBATION) else "uniform")
        return TimeMesh(self.t_start, self.t_end, self.steps, StepRule(rule), self.dyadic_times())

    def dyadic_times(self) -> tuple:
        if self.family is not Family.CONFORMAL_PERTURBATION:
            return ()
        out, t = [], self.t_start
        while t <= self.t_end * (1 + 1e-12):
            out.append(t)
            t *= 2
        return tuple(out)

    def corner_times(self) -> tuple:
        if self.steps < 1:
            return (self.t_end,)
        ratio = (self.t_start / self.t_end) ** (1.0 / self.steps)
        return tuple(self.t_end * ratio**k for k in range(self.steps + 1))


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_CHOICES = {
    "scenario": tuple(SCENARIOS),
    "sign": ("focusing", "defocusing"),
    "profile": ("gaussian", "mode", "zero", "random"),
    "format": ("csv", "json"),
    "rule": ("", "log", "uniform"),
    "metric": ("euclidean", "minkowski"),
}


def _convert(key: str, raw, where: str):
    kind = _FIELDS[key].type
    try:
        if kind == "int":
            value = int(raw)
        elif kind == "float":
            value = float(raw)
        elif kind == "bool":
            if isinstance(raw, bool):
                value = raw
            elif str(raw).lower() in ("1", "true", "yes", "on"):
                value = True
            elif str(raw).lower() in ("0", "false", "no", "off"):
                value = False
            else:
                raise ValueError(raw)
        else:
            value = str(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {key} = {raw!r} as {kind}") from None
    if key in _CHOICES and value not in _CHOICES[key]:
        raise ConfigError(f"{where}: {key} must be one of {', '.join(c for c in _CHOICES[key] if c)}")
    return value


def _parse_lines(text: str) -> dict:
    values, seen = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        key = key.replace("-", "_")
        if not key or not raw:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        values[key] = _convert(key, raw, f"line {lineno}")
    return values


def parse_config(text: str = "", overrides: dict | None = None) -> RunConfig:
    """Validated RunConfig from key = value text; ``overrides`` (e.g. CLI flags) win."""
    values = _parse_lines(text)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown option {key!r}")
        values[key] = _convert(key, raw, f"option --{key.replace('_', '-')}")
    if "scenario" not in values:
        raise ConfigError("no scenario given")
    merged = dict(SCENARIO_DEFAULTS[values["scenario"]])
    merged.update(values)
    cfg = RunConfig(**merged)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.family is None:
        if cfg.c0 < 0 and cfg.metric == "euclidean":
            raise ConfigError("c0 must be >= 0")
        if not 0 < cfg.t_start < cfg.t_end and cfg.steps > 0:
            raise ConfigError("filament-corner needs 0 < t_start < t_end")
        if cfg.corner_h <= 0:
            raise ConfigError("corner_h must be > 0")
        return
    try:
        SpatialGrid(cfg.n, cfg.half_width)
        cfg.equation()
        cfg.mesh()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    if not 0 <= cfg.snapshots <= 64:
        raise ConfigError("snapshots must lie in [0, 64]")
    if cfg.width <= 0:
        raise ConfigError("width must be > 0")


# --- initial data -----------------------------------------------------------------------

def initial_profile(cfg: RunConfig, grid: SpatialGrid) -> np.ndarray:
    x = grid.x
    if cfg.profile == "zero":
        return np.zeros(grid.n, dtype=complex)
    if cfg.profile == "gaussian":
        return cfg.amp * np.exp(-((x / cfg.width) ** 2)) + 0j
    if cfg.profile == "mode":
        k = math.pi * cfg.mode_index / grid.half_width
        return cfg.amp * np.exp(1j * k * x)
    rng = np.random.default_rng(cfg.seed)
    out = np.zeros(grid.n, dtype=complex)
    for _ in range(4):
        center = rng.uniform(-0.2, 0.2) * grid.half_width
        coeff = (rng.normal() + 1j * rng.normal()) / math.sqrt(2)
        out += cfg.amp * coeff * np.exp(-(((x - center) / cfg.width) ** 2))
    return out


# --- runs -----------------------------------------------------------------------------

@dataclass
class RunManifest:
    config: dict
    version: str
    terminal: dict
    checks: dict
    passed: bool
    exit_code: int
    extra: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_json(self) -> str:
        body = {k: v for k, v in dataclasses.asdict(self).items() if k != "wall_time"}
        return json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _summary(report: diagnostics.CheckReport) -> dict:
    out = {}
    for name, ok in report.checks.items():
        m = report.margins[name]
        out[name] = {"passed": ok, "min_margin": float(np.min(m)) if m.size else 0.0}
    return out


def _solver_checks(cfg: RunConfig, traj) -> dict:
    intended = cfg.equation()
    recs = traj.records
    checks = {}
    fam = cfg.family
    if fam is not Family.DIRECT_PERTURBATION:
        # the chirped background of the direct family makes its energy non-autonomous
        closure = max(abs(r.energy_residual) for r in recs)
        checks["energy_closure"] = {"passed": closure <= cfg.energy_tol,
                                    "min_margin": cfg.energy_tol - closure}
    if fam is Family.CRITICAL_CONFORMAL:
        # CSV identity energy = grad/2 - sign * potential/4t
        worst = max((abs(r.energy - (0.5 * r.grad - traj.spec.sign * r.potential / (4 * r.t)))
                     / abs(r.energy) for r in recs if r.energy != 0), default=0.0)
        checks["record_identity"] = {"passed": worst <= 1e-12, "min_margin": 1e-12 - worst}
    if fam in (Family.CRITICAL_CONFORMAL, Family.CONFORMAL_PERTURBATION) and intended.sign == -1:
        checks.update(_summary(diagnostics.check_apriori_bounds(traj, intended)))
    if fam is Family.CONFORMAL_PERTURBATION:
        try:
            d = cauchy_tail(traj)
            times = np.array(cfg.dyadic_times()[:d.size])
            late = d[times >= 10 * cfg.t_start]
            worst = float(np.max(np.diff(late))) if late.size > 1 else -1.0
            checks["cauchy_tail_decreasing"] = {"passed": worst < 0 or not np.any(d), "min_margin": -worst}
        except InsufficientHorizon:
            pass
    if fam is Family.DIRECT_PERTURBATION:
        worst = max(abs(r.mass_residual) for r in recs)
        checks["mass_law"] = {"passed": worst <= cfg.mass_tol, "min_margin": cfg.mass_tol - worst}
    if fam is Family.GROSS_PITAEVSKII:
        checks.update(_summary(diagnostics.gp_monitor(traj)))
    return checks


def _write_rows(cfg: RunConfig, traj, out: Path) -> None:
    if cfg.format == "csv":
        with open(out / "diagnostics.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(diagnostics.CSV_HEADER)
            for r in traj.records:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in r.csv_row()])
    else:
        rows = [dict(zip(diagnostics.CSV_HEADER, r.csv_row())) for r in traj.records]
        (out / "diagnostics.json").write_text(json.dumps(_jsonable(rows), indent=1) + "\n")


def _run_solver(cfg: RunConfig, out: Path) -> RunManifest:
    grid = SpatialGrid(cfg.n, cfg.half_width)
    values = initial_profile(cfg, grid)
    if cfg.profile in ("gaussian", "random"):
        edge = float(np.max(np.abs(values[grid.edge_mask(0.1)])))
        if edge > 1e-12:
            raise ConfigError(f"initial data not negligible near the boundary ({edge:.2e} > 1e-12)")
    spec = cfg.equation(faulty=cfg.inject_sign_fault)
    state = FieldState(grid, values, cfg.t_start)
    mesh = cfg.mesh()
    traj = integrate(spec, state, mesh, record_every=cfg.record_every,
                     snapshot_times=mesh.extra_times, max_snapshots=cfg.snapshots)
    _write_rows(cfg, traj, out)
    snaps = traj.snapshots()
    if cfg.snapshots and snaps:
        np.savez(out / "snapshots.npz", times=np.array([s.time for s in snaps]),
                 values=np.array([s.values for s in snaps]), x=grid.x)
    final = traj.final.record
    terminal = {k: v for k, v in zip(diagnostics.CSV_HEADER, final.csv_row())}
    if traj.blowup:
        return RunManifest(dataclasses.asdict(cfg), __version__, terminal, {}, False, EXIT_BLOWUP,
                           {"blowup": True})
    checks = _solver_checks(cfg, traj)
    passed = all(c["passed"] for c in checks.values())
    return RunManifest(dataclasses.asdict(cfg), __version__, terminal, checks, passed,
                       EXIT_OK if passed else EXIT_CHECK_FAILED)


def _run_filament(cfg: RunConfig, out: Path) -> RunManifest:
    metric = filament.MetricSign(cfg.metric)
    times = cfg.corner_times()
    est = filament.corner_tangents(cfg.c0, metric, times, half_width=cfg.half_width, h=cfg.corner_h)
    checks = {"extrapolation": {"passed": est.converged, "min_margin": 1e-3 - est.spread}}
    gap = float(np.linalg.norm(est.A1 + est.A2))
    if cfg.c0 > 0:
        checks["not_a_cusp"] = {"passed": gap > 1e-8, "min_margin": gap - 1e-8}
    drift = 0.0
    curves_dir = out / "curves"
    curves_dir.mkdir(exist_ok=True)
    for k, t in enumerate(times):
        steps = int(math.ceil(cfg.half_width / (cfg.corner_h * math.sqrt(t))))
        x = np.linspace(-cfg.half_width, cfg.half_width, 2 * steps + 1)
        curve = filament.reconstruct_curve(filament.self_similar_profile(cfg.c0, t, x), metric)
        drift = max(drift, float(np.max(np.abs(filament.sm_invariant(curve.T, metric) - metric.s))))
        filament.write_curve(curve, curves_dir / f"curve_{k:02d}.txt")
    checks["sm_invariant"] = {"passed": drift <= 1e-8, "min_margin": 1e-8 - drift}
    passed = all(c["passed"] for c in checks.values())
    terminal = {"A1": est.A1, "A2": est.A2, "angle": est.angle, "spread": est.spread,
                "times": list(times)}
    return RunManifest(dataclasses.asdict(cfg), __version__, terminal, checks, passed,
                       EXIT_OK if passed else EXIT_CHECK_FAILED)


def run_scenario(cfg: RunConfig) -> RunManifest:
    """Run one configured scenario, write its outputs and return the manifest."""
    out = Path(cfg.out)
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        manifest = _run_filament(cfg, out) if cfg.family is None else _run_solver(cfg, out)
        manifest.wall_time = time.perf_counter() - start
        (out / "manifest.json").write_text(manifest.to_json())
        (out / "timing.json").write_text(json.dumps({"wall_time_s": manifest.wall_time}) + "\n")
    except OSError as exc:
        raise RunIOError(str(exc)) from exc
    return manifest


class RunIOError(RuntimeError):
    pass


# --- command line ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diracnls", description=__doc__.split("\n\n")[0])
    p.add_argument("--scenario", choices=tuple(SCENARIOS))
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--n", type=int)
    p.add_argument("--half-width", type=float)
    p.add_argument("--t-start", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--a-mod", type=float)
    p.add_argument("--a-arg", type=float)
    p.add_argument("--sign", choices=("focusing", "defocusing"))
    p.add_argument("--profile", choices=("gaussian", "mode", "zero", "random"))
    p.add_argument("--amp", type=float)
    p.add_argument("--width", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--snapshots", type=int)
    p.add_argument("--sweep", metavar="KEY=V1,V2,...",
                   help="run one config per value in parallel, each in out/KEY=V")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_FLAG_KEYS = ("scenario", "n", "half_width", "t_start", "t_end", "steps", "alpha", "a_mod", "a_arg",
              "sign", "profile", "amp", "width", "seed", "out", "format", "snapshots")


def _run_safely(cfg: RunConfig) -> int:
    try:
        manifest = run_scenario(cfg)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except RunIOError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    for name, c in manifest.checks.items():
        logger.info("%-24s %s (margin %.3g)", name, "pass" if c["passed"] else "FAIL", c["min_margin"])
    return manifest.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in _FLAG_KEYS}
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    except OSError as exc:
        logger.error("cannot read config: %s", exc)
        return EXIT_IO
    try:
        base = parse_config(text, overrides)
        configs = [base]
        if args.sweep:
            key, _, raw = args.sweep.partition("=")
            key = key.strip().replace("-", "_")
            if not raw:
                raise ConfigError("--sweep expects KEY=V1,V2,...")
            configs = []
            for v in raw.split(","):
                over = dict(overrides, **{key: v.strip(), "out": str(Path(base.out) / f"{key}={v.strip()}")})
                configs.append(parse_config(text, over))
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    if len(configs) == 1:
        return _run_safely(configs[0])
    with ProcessPoolExecutor(max_workers=max(1, args.workers)) as pool:
        codes = list(pool.map(_run_safely, configs))
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
