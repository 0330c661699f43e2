"""Command line interface: ``local``, ``curves``, ``solve`` and ``verify``.

Angles are in degrees on the command line and in every written file.
Settings come from built-in defaults, then an optional JSON config file,
then explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from shockrefl import __version__
from shockrefl.diagnostics import DiagnosticsBlock, DiagnosticsConfig, FieldData, run_diagnostics
from shockrefl.domain import build_geometry
from shockrefl.elliptic_core import CutoffConfig, GridConfig, NonconvergenceError
from shockrefl.free_boundary import RegimeError, SolveConfig, solve
from shockrefl.local_states import (
    HALF_PI,
    LocalStateError,
    SearchConfig,
    euler_incident,
    normal_reflection,
    potential_incident,
    potential_normal_reflection,
    rho1_from_m1,
    state_two_solve,
    transition_angles,
    transition_curve,
)
from shockrefl.thermo import GasParams, bernoulli_density, ellipticity_margin

CURVES_HEADER = ["parameter", "theta_d_deg", "theta_s_deg", "gap_deg", "status"]
FIELDS_HEADER = ["i", "j", "xi", "eta", "x", "y", "phi", "psi", "rho", "mach_margin"]
SHOCK_HEADER = ["s", "xi", "eta", "x", "fhat", "in_band"]


class ConfigError(ValueError):
    pass


class ArtifactError(ValueError):
    """Malformed artifact file; the message names the file and line."""


@dataclass
class RunConfig:
    gamma: float = 1.4
    rho0: float = 1.0
    p0: float = 1.0
    rho1: Optional[float] = 2.0
    m1: Optional[float] = None
    theta_w_deg: float = 89.0
    n_x: int = 64
    n_y: int = 64
    grading: str = "power"
    power: float = 2.0
    ratio: float = 1.05
    delta: float = 0.25
    outer_tol: float = 5e-8
    inner_tol: float = 1e-9
    outer_max_iter: int = 80
    accelerator: str = "anderson"
    out: str = "run"
    sweep_start: float = 1.5
    sweep_stop: float = 4.0
    samples: int = 50
    sweep_by: str = "rho1"

    def validate(self) -> "RunConfig":
        if not self.gamma > 1:
            raise ConfigError(f"gamma > 1 violated: gamma={self.gamma}")
        if not self.rho0 > 0:
            raise ConfigError(f"rho0 > 0 violated: rho0={self.rho0}")
        if self.m1 is None:
            if self.rho1 is None or not self.rho1 > self.rho0:
                raise ConfigError(f"rho1 > rho0 violated: rho1={self.rho1}, rho0={self.rho0}")
        elif not self.m1 > 0:
            raise ConfigError(f"m1 > 0 violated: m1={self.m1}")
        if not 0 < self.theta_w_deg <= 90:
            raise ConfigError(f"0 < theta_w_deg <= 90 violated: theta_w_deg={self.theta_w_deg}")
        if self.n_x < 2 or self.n_y < 2:
            raise ConfigError("n_x >= 2 and n_y >= 2 required")
        return self

    @property
    def gas(self) -> GasParams:
        return GasParams(self.gamma, self.rho0, self.p0)

    @property
    def density1(self) -> float:
        return self.rho1 if self.m1 is None else rho1_from_m1(self.gas, self.m1)

    @property
    def theta_w(self) -> float:
        return HALF_PI if self.theta_w_deg == 90 else math.radians(self.theta_w_deg)

    def solve_config(self) -> SolveConfig:
        grid = GridConfig(n_x=self.n_x, n_y=self.n_y, grading=self.grading, power=self.power, ratio=self.ratio)
        return SolveConfig(grid=grid, cutoff=CutoffConfig(delta=self.delta), outer_tol=self.outer_tol,
                           inner_tol=self.inner_tol, outer_max_iter=self.outer_max_iter,
                           accelerator=self.accelerator)


def _num(x) -> str:
    return format(float(x), ".17g")


def _deg(x) -> float:
    return math.degrees(x) if x is not None and math.isfinite(x) else x


def _dump(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------------------
# local
# ----------------------------------------------------------------------------


def local_report(cfg: RunConfig) -> dict:
    gas, rho1 = cfg.gas, cfg.density1
    inc = euler_incident(gas, rho1)
    nr = normal_reflection(inc)
    pot = potential_incident(gas, rho1)
    ta = transition_angles(pot)
    out = {
        "euler_incident": {"gamma": inc.gamma, "rho0": inc.rho0, "p0": inc.p0, "rho1": inc.rho1, "p1": inc.p1,
                           "u1": inc.u1, "M1_sq": inc.m1_sq, "c1": inc.c1},
        "normal_reflection": {"rho2": nr.rho2, "p2": nr.p2, "xi1": nr.xi1, "c2": nr.c2,
                              "rho2_over_rho1": nr.rho2 / inc.rho1, "p2_over_p1": nr.p2 / inc.p1},
        "potential_incident": {"u1": pot.u1, "xi0": pot.xi0, "rho1": pot.rho1},
        "transition": {"theta_d": _deg(ta.theta_d), "theta_s": _deg(ta.theta_s)},
        "theta_w": cfg.theta_w_deg,
        "state_two": None,
    }
    pair = state_two_solve(pot, cfg.theta_w)
    if pair is not None:
        out["state_two"] = {
            name: {"u2": s.u2, "v2": s.v2, "rho2": s.rho2, "c2": s.c2, "theta_sh": _deg(s.theta_sh),
                   "pseudo_speed_at_P0": s.pseudo_speed_at_P0, "supersonic_at_P0": s.supersonic_at_P0}
            for name, s in zip(("a", "b"), pair)
        }
    return out


def cmd_local(cfg: RunConfig, args) -> int:
    text = json.dumps(local_report(cfg), indent=2, sort_keys=True)
    print(text)
    return 0


# ----------------------------------------------------------------------------
# curves
# ----------------------------------------------------------------------------


def sweep_values(cfg: RunConfig) -> np.ndarray:
    if cfg.samples < 1:
        raise ConfigError("samples >= 1 required")
    if not cfg.sweep_stop >= cfg.sweep_start or (cfg.samples > 1 and cfg.sweep_stop == cfg.sweep_start):
        raise ConfigError(f"empty sweep range [{cfg.sweep_start}, {cfg.sweep_stop}]")
    return np.linspace(cfg.sweep_start, cfg.sweep_stop, cfg.samples)


def write_curves(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVES_HEADER)
        for r in rows:
            if r.ok:
                w.writerow([_num(r.parameter), _num(math.degrees(r.theta_d)), _num(math.degrees(r.theta_s)),
                            _num(math.degrees(r.gap)), "ok"])
            else:
                w.writerow([_num(r.parameter), "nan", "nan", "nan", "failed: " + r.message])


def cmd_curves(cfg: RunConfig, args) -> int:
    rows = transition_curve(cfg.gas, sweep_values(cfg), by=cfg.sweep_by)
    out = Path(args.csv) if args.csv else Path(cfg.out) / "curves.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_curves(rows, out)
    print(f"wrote {out} ({sum(r.ok for r in rows)}/{len(rows)} samples ok)")
    return 0 if all(r.ok for r in rows) else 1


# ----------------------------------------------------------------------------
# solve / verify
# ----------------------------------------------------------------------------


def local_context(cfg: RunConfig):
    """Incident state, state (2) and geometry for a run config."""
    pot = potential_incident(cfg.gas, cfg.density1)
    if cfg.theta_w == HALF_PI:
        s2 = potential_normal_reflection(pot)
    else:
        pair = state_two_solve(pot, cfg.theta_w)
        if pair is None:
            raise RegimeError(f"no state (2) at theta_w={cfg.theta_w_deg} deg")
        s2 = pair[0]
    return pot, s2, build_geometry(pot, s2, cfg.theta_w)


def write_fields(fd: FieldData, path: Path, band_width: float = 0.2) -> None:
    xy = fd.xy
    psi = fd.psi
    g = fd.grad_phi()
    gsq = np.sum(g * g, -1)
    rho = bernoulli_density(gsq, fd.phi, fd.pot.gas)
    margin = ellipticity_margin(g, fd.phi, fd.pot.gas)
    n, m = fd.phi.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELDS_HEADER)
        for i in range(n):
            for j in range(m):
                w.writerow([i, j, _num(fd.nodes[i, j, 0]), _num(fd.nodes[i, j, 1]), _num(xy[i, j, 0]),
                            _num(xy[i, j, 1]), _num(fd.phi[i, j]), _num(psi[i, j]), _num(rho[i, j]),
                            _num(margin[i, j])])


def write_shock(fd: FieldData, path: Path, band_width: float = 0.2) -> None:
    X = fd.nodes[:, -1]
    xy = fd.xy[:, -1]
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(X, axis=0), axis=1))])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SHOCK_HEADER)
        for k in range(len(X)):
            inb = int(xy[k, 0] <= band_width * fd.geom.c2)
            w.writerow([_num(s[k]), _num(X[k, 0]), _num(X[k, 1]), _num(xy[k, 0]), _num(xy[k, 1]), inb])


def read_fields(path: Path):
    """Nodes and potential from ``fields.csv``; raises ArtifactError naming the line."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ArtifactError(f"{path}: cannot open ({exc})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FIELDS_HEADER:
            raise ArtifactError(f"{path}:1: expected header {','.join(FIELDS_HEADER)}")
        rows = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(FIELDS_HEADER):
                raise ArtifactError(f"{path}:{line}: expected {len(FIELDS_HEADER)} columns, got {len(row)}")
            try:
                rows.append((int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[6])))
            except ValueError as exc:
                raise ArtifactError(f"{path}:{line}: {exc}") from exc
    if not rows:
        raise ArtifactError(f"{path}:2: no data rows")
    ii = np.array([r[0] for r in rows])
    jj = np.array([r[1] for r in rows])
    n, m = ii.max() + 1, jj.max() + 1
    if len(rows) != n * m:
        raise ArtifactError(f"{path}:{len(rows) + 1}: expected {n * m} rows for a {n}x{m} grid")
    nodes = np.full((n, m, 2), np.nan)
    phi = np.full((n, m), np.nan)
    for r in rows:
        nodes[r[0], r[1]] = (r[2], r[3])
        phi[r[0], r[1]] = r[4]
    if np.isnan(phi).any():
        raise ArtifactError(f"{path}: missing (i, j) entries")
    return nodes, phi


def _block_summary(block: DiagnosticsBlock) -> List[str]:
    return [f"{name:24s} {c.verdict:12s} value={c.value:.6g} tol={c.tolerance:.6g}"
            for name, c in block.checks().items()]


def cmd_solve(cfg: RunConfig, args) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(asdict(cfg), out / "config.json")
    report = {"version": __version__, "config": asdict(cfg),
              "determinism": "single-threaded sparse direct solves; byte-identical output "
                             "expected for identical config, numpy/scipy versions and BLAS thread count "
                             f"(OMP_NUM_THREADS={os.environ.get('OMP_NUM_THREADS', 'unset')})"}
    code = 0
    try:
        sol = solve(cfg.gas, cfg.density1, cfg.theta_w, cfg.solve_config())
    except (RegimeError, LocalStateError) as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        _dump(report, out / "report.json")
        print(report["error"], file=sys.stderr)
        return 2
    except NonconvergenceError as exc:
        sol = getattr(exc, "solution", None)
        report["error"] = f"NonconvergenceError: {exc}"
        code = 3
        if sol is None:
            _dump(report, out / "report.json")
            return code
    fd = FieldData.from_solution(sol)
    block = run_diagnostics(fd)
    solve_dict = sol.report.to_dict()
    solve_dict["theta_w"] = _deg(solve_dict["theta_w"])
    solve_dict["theta_s"] = _deg(solve_dict["theta_s"])
    report["solve"] = solve_dict
    report["diagnostics"] = block.to_dict()
    write_fields(fd, out / "fields.csv")
    write_shock(fd, out / "shock.csv")
    _dump(report, out / "report.json")
    _dump({"wall_clock_s": sol.report.wall_clock}, out / "timing.json")
    print(f"{sol.report.message}: {sol.report.outer_iterations} outer iterations, "
          f"{sol.report.wall_clock:.1f} s")
    for line in _block_summary(block):
        print(line)
    return code


def verify_artifact(directory: Path) -> DiagnosticsBlock:
    directory = Path(directory)
    cpath = directory / "config.json"
    try:
        raw = json.loads(cpath.read_text())
    except OSError as exc:
        raise ArtifactError(f"{cpath}: cannot open ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{cpath}:{exc.lineno}: {exc.msg}") from exc
    cfg = config_from_dict(raw, source=str(cpath)).validate()
    nodes, phi = read_fields(directory / "fields.csv")
    pot, s2, geom = local_context(cfg)
    return run_diagnostics(FieldData(nodes, phi, pot, s2, geom))


def cmd_verify(args) -> int:
    try:
        block = verify_artifact(Path(args.directory))
    except (ArtifactError, ConfigError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    for line in _block_summary(block):
        print(line)
    if block.passed:
        print("verdict: pass")
        return 0
    print("verdict: fail (" + ", ".join(block.failures()) + ")")
    return 1


# ----------------------------------------------------------------------------
# argument handling
# ----------------------------------------------------------------------------


def config_from_dict(d: dict, base: Optional[RunConfig] = None, source: str = "config") -> RunConfig:
    base = base or RunConfig()
    names = {f.name for f in fields(RunConfig)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    return replace(base, **d)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        typ = {"int": int, "str": str}.get(type(f.default).__name__, float)
        if f.name in ("rho1", "m1"):
            typ = float
        p.add_argument(flag, dest=f.name, type=typ, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shockrefl",
                                     description="Shock reflection off a wedge in self-similar potential flow")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("local", help="local states and transition angles as JSON")
    _add_common(p)
    p = sub.add_parser("curves", help="detachment and sonic angles over a sweep, as CSV")
    _add_common(p)
    p.add_argument("--csv", help="output file (default OUT/curves.csv)")
    p = sub.add_parser("solve", help="solve the reflection problem and write an artifact directory")
    _add_common(p)
    p = sub.add_parser("verify", help="re-run the diagnostics on an artifact directory")
    p.add_argument("directory")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            cfg = config_from_dict(json.loads(Path(args.config).read_text()), cfg, args.config)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}:{exc.lineno}: {exc.msg}") from exc
    over = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name, None) is not None}
    if "m1" in over:
        over.setdefault("rho1", None)
    return replace(cfg, **over).validate()


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args)
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return {"local": cmd_local, "curves": cmd_curves, "solve": cmd_solve}[args.command](cfg, args)
    except (ConfigError, LocalStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
