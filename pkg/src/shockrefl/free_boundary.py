"""Outer iteration for the free boundary.

Each pass solves the elliptic problem with the state-(1) flux prescribed on
the current shock, then moves the shock toward the level set ``phi = phi1``.
A fixed point satisfies both jump conditions.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import fractional_matrix_power, solve_banded
from scipy.optimize import NoConvergence, anderson

from shockrefl.domain import (
    GeometryError,
    ShockCurve,
    WedgeGeometry,
    build_geometry,
    initial_shock,
)
from shockrefl.elliptic_core import (
    CutoffConfig,
    FEMOperator,
    Grid2D,
    GridConfig,
    NonconvergenceError,
    build_grid,
    nodal_gradient,
    picard_solve,
    reflection_problem,
)
from shockrefl.local_states import (
    HALF_PI,
    LocalStateError,
    PotentialIncident,
    SearchConfig,
    StateTwo,
    phi1,
    potential_incident,
    sonic_angle,
    state_two_solve,
)
from shockrefl.thermo import GasParams

__all__ = [
    "ShockCurve", "SolveConfig", "SolveReport", "Solution", "RegimeError",
    "DegenerateUpdateError", "initial_shock", "update_shock", "solve",
]


class RegimeError(ValueError):
    """Wedge angle outside the range where the weak state is supersonic at P0."""


class DegenerateUpdateError(RuntimeError):
    """The normal derivative of phi - phi1 vanished on the shock."""


@dataclass(frozen=True)
class SolveConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    cutoff: CutoffConfig = field(default_factory=CutoffConfig)
    outer_tol: float = 5e-8
    outer_max_iter: int = 80
    relaxation: float = 0.5
    min_relaxation: float = 1.0 / 16.0
    inner_tol: float = 1e-9
    inner_max_iter: int = 200
    linearization: str = "newton"
    omega: float = 1e-3
    smoothing: float = 0.05
    precondition_power: float = 0.5
    accelerator: str = "anderson"
    anderson_depth: int = 5

    def __post_init__(self):
        if not self.outer_tol > 0 or not self.inner_tol > 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if self.accelerator not in ("anderson", "relaxation"):
            raise ValueError(f"unknown accelerator {self.accelerator!r}")


@dataclass
class OuterRecord:
    iteration: int
    displacement: float
    relaxation: float
    level_set_max: float
    inner_iterations: int
    clamp_active_fraction: float
    omega_flagged: bool


@dataclass
class SolveReport:
    converged: bool
    outer_iterations: int
    history: List[OuterRecord]
    theta_w: float
    theta_s: Optional[float]
    geometry: dict
    message: str = ""
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_clock")
        return d


@dataclass
class Solution:
    pot: PotentialIncident
    state2: StateTwo
    geom: WedgeGeometry
    shock: ShockCurve
    grid: Grid2D
    phi: np.ndarray
    report: SolveReport
    cfg: SolveConfig

    @property
    def psi(self) -> np.ndarray:
        return self.phi - phi2_nodes(self)

    @property
    def gas(self) -> GasParams:
        return self.pot.gas


def phi2_nodes(sol: "Solution") -> np.ndarray:
    from shockrefl.local_states import phi2

    return phi2(sol.grid.xi, sol.grid.eta, sol.state2, sol.pot)[0]


def _monotone_band(pts: np.ndarray, geom: WedgeGeometry, band_x: float, omega: float):
    """Enforce ``dy/dx >= omega`` for shock points inside the band; returns (points, flagged)."""
    coords = geom.coords
    xy = coords.to_xy(pts)
    flagged = False
    for k in range(1, len(xy)):
        if xy[k, 0] > band_x:
            break
        dx = xy[k, 0] - xy[k - 1, 0]
        floor = xy[k - 1, 1] + omega * dx
        if dx > 0 and xy[k, 1] < floor:
            xy[k, 1] = floor
            flagged = True
    if flagged:
        pts = coords.from_xy(xy)
    return pts, flagged


def sobolev_smooth(values: np.ndarray, pts: np.ndarray, length: float, power: float = 1.0) -> np.ndarray:
    """Apply ``(I - length^2 d^2/ds^2)^(-power)`` along the polyline ``pts``.

    ``u = 0`` at the first point (the pinned P1) and ``du/ds = 0`` at the
    last. ``power = 1`` is the usual Sobolev smoother; ``power = 1/2`` scales
    a mode of wavenumber ``k`` by about ``1/(length k)``, matching a response
    that grows linearly in ``k``. Zeros are preserved since the operator is
    invertible.
    """
    n = len(values)
    if length <= 0 or n < 3:
        out = values.copy()
        out[0] = 0.0
        return out
    ds = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    a2 = length * length
    main = np.ones(n)
    lower = np.zeros(n - 1)
    upper = np.zeros(n - 1)
    for k in range(1, n - 1):
        hl, hr = ds[k - 1], ds[k]
        cl = 2 * a2 / (hl * (hl + hr))
        cr = 2 * a2 / (hr * (hl + hr))
        main[k] += cl + cr
        lower[k - 1] = -cl
        upper[k] = -cr
    # mirror condition at P2
    h = ds[-1]
    main[-1] += 2 * a2 / (h * h)
    lower[-1] = -2 * a2 / (h * h)
    rhs = values.astype(float).copy()
    main[0], upper[0], rhs[0] = 1.0, 0.0, 0.0
    if power != 1.0:
        A = np.diag(main) + np.diag(upper, 1) + np.diag(lower, -1)
        out = np.real(fractional_matrix_power(A, -power) @ rhs)
    else:
        ab = np.zeros((3, n))
        ab[0, 1:] = upper
        ab[1] = main
        ab[2, :-1] = lower
        out = solve_banded((1, 1), ab, rhs)
    # the solves leave roundoff at the pinned point
    out[0] = 0.0
    return out


def level_set_step(phi: np.ndarray, grid: Grid2D, pot: PotentialIncident):
    """Unrelaxed normal step ``-(phi - phi1) / d_nu (phi - phi1)`` at the shock nodes.

    Returns ``(step, F)``; both vanish at P1, which stays pinned.
    """
    pts = grid.nodes[:, -1]
    v1, g1 = phi1(pts[:, 0], pts[:, 1], pot)
    grad = nodal_gradient(phi, grid)[:, -1]
    F = phi[:, -1] - v1
    F[0] = 0.0
    dF = np.einsum("kd,kd->k", grad - g1, grid.shock.normal(pts[:, 1]))
    if np.any(np.abs(dF[1:]) < 1e-12):
        raise DegenerateUpdateError("vanishing normal derivative of phi - phi1 on the shock")
    step = np.zeros_like(F)
    step[1:] = -F[1:] / dF[1:]
    return step, F


def update_shock(phi: np.ndarray, grid: Grid2D, pot: PotentialIncident, relaxation: float = 0.5,
                 omega: float = 1e-3, band_width: float = 0.2,
                 smoothing: float = 0.05, power: float = 1.0) -> Tuple[ShockCurve, float, dict]:
    """Move shock nodes along the outward normal toward the level set ``phi = phi1``.

    The step is the smoothed, relaxed level-set step; P1 stays pinned and P2
    slides along the symmetry line.

    Returns the new curve, the largest displacement and a small info dict.
    """
    geom = grid.geom
    pts = grid.nodes[:, -1].copy()
    raw, F = level_set_step(phi, grid, pot)
    step = relaxation * sobolev_smooth(raw, pts, smoothing * geom.c2, power)
    new = pts + step[:, None] * grid.shock.normal(pts[:, 1])
    new[-1, 1] = 0.0
    new[0] = geom.p1
    new, flagged = _monotone_band(new, geom, band_width * geom.c2, omega)
    order = np.argsort(new[:, 1])
    new = new[order]
    if not np.all(np.diff(new[:, 1]) > 0):
        raise GeometryError("updated shock is not a graph over eta")
    curve = ShockCurve(new[:, 1], new[:, 0], geom)
    disp = float(np.max(np.abs(step)))
    return curve, disp, {"level_set_max": float(np.max(np.abs(F))), "omega_flagged": flagged,
                         "raw_max": float(np.max(np.abs(raw)))}


def _resolve_state(gas: GasParams, rho1: float, theta_w: float, search: SearchConfig):
    pot = potential_incident(gas, rho1)
    if theta_w == HALF_PI:
        return pot, state_two_solve(pot, theta_w)[0], None
    if not 0 < theta_w < HALF_PI:
        raise RegimeError(f"theta_w must lie in (0, pi/2], got {theta_w}")
    ts = sonic_angle(pot, search)
    if not theta_w > ts:
        raise RegimeError(f"theta_w={math.degrees(theta_w):.6f} deg is not above the sonic angle "
                          f"theta_s={math.degrees(ts):.6f} deg")
    pair = state_two_solve(pot, theta_w, search)
    return pot, pair[0], ts


class _Converged(Exception):
    pass


class _OuterState:
    """Mutable state shared by the outer drivers: current grid, field and history."""

    def __init__(self, geom, data, pot, cfg: SolveConfig, shock: ShockCurve):
        self.geom, self.data, self.pot, self.cfg = geom, data, pot, cfg
        self.grid = build_grid(geom, shock, cfg.grid)
        self.psi = np.zeros(self.grid.shape)
        self.phi = data.dirichlet(self.grid.nodes)
        self.history: List[OuterRecord] = []

    def solve_on(self, shock: ShockCurve):
        """Rebuild the grid for ``shock`` and solve the fixed-boundary problem.

        ``psi`` carries over by grid index, which keeps warm starts cheap.
        """
        cfg = self.cfg
        grid = build_grid(self.geom, shock, cfg.grid)
        op = FEMOperator(grid, self.data, cfg.cutoff)
        base = self.data.dirichlet(grid.nodes)
        phi, inner = picard_solve(base + self.psi, op, tol=cfg.inner_tol, max_iter=cfg.inner_max_iter,
                                  linearization=cfg.linearization)
        self.grid, self.phi, self.psi = grid, phi, phi - base
        return inner

    def record(self, disp, lam, F, inner, flagged):
        self.history.append(OuterRecord(len(self.history) + 1, disp, lam, float(np.max(np.abs(F))),
                                        inner.iterations, inner.clamp_active_fraction, flagged))


def _fhat_flagged(grid: Grid2D, band_x: float, omega: float) -> bool:
    xy = grid.xy()[:, -1]
    sel = xy[:, 0] <= band_x
    pts = xy[sel]
    pts = pts[np.argsort(pts[:, 0])]
    dx = np.diff(pts[:, 0])
    return bool(np.any(np.diff(pts[:, 1]) < omega * dx))


class _KnotResidual:
    """Level-set residual on the shock abscissae at fixed heights (the knots).

    The knots come from a quadratically graded companion grid, so they do not
    crowd P1 when the working grid is strongly graded. The raw step at the
    working grid's shock nodes is converted to a horizontal shift, carried to
    the knots by a cubic spline and preconditioned along the knot polyline.
    """

    def __init__(self, st: _OuterState, tol: float):
        self.st, self.tol = st, tol
        cfg, geom = st.cfg, st.geom
        start = st.grid.shock
        knot_grid = build_grid(geom, start, replace(cfg.grid, grading="power", power=2.0))
        self.knots = np.sort(knot_grid.nodes[:, -1, 1])[:-1]
        self.x0 = start.f(self.knots)
        self.band_x = cfg.grid.band_width * geom.c2

    def curve(self, x) -> ShockCurve:
        geom = self.st.geom
        return ShockCurve(np.append(self.knots, geom.p1[1]), np.append(x, geom.p1[0]), geom)

    def __call__(self, x, relaxation: float):
        st, cfg, geom = self.st, self.st.cfg, self.st.geom
        shock = self.curve(x)
        inner = st.solve_on(shock)
        pts = st.grid.nodes[:, -1]
        raw, F = level_set_step(st.phi, st.grid, st.pot)
        disp = float(np.max(np.abs(raw)))
        st.record(disp, relaxation, F, inner, _fhat_flagged(st.grid, self.band_x, cfg.omega))
        if disp < self.tol:
            raise _Converged
        if len(st.history) >= cfg.outer_max_iter:
            raise NonconvergenceError("outer iteration hit outer_max_iter", [h.displacement for h in st.history])
        dxi = -raw * np.sqrt(1.0 + shock.df(pts[:, 1]) ** 2)
        order = np.argsort(pts[:, 1])
        at_knots = CubicSpline(pts[order, 1], dxi[order])(self.knots)
        # precondition from P1 (pinned) down to P2
        line = np.stack([np.append(x, geom.p1[0]), np.append(self.knots, geom.p1[1])], -1)[::-1]
        vals = np.append(at_knots, 0.0)[::-1]
        return sobolev_smooth(vals, line, cfg.smoothing * geom.c2, cfg.precondition_power)[::-1][:-1]


def _relaxation_driver(st: _OuterState, tol: float) -> Tuple[bool, str]:
    """Relaxed fixed-point iteration on the knots; relaxation halves when the step grows."""
    cfg = st.cfg
    res = _KnotResidual(st, tol)
    x = res.x0.copy()
    lam = cfg.relaxation
    prev = math.inf
    try:
        while True:
            r = res(x, lam)
            disp = st.history[-1].displacement
            if disp > prev and lam > cfg.min_relaxation:
                lam *= 0.5
            prev = disp
            x = x + lam * r
    except _Converged:
        return True, "converged"
    except NonconvergenceError as exc:
        return False, str(exc)
    except (GeometryError, DegenerateUpdateError) as exc:
        return False, f"outer iteration failed: {exc}"


def _anderson_driver(st: _OuterState, tol: float) -> Tuple[bool, str]:
    """Anderson mixing on the knots.

    Convergence is judged on the raw level-set step, so the preconditioner
    cannot hide a residual.
    """
    cfg = st.cfg
    res = _KnotResidual(st, tol)
    try:
        anderson(lambda x: res(x, cfg.relaxation), res.x0, alpha=cfg.relaxation, M=cfg.anderson_depth,
                 f_tol=1e-3 * tol, maxiter=10 * cfg.outer_max_iter, line_search=None)
    except _Converged:
        return True, "converged"
    except NonconvergenceError as exc:
        return False, str(exc)
    except (NoConvergence, GeometryError, DegenerateUpdateError, ValueError) as exc:
        return False, f"outer iteration failed: {exc}"
    return False, "outer iteration stagnated"


def solve(gas: GasParams, rho1: float, theta_w: float, cfg: SolveConfig = SolveConfig(),
          search: SearchConfig = SearchConfig(), raise_on_failure: bool = True) -> Solution:
    """Solve the free boundary problem for one wedge angle (radians).

    At ``theta_w = pi/2`` the normal reflection is returned on its own grid
    without iterating.
    """
    t0 = time.perf_counter()
    pot, s2, ts = _resolve_state(gas, rho1, theta_w, search)
    geom = build_geometry(pot, s2, theta_w)
    data = reflection_problem(pot, s2)
    st = _OuterState(geom, data, pot, cfg, initial_shock(geom))
    report = SolveReport(False, 0, st.history, theta_w, ts, geom.to_dict())
    if theta_w == HALF_PI:
        report.converged = True
        report.message = "normal reflection (exact)"
    else:
        tol = cfg.outer_tol * geom.c2
        driver = _anderson_driver if cfg.accelerator == "anderson" else _relaxation_driver
        try:
            report.converged, report.message = driver(st, tol)
        except NonconvergenceError as exc:
            report.message = f"inner solve failed: {exc}"
        report.outer_iterations = len(st.history)
    report.wall_clock = time.perf_counter() - t0
    sol = Solution(pot, s2, geom, st.grid.shock, st.grid, st.phi, report, cfg)
    if not report.converged and raise_on_failure:
        err = NonconvergenceError(report.message, [h.displacement for h in st.history])
        err.solution = sol
        raise err
    return sol
