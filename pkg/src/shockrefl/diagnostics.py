"""Quantitative checks of a computed reflection solution.

Every check is a pure function of nodal data (node coordinates and the
potential) plus the local states, so a serialized run can be re-verified
without the solver. Each check returns a :class:`Check` carrying the raw
number, the tolerance it was judged against and a verdict.

Verdicts: ``pass``, ``fail``, ``inconclusive`` (not enough resolution to
decide) and ``n/a`` (the property does not apply, e.g. the jump across the
sonic arc for normal reflection, where the arc is not a boundary of a
nontrivial region).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from matplotlib.path import Path
from scipy.interpolate import CubicSpline

from shockrefl.domain import GeometryError, WedgeGeometry, build_geometry
from shockrefl.elliptic_core import nodal_gradient
from shockrefl.local_states import (
    HALF_PI,
    PotentialIncident,
    StateTwo,
    phi1,
    phi2,
    potential_normal_reflection,
)
from shockrefl.thermo import bernoulli_density, ellipticity_margin

PASS, FAIL, INCONCLUSIVE, NA = "pass", "fail", "inconclusive", "n/a"
OK_VERDICTS = (PASS, INCONCLUSIVE, NA)

ORDERING_RTOL = 1e-7
# RH flux residual must stay below RH_CONSTANT * h (h = largest edge length)
RH_CONSTANT = 1.0
DRR_REL_TOL = 0.2
# Richardson pairs must agree to this fraction before a D_rr verdict is given
DRR_SETTLED = 0.1


@dataclass
class Check:
    value: float
    tolerance: float
    verdict: str
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict in OK_VERDICTS


@dataclass
class FieldData:
    """Nodal potential on a structured boundary-fitted grid plus its local states.

    ``nodes`` has shape ``(n+1, m+1, 2)``: row ``i = 0`` is the sonic arc,
    ``i = n`` the symmetry line, column ``j = 0`` the wedge and ``j = m`` the shock.
    """

    nodes: np.ndarray
    phi: np.ndarray
    pot: PotentialIncident
    state2: StateTwo
    geom: WedgeGeometry

    @classmethod
    def from_solution(cls, sol) -> "FieldData":
        return cls(sol.grid.nodes, sol.phi, sol.pot, sol.state2, sol.geom)

    @property
    def gamma(self) -> float:
        return self.pot.gas.gamma

    @property
    def is_normal(self) -> bool:
        return self.geom.theta_w == HALF_PI

    @property
    def xy(self) -> np.ndarray:
        """Near-arc coordinates of the nodes.

        A node at the sonic center (the wedge vertex for normal reflection)
        gets ``y = 0``, the limit along the wedge.
        """
        c = self.geom.coords
        at_center = np.all(self.nodes == np.asarray(c.center), axis=-1)
        if not at_center.any():
            return c.to_xy(self.nodes)
        safe = np.where(at_center[..., None], self.nodes[~at_center][0], self.nodes)
        out = c.to_xy(safe)
        out[at_center] = (c.c2, 0.0)
        return out

    def phi2(self):
        return phi2(self.nodes[..., 0], self.nodes[..., 1], self.state2, self.pot)

    @property
    def psi(self) -> np.ndarray:
        return self.phi - self.phi2()[0]

    def grad_phi(self) -> np.ndarray:
        """Exact state-(2) gradient plus the differenced gradient of ``psi``."""
        v2, g2 = self.phi2()
        return g2 + nodal_gradient(self.phi - v2, self.nodes)

    def h(self) -> float:
        X = self.nodes
        e1 = np.linalg.norm(np.diff(X, axis=0), axis=-1).max()
        e2 = np.linalg.norm(np.diff(X, axis=1), axis=-1).max()
        return float(max(e1, e2))


def _loc(idx) -> List[int]:
    return [int(k) for k in idx]


# ----------------------------------------------------------------------------
# pointwise gates
# ----------------------------------------------------------------------------


def check_ordering(fd: FieldData, rtol: float = ORDERING_RTOL) -> Check:
    """Largest violation of ``phi2 <= phi <= phi1`` over the closed domain."""
    v2 = fd.phi2()[0]
    v1 = phi1(fd.nodes[..., 0], fd.nodes[..., 1], fd.pot)[0]
    below = v2 - fd.phi
    above = fd.phi - v1
    viol = np.maximum(below, above)
    k = np.unravel_index(int(np.argmax(viol)), viol.shape)
    value = float(viol[k])
    rng = float(np.ptp(fd.phi))
    tol = rtol * rng
    side = "phi < phi2" if below[k] >= above[k] else "phi > phi1"
    return Check(value, tol, PASS if value < tol else FAIL,
                 {"location": _loc(k), "side": side, "dynamic_range": rng})


def check_ellipticity(fd: FieldData) -> Check:
    """Smallest ``c_*(phi) - |grad phi|`` over interior nodes."""
    m = ellipticity_margin(fd.grad_phi(), fd.phi, fd.pot.gas)[1:-1, 1:-1]
    if m.size == 0:
        return Check(math.inf, 0.0, INCONCLUSIVE, {"reason": "no interior nodes"})
    k = np.unravel_index(int(np.argmin(m)), m.shape)
    value = float(m[k])
    return Check(value, 0.0, PASS if value > 0 else FAIL, {"location": [int(k[0]) + 1, int(k[1]) + 1]})


def _xy_gradient(fd: FieldData, values: np.ndarray) -> np.ndarray:
    """Gradient in the near-arc coordinates ``(x, y)``."""
    return nodal_gradient(values, fd.xy)


def psi_x_ratio_field(fd: FieldData, band_width: float = 0.2):
    """``|psi_x| (gamma+1) / (2x)`` at band nodes with ``0 < x < band_width c2``.

    Returns ``(mask, ratio)`` on the full node array; ratio is zero outside the mask.
    """
    xy = fd.xy
    x = xy[..., 0]
    mask = (x > 0) & (x < band_width * fd.geom.c2)
    mask[0] = False
    psi_x = _xy_gradient(fd, fd.psi)[..., 0]
    ratio = np.zeros_like(x)
    ratio[mask] = np.abs(psi_x[mask]) * (fd.gamma + 1.0) / (2.0 * x[mask])
    return mask, ratio


def check_psi_x_bound(fd: FieldData, band_width: float = 0.2, min_cells: int = 8) -> Check:
    """Gradient bound near the sonic arc; reports the measured slack ``delta0``."""
    mask, ratio = psi_x_ratio_field(fd, band_width)
    arcs = int(np.count_nonzero(mask.any(axis=1)))
    if arcs < min_cells:
        return Check(float(ratio.max(initial=0.0)), 1.0, INCONCLUSIVE,
                     {"reason": f"band resolved by {arcs} cells, need {min_cells}"})
    k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    value = float(ratio[k])
    return Check(value, 1.0, PASS if value < 1.0 else FAIL,
                 {"delta0": 2.0 * (1.0 - value), "location": _loc(k), "band_arcs": arcs,
                  "proof_bound": 2.0 / 3.0})


def shock_flux_profile(fd: FieldData):
    """Arclength from P1 and the mass-flux jump at each shock node."""
    X = fd.nodes[:, -1]
    tang = np.gradient(X, axis=0, edge_order=2)
    nu = np.stack([tang[:, 1], -tang[:, 0]], -1)
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    flip = np.einsum("kd,kd->k", nu, fd.nodes[:, -2] - X) > 0
    nu[flip] *= -1
    g = fd.grad_phi()[:, -1]
    p = fd.phi[:, -1]
    rho = bernoulli_density(np.sum(g * g, -1), p, fd.pot.gas)
    _, g1 = phi1(X[:, 0], X[:, 1], fd.pot)
    jump = rho * np.einsum("kd,kd->k", g, nu) - fd.pot.rho1 * np.einsum("kd,kd->k", g1, nu)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(X, axis=0), axis=1))])
    return s, jump


def rh_residual(fd: FieldData, constant: float = RH_CONSTANT) -> Check:
    """Mass-flux jump across the shock, one-sided gradients from the subsonic side.

    P1 is excluded: it lies on the sonic arc, where the potential is
    prescribed and no flux condition is imposed.
    """
    s, jump = shock_flux_profile(fd)
    k = 1 + int(np.argmax(np.abs(jump[1:])))
    value = float(abs(jump[k]))
    h = fd.h()
    tol = constant * h
    return Check(value, tol, PASS if value < tol else FAIL,
                 {"h": h, "location": k, "profile_s": s.tolist(), "profile": jump.tolist()})


def check_fhat_slope(fd: FieldData, band_width: float = 0.2) -> Check:
    """Smallest forward-difference slope of the shock's image ``y = fhat(x)`` in the band."""
    xy = fd.xy[:, -1]
    sel = xy[:, 0] <= band_width * fd.geom.c2
    pts = xy[sel]
    pts = pts[np.argsort(pts[:, 0])]
    if len(pts) < 2:
        return Check(math.nan, 0.0, INCONCLUSIVE, {"reason": "fewer than two shock nodes in band"})
    dx = np.diff(pts[:, 0])
    if np.any(dx <= 0):
        return Check(-math.inf, 0.0, FAIL, {"reason": "shock is not a graph over x in the band"})
    slope = np.diff(pts[:, 1]) / dx
    value = float(slope.min())
    return Check(value, 0.0, PASS if value > 0 else FAIL, {"omega": value})


# ----------------------------------------------------------------------------
# derivatives along polar arcs
# ----------------------------------------------------------------------------


def polar_arcs(fd: FieldData) -> int:
    """Number of leading rows that lie exactly on arcs ``x = const``."""
    x = fd.xy[..., 0]
    flat = np.ptp(x, axis=1) <= 1e-12 * max(1.0, fd.geom.c2) + 1e-13 * np.abs(x).max(axis=1)
    bad = np.nonzero(~flat)[0]
    return int(bad[0]) if bad.size else x.shape[0]


class ArcTable:
    """Derivatives of ``psi`` in ``(x, y)`` at points of the polar arcs.

    Values on each arc are interpolated in ``y`` by a cubic spline; ``x``
    derivatives use three-point differences across neighboring arcs at a
    common ``y``. Both are exact for quadratics in ``x`` times cubics in ``y``.
    """

    def __init__(self, psi: np.ndarray, xy: np.ndarray, n_arcs: int):
        self.x = xy[:n_arcs, 0, 0].copy()
        self.ytop = xy[:n_arcs, -1, 1].copy()
        self.splines = [CubicSpline(xy[i, :, 1], psi[i]) for i in range(n_arcs)]

    def derivatives(self, i: int, y: float) -> Dict[str, float]:
        """Table at interior arc ``i`` (needs arcs ``i-1`` and ``i+1``)."""
        xl, xc, xr = self.x[i - 1], self.x[i], self.x[i + 1]
        hl, hr = xc - xl, xr - xc
        f = [float(self.splines[k](y)) for k in (i - 1, i, i + 1)]
        fy = [float(self.splines[k](y, 1)) for k in (i - 1, i, i + 1)]
        wl = -hr / (hl * (hl + hr))
        wc = (hr - hl) / (hl * hr)
        wr = hl / (hr * (hl + hr))
        return {
            "psi": f[1],
            "psi_x": wl * f[0] + wc * f[1] + wr * f[2],
            "psi_y": fy[1],
            "psi_xx": 2.0 * ((f[2] - f[1]) / hr - (f[1] - f[0]) / hl) / (hl + hr),
            "psi_xy": wl * fy[0] + wc * fy[1] + wr * fy[2],
            "psi_yy": float(self.splines[i](y, 2)),
        }

    def common_top(self, i: int) -> float:
        return float(min(self.ytop[i - 1], self.ytop[i], self.ytop[i + 1]))


def _richardson_pairs(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Linear-in-x extrapolation to ``x = 0`` from each consecutive pair of stations."""
    return (x[1:] * d[:-1] - x[:-1] * d[1:]) / (x[1:] - x[:-1])


def _monotone(v: np.ndarray, tol: float = 0.0) -> bool:
    """Monotone up to changes of size ``tol``."""
    dv = np.diff(v)
    return bool(np.all(dv >= -tol) or np.all(dv <= tol))


def estimate_drr_jump(fd: FieldData, stations: Optional[Sequence[int]] = None, first_station: int = 6,
                      n_stations: int = 4, y_fractions: Sequence[float] = (0.3, 0.4, 0.5),
                      near_p1_fractions: Sequence[float] = (0.9, 0.95, 0.99),
                      band_width: float = 0.2) -> Check:
    """Limit of ``psi_xx`` at the sonic arc from stations at decreasing ``x``.

    At each station arc and each height ``y = frac * ytop`` the second
    difference of ``psi`` in ``x`` is formed; consecutive stations are
    extrapolated linearly to ``x = 0``. The innermost pair gives the estimate
    for that height, the spread over pairs and heights is the noise floor.
    The same is done for ``psi_xy`` and ``psi_yy``, which should tend to 0.

    The innermost arcs are skipped by default: with strongly graded cells the
    differences there carry the largest truncation error.
    """
    target = 1.0 / (fd.gamma + 1.0)
    n_arcs = polar_arcs(fd)
    xy = fd.xy
    if stations is None:
        stations = list(range(first_station, first_station + n_stations))
    stations = [int(s) for s in stations]
    if len(stations) < 3:
        raise ValueError("need at least 3 stations")
    detail: dict = {"target": target, "stations": stations}
    if fd.is_normal:
        return Check(0.0, DRR_REL_TOL * target, NA, dict(detail, reason="normal reflection"))
    if min(stations) < 1 or max(stations) + 1 >= n_arcs or \
            xy[max(stations), 0, 0] >= band_width * fd.geom.c2:
        return Check(math.nan, DRR_REL_TOL * target, INCONCLUSIVE,
                     dict(detail, reason=f"stations must be polar band arcs 1..{n_arcs - 2}"))
    table = ArcTable(fd.psi, xy, n_arcs)
    top = min(table.common_top(i) for i in stations)
    xs = table.x[stations]
    detail["x"] = xs.tolist()

    def run(fracs):
        out = []
        for fr in fracs:
            rows = [table.derivatives(i, fr * top) for i in stations]
            seq = {k: np.array([r[k] for r in rows]) for k in ("psi_xx", "psi_xy", "psi_yy")}
            lim = {k: _richardson_pairs(xs, v) for k, v in seq.items()}
            out.append((fr, seq, lim))
        return out

    # second differences of phi - phi2 lose digits to cancellation at the smallest spacings
    h = np.diff(table.x[min(stations) - 1:max(stations) + 2])
    roundoff = 8.0 * np.finfo(float).eps * float(np.abs(fd.phi).max()) / float(np.min(h[:-1] * h[1:]))
    interior = run(y_fractions)
    monotone = all(_monotone(seq["psi_xx"], roundoff) for _, seq, _ in interior)
    limits = np.array([lim["psi_xx"][0] for _, _, lim in interior])
    pair_spread = max(float(np.ptp(lim["psi_xx"])) for _, _, lim in interior)
    noise = max(pair_spread, float(np.ptp(limits)))
    estimate = float(np.mean(limits))
    cross = {k: float(max(abs(lim[k][0]) for _, _, lim in interior)) for k in ("psi_xy", "psi_yy")}
    near = run(near_p1_fractions)
    near_limits = np.array([lim["psi_xx"][0] for _, _, lim in near])
    near_spread = float(np.ptp(near_limits))
    interior_spread = float(np.ptp(limits))
    detail.update({
        "sequence": {f"{fr:g}": seq["psi_xx"].tolist() for fr, seq, _ in interior},
        "pair_limits": {f"{fr:g}": lim["psi_xx"].tolist() for fr, _, lim in interior},
        "limits": limits.tolist(),
        "noise_floor": noise,
        "roundoff_floor": roundoff,
        "discrepancy": abs(estimate - target) / target,
        "cross_limits": cross,
        "cross_ok": all(v <= 3.0 * noise + roundoff for v in cross.values()),
        "near_p1_limits": near_limits.tolist(),
        "near_p1_spread": near_spread,
        "interior_spread": interior_spread,
        "near_p1_nonunique": near_spread > 3.0 * interior_spread,
        "monotone": monotone,
    })
    tol = DRR_REL_TOL * target
    if not monotone:
        verdict = INCONCLUSIVE
        detail["reason"] = "second differences are not monotone in x"
    elif pair_spread > DRR_SETTLED * abs(estimate) + roundoff:
        verdict = INCONCLUSIVE
        detail["reason"] = "extrapolation not settled (layer under-resolved)"
    else:
        verdict = PASS if abs(estimate - target) <= tol and detail["cross_ok"] else FAIL
    return Check(estimate, tol, verdict, detail)


PARABOLIC_TERMS = {
    # derivative: (k, l) with weight x^(k + l/2 - 2)
    "psi": (0, 0), "psi_x": (1, 0), "psi_y": (0, 1),
    "psi_xx": (2, 0), "psi_xy": (1, 1), "psi_yy": (0, 2),
}


def parabolic_norm_estimate(fd: FieldData, band_width: float = 0.2, min_cells: int = 8,
                            y_fractions: Iterable[float] = np.linspace(0.0, 1.0, 17),
                            roundoff_cap: float = 1e-4) -> Check:
    """Weighted sup of ``psi`` and its derivatives up to order two near the sonic arc.

    Each derivative ``d_x^k d_y^l psi`` is weighted by ``x^(k + l/2 - 2)`` and
    the value is the largest weighted sup over the table. For ``psi = x^2``
    this is exactly 2. Arcs where the rounding floor of the second
    difference exceeds ``roundoff_cap`` are left out.
    """
    n_arcs = polar_arcs(fd)
    x = fd.xy[:n_arcs, 0, 0]
    last = int(np.count_nonzero(x < band_width * fd.geom.c2))
    last = min(last, n_arcs - 1)
    arcs = list(range(1, last))
    if len(arcs) < min_cells:
        return Check(math.nan, math.inf, INCONCLUSIVE,
                     {"reason": f"band resolved by {len(arcs)} cells, need {min_cells}"})
    # skip arcs so close together that psi_xx is rounding noise
    h = np.diff(x)
    floor = 8.0 * np.finfo(float).eps * float(np.abs(fd.phi).max()) / (h[:-1] * h[1:])
    arcs = [i for i in arcs if floor[i - 1] <= roundoff_cap]
    if len(arcs) < min_cells:
        return Check(math.nan, math.inf, INCONCLUSIVE,
                     {"reason": f"{len(arcs)} band arcs above the rounding floor, need {min_cells}"})
    table = ArcTable(fd.psi, fd.xy, n_arcs)
    sups = {k: 0.0 for k in PARABOLIC_TERMS}
    fr = np.asarray(list(y_fractions), float)
    for i in arcs:
        top = table.common_top(i)
        xi = table.x[i]
        for f in fr:
            d = table.derivatives(i, f * top)
            for name, (k, l) in PARABOLIC_TERMS.items():
                w = xi ** (k + 0.5 * l - 2.0)
                sups[name] = max(sups[name], w * abs(d[name]))
    value = float(max(sups.values()))
    ok = math.isfinite(value)
    return Check(value, math.inf, PASS if ok else FAIL,
                 {"terms": sups, "band_arcs": len(arcs), "first_arc": arcs[0]})


# ----------------------------------------------------------------------------
# distance to normal reflection
# ----------------------------------------------------------------------------


def normal_reflection_field(pot: PotentialIncident):
    """State (2) and geometry of normal reflection for the same incident shock."""
    nr = potential_normal_reflection(pot)
    return nr, build_geometry(pot, nr, HALF_PI)


def _boundary_polygon(nodes: np.ndarray) -> np.ndarray:
    return np.concatenate([nodes[:, 0], nodes[-1, 1:], nodes[-2::-1, -1], nodes[0, -2:0:-1]])


def _normal_polygon(geom: WedgeGeometry, n_arc: int = 200) -> np.ndarray:
    c2 = geom.c2
    xb, y1 = geom.p1
    th = np.linspace(HALF_PI, math.atan2(y1, xb), n_arc)
    arc = c2 * np.stack([np.cos(th), np.sin(th)], -1)
    return np.concatenate([arc, [[xb, 0.0], [0.0, 0.0]]])


def _cell_quantities(nodes: np.ndarray, f: np.ndarray):
    """Centroid, area, mean value and gradient of the bilinear interpolant at each cell center."""
    a, b, c, d = nodes[:-1, :-1], nodes[1:, :-1], nodes[1:, 1:], nodes[:-1, 1:]
    fa, fb, fc, fd_ = f[:-1, :-1], f[1:, :-1], f[1:, 1:], f[:-1, 1:]
    Xs = 0.5 * ((b + c) - (a + d))
    Xt = 0.5 * ((c + d) - (a + b))
    fs = 0.5 * ((fb + fc) - (fa + fd_))
    ft = 0.5 * ((fc + fd_) - (fa + fb))
    det = Xs[..., 0] * Xt[..., 1] - Xs[..., 1] * Xt[..., 0]
    gx = (fs * Xt[..., 1] - ft * Xs[..., 1]) / det
    gy = (ft * Xs[..., 0] - fs * Xt[..., 0]) / det
    cross = lambda u, v: u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]  # noqa: E731
    area = 0.5 * np.abs(cross(c - a, d - b))
    centroid = 0.25 * (a + b + c + d)
    mean = 0.25 * (fa + fb + fc + fd_)
    return centroid, area, mean, np.stack([gx, gy], -1)


def w11_distance_to_normal(fields: Sequence[FieldData], shrink: float = 1.0) -> List[float]:
    """``int |phi - phi_n| + |grad(phi - phi_n)|`` over the common subdomain, per field.

    ``phi_n`` is the normal reflection potential of the same incident shock.
    The common subdomain is the intersection of all computational domains and
    the normal reflection domain, optionally scaled by ``shrink`` about its
    centroid. Gradients come from the bilinear interpolant of the nodal
    difference, so a field equal to ``phi_n`` at the nodes gives exactly 0.
    """
    if not fields:
        raise ValueError("empty family")
    pot = fields[0].pot
    nr, ngeom = normal_reflection_field(pot)
    paths = [Path(_boundary_polygon(f.nodes)) for f in fields] + [Path(_normal_polygon(ngeom))]

    def inside_all(p):
        ok = np.ones(len(p), bool)
        for path in paths:
            ok &= path.contains_points(p)
        return ok

    cells = []
    for f in fields:
        diff = f.phi - phi2(f.nodes[..., 0], f.nodes[..., 1], nr, pot)[0]
        cen, area, mean, grad = _cell_quantities(f.nodes, diff)
        cells.append((cen.reshape(-1, 2), area.ravel(), mean.ravel(), grad.reshape(-1, 2)))
    all_c = np.concatenate([c[0] for c in cells])
    common = inside_all(all_c)
    if not common.any():
        raise GeometryError("empty common subdomain")
    centre = all_c[common].mean(axis=0)
    out = []
    for cen, area, mean, grad in cells:
        q = centre + (cen - centre) / shrink
        sel = inside_all(q)
        out.append(float(np.sum(area[sel] * (np.abs(mean[sel]) + np.linalg.norm(grad[sel], axis=1)))))
    return out


# ----------------------------------------------------------------------------
# block
# ----------------------------------------------------------------------------


@dataclass
class DiagnosticsBlock:
    ordering: Check
    ellipticity: Check
    psi_x_bound: Check
    rh_residual: Check
    drr_jump: Check
    fhat_slope: Check
    w11_distance_to_normal: Check
    parabolic_norm: Check

    def checks(self) -> Dict[str, Check]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks().values())

    def failures(self) -> List[str]:
        return [k for k, c in self.checks().items() if not c.ok]

    def to_dict(self) -> dict:
        return {k: asdict(c) for k, c in self.checks().items()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsBlock":
        return cls(**{k: Check(**v) for k, v in d.items()})


@dataclass(frozen=True)
class DiagnosticsConfig:
    band_width: float = 0.2
    min_cells: int = 8
    rh_constant: float = RH_CONSTANT
    drr_first_station: int = 6
    drr_stations: int = 4


def run_diagnostics(fd: FieldData, cfg: DiagnosticsConfig = DiagnosticsConfig()) -> DiagnosticsBlock:
    w11 = w11_distance_to_normal([fd])[0]
    return DiagnosticsBlock(
        ordering=check_ordering(fd),
        ellipticity=check_ellipticity(fd),
        psi_x_bound=check_psi_x_bound(fd, cfg.band_width, cfg.min_cells),
        rh_residual=rh_residual(fd, cfg.rh_constant),
        drr_jump=estimate_drr_jump(fd, first_station=cfg.drr_first_station, n_stations=cfg.drr_stations,
                                   band_width=cfg.band_width),
        fhat_slope=check_fhat_slope(fd, cfg.band_width),
        w11_distance_to_normal=Check(w11, math.inf, PASS if math.isfinite(w11) else FAIL),
        parabolic_norm=parabolic_norm_estimate(fd, cfg.band_width, cfg.min_cells),
    )
