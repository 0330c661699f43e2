"""Self-similar geometry of the reflection problem.

The half-plane picture: the wedge surface is the ray from the origin P3 at
angle ``theta_w``, the symmetry line is ``eta = 0``. The subsonic region is
bounded by the sonic arc P4-P1 of state (2), the curved reflected shock
P1-P2, the symmetry segment P2-P3 and the wedge segment P3-P4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from shockrefl.local_states import HALF_PI, PotentialIncident, StateTwo, normal_shock_position


class GeometryError(ValueError):
    """The configuration does not produce the expected subsonic region."""


class SingularPointError(GeometryError):
    """Polar coordinates requested at the sonic-circle center."""


Point = Tuple[float, float]


@dataclass(frozen=True)
class WedgeGeometry:
    theta_w: float
    xi0: float
    p0: Optional[Point]
    p1: Point
    p2: Point
    p3: Point
    p4: Point
    sonic_center: Point
    c2: float
    theta_sh: float

    @property
    def wedge_dir(self) -> np.ndarray:
        return np.array([math.cos(self.theta_w), math.sin(self.theta_w)]) if self.theta_w != HALF_PI \
            else np.array([0.0, 1.0])

    @property
    def wedge_length(self) -> float:
        """Length of the wedge segment P3-P4."""
        return math.hypot(self.p4[0] - self.p3[0], self.p4[1] - self.p3[1])

    @property
    def p1_angle_offset(self) -> float:
        """Polar angle of P1 about the sonic center, measured from the wedge."""
        return NearSonicCoords(self.sonic_center, self.c2, self.theta_w).to_xy(self.p1)[1]

    @property
    def coords(self) -> "NearSonicCoords":
        return NearSonicCoords(self.sonic_center, self.c2, self.theta_w)

    def s1_slope(self) -> float:
        """d xi / d eta of the straight reflected shock."""
        return math.cos(self.theta_sh) / math.sin(self.theta_sh)

    def to_dict(self) -> dict:
        return {
            "theta_w": self.theta_w, "xi0": self.xi0, "p0": self.p0, "p1": self.p1,
            "p2": self.p2, "p3": self.p3, "p4": self.p4,
            "sonic_center": self.sonic_center, "c2": self.c2, "theta_sh": self.theta_sh,
        }


@dataclass(frozen=True)
class NearSonicCoords:
    """Polar coordinates about the sonic center shifted to the sonic arc and wedge.

    ``x = c2 - r`` and ``y = theta - theta_w``, with ``y`` wrapped to (-pi, pi].
    """

    center: Point
    c2: float
    theta_w: float

    def to_xy(self, pt) -> np.ndarray:
        p = np.asarray(pt, float)
        d = p - np.asarray(self.center)
        r = np.hypot(d[..., 0], d[..., 1])
        if np.any(r == 0.0):
            raise SingularPointError("polar angle undefined at the sonic center")
        y = np.angle(np.exp(1j * (np.arctan2(d[..., 1], d[..., 0]) - self.theta_w)))
        return np.stack([self.c2 - r, y], axis=-1)

    def from_xy(self, xy) -> np.ndarray:
        q = np.asarray(xy, float)
        r = self.c2 - q[..., 0]
        th = self.theta_w + q[..., 1]
        return np.stack([self.center[0] + r * np.cos(th), self.center[1] + r * np.sin(th)], axis=-1)

    def basis(self, pt) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Radius and the unit radial / angular vectors at ``pt``."""
        p = np.asarray(pt, float)
        d = p - np.asarray(self.center)
        r = np.hypot(d[..., 0], d[..., 1])
        er = d / r[..., None]
        et = np.stack([-er[..., 1], er[..., 0]], axis=-1)
        return r, er, et


def build_geometry(pot: PotentialIncident, s2: StateTwo, theta_w: float) -> WedgeGeometry:
    """Corner points, sonic circle and straight shock of the reflection picture."""
    if s2.branch != "a":
        raise GeometryError("the reflection geometry uses the weak (a) state")
    c2 = s2.c2
    if theta_w == HALF_PI:
        if s2.u2 != 0.0:
            raise GeometryError("normal reflection requires u2 = 0")
        xbar = normal_shock_position(pot, s2.rho2)
        if not abs(xbar) < c2:
            raise GeometryError("reflected shock misses the sonic circle")
        p1 = (xbar, math.sqrt(c2 * c2 - xbar * xbar))
        return WedgeGeometry(theta_w, pot.xi0, None, p1, (xbar, 0.0), (0.0, 0.0), (0.0, c2),
                             (0.0, 0.0), c2, HALF_PI)
    if not s2.supersonic_at_P0:
        raise GeometryError("state (2) must be supersonic at P0 (theta_w above the sonic angle)")
    cw, sw = math.cos(theta_w), math.sin(theta_w)
    u2, v2 = s2.u2, s2.u2 * math.tan(theta_w)
    center = (u2, v2)
    p0 = (pot.xi0, pot.xi0 * math.tan(theta_w))
    # straight shock {phi1 = phi2} in normal form n . X = k; all terms stay O(1)
    n = np.array([pot.u1 - u2, -v2])
    k = pot.xi0 * (pot.u1 - s2.s)
    nn = float(n @ n)
    foot = np.asarray(center) + (k - float(n @ np.asarray(center))) / nn * n
    dist_sq = float((foot - center) @ (foot - center))
    if dist_sq >= c2 * c2:
        raise GeometryError("the straight reflected shock misses the sonic circle")
    tangent = np.array([v2, pot.u1 - u2]) / math.sqrt(nn)
    p1 = tuple(float(v) for v in foot + math.sqrt(c2 * c2 - dist_sq) * tangent)
    # P1 must lie inside the wedge region (left of the wedge ray)
    if not (p1[1] * cw - p1[0] * sw) > 0 or not p1[1] > 0:
        raise GeometryError("S1 meets the sonic circle outside the wedge region")
    p4 = (center[0] + c2 * cw, center[1] + c2 * sw)
    geom = WedgeGeometry(theta_w, pot.xi0, p0, p1, (math.nan, 0.0), (0.0, 0.0), p4, center,
                         c2, s2.theta_sh)
    # the foot of the initial shock guess serves as the nominal P2
    foot = initial_shock_function(geom)(0.0)
    return WedgeGeometry(theta_w, pot.xi0, p0, p1, (float(foot), 0.0), (0.0, 0.0), p4, center,
                         c2, s2.theta_sh)


def initial_shock_function(geom: WedgeGeometry):
    """``xi = f(eta)``: the circle tangent to the straight shock at P1 centered on ``eta = 0``.

    It meets the symmetry line orthogonally; for a vertical straight shock it
    is the straight shock itself.
    """
    xi1, e1 = geom.p1
    m = geom.s1_slope() if geom.theta_sh != HALF_PI else 0.0

    def f(eta):
        eta = np.asarray(eta, float)
        rad = e1 * e1 + m * m * (e1 * e1 - eta * eta)
        return xi1 + m * (eta * eta - e1 * e1) / (e1 + np.sqrt(rad))

    return f


class ShockCurve:
    """Reflected shock P1-P2 stored as ``xi = f(eta)`` on ``[0, eta(P1)]``.

    A cubic spline with ``f'(0) = 0`` enforces the right angle with the
    symmetry line; the last knot is the pinned point P1.
    """

    def __init__(self, eta, xi, geom: WedgeGeometry):
        eta = np.asarray(eta, float)
        xi = np.asarray(xi, float)
        order = np.argsort(eta)
        eta, xi = eta[order], xi[order]
        if eta[0] != 0.0:
            raise GeometryError("shock samples must start on the symmetry line")
        if not np.all(np.diff(eta) > 0):
            raise GeometryError("shock samples must be strictly increasing in eta")
        if abs(eta[-1] - geom.p1[1]) > 1e-12 * max(1.0, geom.c2) or abs(xi[-1] - geom.p1[0]) > 1e-12:
            raise GeometryError("shock must end at P1")
        self.eta = eta
        self.xi = xi
        self.geom = geom
        self.spline = CubicSpline(eta, xi, bc_type=((1, 0.0), "not-a-knot"))
        self._radius_cache = None

    # -- basic evaluation ---------------------------------------------------
    def f(self, eta):
        return self.spline(eta)

    def df(self, eta):
        return self.spline(eta, 1)

    @property
    def p2(self) -> Point:
        return (float(self.xi[0]), 0.0)

    def point(self, eta) -> np.ndarray:
        eta = np.asarray(eta, float)
        return np.stack([self.f(eta), eta], axis=-1)

    def normal(self, eta) -> np.ndarray:
        """Unit normal pointing out of the subsonic region (toward state (1))."""
        fp = np.asarray(self.df(eta), float)
        n = np.stack([-np.ones_like(fp), fp], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    # -- radius parametrization near the sonic arc --------------------------
    def radius(self, eta):
        c = np.asarray(self.geom.sonic_center)
        p = self.point(eta)
        return np.hypot(p[..., 0] - c[0], p[..., 1] - c[1])

    def radial_monotone_limit(self) -> float:
        """Smallest eta down to which the radius about the sonic center keeps increasing in eta."""
        if self._radius_cache is None:
            eta = np.linspace(0.0, self.eta[-1], 4001)
            r = self.radius(eta)
            dr = np.diff(r)
            bad = np.nonzero(dr <= 0)[0]
            self._radius_cache = float(eta[bad[-1] + 1]) if bad.size else 0.0
        return self._radius_cache

    def eta_at_radius(self, r: float) -> float:
        """Height at which the shock crosses the circle of radius ``r`` about the sonic center."""
        lo = self.radial_monotone_limit()
        hi = float(self.eta[-1])
        g = lambda e: float(self.radius(e)) - r  # noqa: E731
        glo, ghi = g(lo), g(hi)
        if abs(ghi) <= 1e-13 * max(1.0, r):
            return hi
        if not glo < 0.0 < ghi:
            raise GeometryError(f"shock does not cross radius {r} monotonically")
        return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)

    def fhat(self, x):
        """Angular offset ``y = fhat(x)`` of the shock at ``x = c2 - r``."""
        coords = self.geom.coords
        out = []
        for xv in np.atleast_1d(np.asarray(x, float)):
            e = self.eta_at_radius(self.geom.c2 - xv)
            out.append(coords.to_xy(self.point(e))[1])
        out = np.asarray(out)
        return out if np.ndim(x) else float(out[0])

    def arclength_samples(self, n: int = 400) -> np.ndarray:
        """Points ordered from P1 to P2."""
        eta = np.linspace(self.eta[-1], 0.0, n)
        return self.point(eta)


def initial_shock(geom: WedgeGeometry, n: int = 129) -> ShockCurve:
    """Initial free boundary: circular arc tangent to the straight shock at P1."""
    f = initial_shock_function(geom)
    eta = np.linspace(0.0, geom.p1[1], n)
    xi = f(eta)
    xi[-1] = geom.p1[0]
    curve = ShockCurve(eta, xi, geom)
    if not np.all(xi < geom.xi0):
        raise GeometryError("initial shock leaves the region behind the incident shock")
    # stays on the wedge-region side of the wedge ray
    if geom.theta_w != HALF_PI:
        side = eta * math.cos(geom.theta_w) - xi * math.sin(geom.theta_w)
        if not np.all(side > 0):
            raise GeometryError("initial shock crosses the wedge")
    elif not np.all(xi < 0):
        raise GeometryError("initial shock crosses the wall")
    return curve
