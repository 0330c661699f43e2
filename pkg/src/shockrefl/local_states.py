"""Uniform states of regular reflection: incident shock, normal reflection,
the two reflected states at the reflection point, and the transition angles.

State (2) reduction
-------------------
With the reflected shock forced through P0 = (xi0, xi0 tan(theta_w)) and
phi2 matching phi1 along it, the only free unknown is the horizontal velocity
``u2`` of state (2). We parametrize by ``s = u2 / cos(theta_w)**2`` which stays
bounded as theta_w -> pi/2. The Bernoulli law gives

    c2**2 = rho0**(g-1) - (g-1) * s * (u2/2 - xi0),

and the normal mass flux balance across the reflected shock reads

    G(s) = rho2 (u2 - xi0)(u1 - s) - rho1 (u1 (u1 - xi0) - u1 u2 + xi0 s) = 0.

``G(0) = 0`` is the trivial continuation of state (0), so roots are sought for
``H = G / s``. The weak root has the smaller ``s`` (branch a, larger
pseudo-speed at P0) and the strong root the larger one (branch b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from shockrefl.thermo import GasParams, bernoulli_density, sonic_speed_euler


class LocalStateError(ValueError):
    """Base class for invalid local-state inputs."""


class EntropyViolationError(LocalStateError):
    """Downstream density does not exceed upstream density."""


class MaximalCompressionError(LocalStateError):
    """Density ratio reaches (gamma+1)/(gamma-1) or beyond."""


class ConfigurationError(LocalStateError):
    """A root bracket could not be found in the admissible range."""


class AcousticLimitError(LocalStateError):
    """The reflected shock position diverges (zero-strength incident shock)."""


HALF_PI = 0.5 * math.pi


def _cos_tan(theta_w: float) -> Tuple[float, float]:
    # exact zero at the normal-reflection angle keeps the degenerate case clean
    if theta_w == HALF_PI:
        return 0.0, math.inf
    return math.cos(theta_w), math.tan(theta_w)


# ----------------------------------------------------------------------------
# Euler branch
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class EulerIncident:
    gamma: float
    rho0: float
    p0: float
    rho1: float
    p1: float
    u1: float
    m1_sq: float

    @property
    def c1(self) -> float:
        return sonic_speed_euler(self.p1, self.rho1, self.gamma)

    @property
    def shock_speed(self) -> float:
        """Incident shock speed in the frame of state (0), from mass balance."""
        return self.rho1 * self.u1 / (self.rho1 - self.rho0)

    @property
    def shock_mach(self) -> float:
        """Incident shock Mach number relative to the quiescent gas."""
        return self.shock_speed / sonic_speed_euler(self.p0, self.rho0, self.gamma)


def euler_incident(gas: GasParams, rho1: float) -> EulerIncident:
    """Incident normal shock in the full Euler system.

    Args:
        gas: upstream state; ``gas.p0`` must be set.
        rho1: density behind the incident shock.

    Returns:
        EulerIncident with the Hugoniot pressure, velocity and squared Mach
        number of state (1).
    """
    g, r0, p0 = gas.gamma, gas.rho0, gas.p0
    if p0 is None:
        raise LocalStateError("the Euler branch needs p0")
    if not rho1 > r0:
        raise EntropyViolationError(f"need rho1 > rho0, got rho1={rho1}, rho0={r0}")
    denom = (g + 1.0) * r0 - (g - 1.0) * rho1
    if not denom > 64.0 * np.finfo(float).eps * (g + 1.0) * r0:
        raise MaximalCompressionError(
            f"(gamma+1) rho0 - (gamma-1) rho1 = {denom} <= 0; "
            f"rho1/rho0 must stay below {(g + 1) / (g - 1)}"
        )
    p1 = p0 * ((g + 1.0) * rho1 - (g - 1.0) * r0) / denom
    u1 = math.sqrt((p1 - p0) * (rho1 - r0) / (r0 * rho1))
    m1_sq = 2.0 * (rho1 - r0) ** 2 / (r0 * ((g + 1.0) * rho1 - (g - 1.0) * r0))
    return EulerIncident(g, r0, p0, rho1, p1, u1, m1_sq)


def rho1_from_m1(gas: GasParams, m1: float) -> float:
    """Invert the squared-Mach relation of state (1) for its density.

    ``M1^2 rho0 ((g+1) rho1 - (g-1) rho0) = 2 (rho1 - rho0)^2`` is quadratic in
    rho1; the root above rho0 is returned.
    """
    if not m1 > 0:
        raise LocalStateError(f"m1 must be positive, got {m1}")
    g, r0 = gas.gamma, gas.rho0
    m2 = m1 * m1
    a = 2.0
    b = -(4.0 * r0 + m2 * r0 * (g + 1.0))
    # b^2 - 4ac simplifies to r0^2 m2 (16 + (g+1)^2 m2), free of cancellation
    disc = r0 * r0 * m2 * (16.0 + (g + 1.0) ** 2 * m2)
    return (-b + math.sqrt(disc)) / (2.0 * a)


@dataclass(frozen=True)
class NormalReflectionState:
    rho2: float
    p2: float
    xi1: float
    c2: float


def normal_reflection_quadratic(t: float, m1_sq: float, gamma: float) -> float:
    """Residual of the density-ratio quadratic for normal reflection."""
    return ((1.0 + 0.5 * (gamma - 1.0) * m1_sq) * t * t
            - (2.0 + 0.5 * (gamma + 1.0) * m1_sq) * t + 1.0)


def normal_reflection(inc: EulerIncident) -> NormalReflectionState:
    """Euler normal reflection of the incident shock off a vertical wall."""
    g, m2 = inc.gamma, inc.m1_sq
    m1 = math.sqrt(m2)
    t = ((4.0 + (g + 1.0) * m2 + m1 * math.sqrt(16.0 + (g + 1.0) ** 2 * m2))
         / (2.0 * (2.0 + (g - 1.0) * m2)))
    rho2 = t * inc.rho1
    p2 = inc.p1 * ((g + 1.0) * rho2 - (g - 1.0) * inc.rho1) / (
        (g + 1.0) * inc.rho1 - (g - 1.0) * rho2)
    jump = rho2 - inc.rho1
    if not jump > 0.0:
        raise AcousticLimitError("reflected density jump vanished; xi1 diverges")
    xi1 = -inc.rho1 * inc.u1 / jump
    return NormalReflectionState(rho2, p2, xi1, sonic_speed_euler(p2, rho2, g))


def reconstructed_u1(inc: EulerIncident, nr: NormalReflectionState) -> float:
    """Incident velocity recovered from the reflected-shock jump conditions."""
    return math.sqrt((nr.p2 - inc.p1) * (nr.rho2 - inc.rho1) / (inc.rho1 * nr.rho2))


# ----------------------------------------------------------------------------
# Potential branch
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialIncident:
    u1: float
    xi0: float
    gas: GasParams
    rho1: float


def potential_incident(gas: GasParams, rho1: float) -> PotentialIncident:
    """Velocity of state (1) and incident shock location in potential flow."""
    g, r0 = gas.gamma, gas.rho0
    if not rho1 > r0:
        raise EntropyViolationError(f"need rho1 > rho0, got rho1={rho1}, rho0={r0}")
    u1 = math.sqrt(2.0 * (rho1 - r0) * (rho1 ** (g - 1.0) - r0 ** (g - 1.0))
                   / ((g - 1.0) * (rho1 + r0)))
    xi0 = rho1 * u1 / (rho1 - r0)
    return PotentialIncident(u1, xi0, gas, rho1)


def phi0(xi, eta):
    """Potential of the quiescent state and its gradient."""
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    return -0.5 * (xi * xi + eta * eta), np.stack([-xi, -eta], axis=-1)


def phi1(xi, eta, pot: PotentialIncident):
    """Potential of state (1); continuous with state (0) on xi = xi0."""
    val, grad = phi0(xi, eta)
    val = val + pot.u1 * (np.asarray(xi, float) - pot.xi0)
    grad = grad + np.array([pot.u1, 0.0])
    return val, grad


@dataclass(frozen=True)
class StateTwo:
    u2: float
    theta_sh: float
    rho2: float
    c2: float
    branch: str
    pseudo_speed_at_P0: float
    theta_w: float
    s: float = field(default=math.nan, repr=False)

    @property
    def v2(self) -> float:
        _, tw = _cos_tan(self.theta_w)
        return 0.0 if self.u2 == 0.0 else self.u2 * tw

    @property
    def sonic_center(self) -> Tuple[float, float]:
        return (self.u2, self.v2)

    @property
    def supersonic_at_P0(self) -> bool:
        return self.pseudo_speed_at_P0 > self.c2


def phi2(xi, eta, s2: StateTwo, pot: PotentialIncident):
    """Potential of state (2), matched to state (1) on the line through P0.

    Written as ``phi0 + u2 (xi - xi0) + v2 (eta - xi0 tan(theta_w))``; for the
    normal reflection (u2 = 0) the state-(2) constant is fixed by continuity
    with state (1) on the reflected shock instead.
    """
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    val, grad = phi0(xi, eta)
    if s2.u2 == 0.0:
        # phi2 = phi0 + const with phi1 = phi2 on xi = xi_bar
        xbar = normal_shock_position(pot, s2.rho2)
        return val + pot.u1 * (xbar - pot.xi0), grad
    _, tw = _cos_tan(s2.theta_w)
    u2, v2 = s2.u2, s2.v2
    val = val + u2 * (xi - pot.xi0) + v2 * (eta - pot.xi0 * tw)
    grad = grad + np.array([u2, v2])
    return val, grad


def normal_shock_position(pot: PotentialIncident, rho2: float) -> float:
    """Location of the reflected normal shock; negative."""
    return pot.rho1 * pot.u1 / (pot.rho1 - rho2)


def potential_normal_reflection(pot: PotentialIncident) -> StateTwo:
    """Potential-flow normal reflection: state (2) at rest behind a vertical shock.

    The density solves ``rho2^(g-1) - rho1^(g-1) = (g-1) u1^2 (rho2+rho1) / (2 (rho2-rho1))``,
    whose left side minus right side increases from -inf at rho1 to +inf.
    """
    g, r1, u1 = pot.gas.gamma, pot.rho1, pot.u1

    def f(r2):
        return r2 ** (g - 1.0) - r1 ** (g - 1.0) - (g - 1.0) * u1 * u1 * (r2 + r1) / (2.0 * (r2 - r1))

    lo = r1 * (1.0 + 1e-14)
    hi = 2.0 * r1
    while f(hi) < 0.0:
        hi *= 2.0
    rho2 = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    c2 = rho2 ** (0.5 * (g - 1.0))
    s_limit = _normal_limit_s(pot, rho2)
    return StateTwo(u2=0.0, theta_sh=HALF_PI, rho2=rho2, c2=c2, branch="a",
                    pseudo_speed_at_P0=math.inf, theta_w=HALF_PI, s=s_limit)


def _normal_limit_s(pot: PotentialIncident, rho2: float) -> float:
    # limit of u2 / cos^2 as theta_w -> pi/2 from the Bernoulli relation
    g = pot.gas.gamma
    return (rho2 ** (g - 1.0) - pot.gas.bernoulli_head) / ((g - 1.0) * pot.xi0)


def _state_from_uw(pot: PotentialIncident, theta_w: float, u2: float, w: float,
                   branch: str) -> StateTwo:
    g = pot.gas.gamma
    cw, tw = _cos_tan(theta_w)
    s = u2 / (cw * cw)
    c2sq = pot.gas.bernoulli_head + (g - 1.0) * s * (w + 0.5 * u2)
    rho2 = c2sq ** (1.0 / (g - 1.0))
    theta_sh = math.atan2(pot.u1 - u2, u2 * tw)
    return StateTwo(u2=u2, theta_sh=theta_sh, rho2=rho2, c2=math.sqrt(c2sq), branch=branch,
                    pseudo_speed_at_P0=w / cw, theta_w=theta_w, s=s)


def _residual_uw(u2, w, pot: PotentialIncident, cos2: float):
    """Reduced residual from ``u2`` and ``w = xi0 - u2`` given separately.

    Expanding ``rho2 = rho0 + (rho2 - rho0)`` and using the incident-shock
    relation removes the trivial root analytically, so the expression stays
    accurate as ``s -> 0`` and as ``u2 -> xi0``.
    """
    g, r0, r1, u1, xi0 = pot.gas.gamma, pot.gas.rho0, pot.rho1, pot.u1, pot.xi0
    s = u2 / cos2
    a = (g - 1.0) * (w + 0.5 * u2) / pot.gas.bernoulli_head
    with np.errstate(over="ignore"):
        drho_over_s = r0 * np.expm1(np.log1p(a * s) / (g - 1.0)) / s
    return (-drho_over_s * w * (u1 - s) + r0 * (cos2 * (u1 - s) + xi0)
            + r1 * u1 * cos2 - r1 * xi0)


def reduced_residual(s, pot: PotentialIncident, theta_w: float):
    """Flux balance across the reflected shock divided by ``s``; vectorized in ``s``."""
    cw, _ = _cos_tan(theta_w)
    s = np.asarray(s, float)
    u2 = s * cw * cw
    out = _residual_uw(u2, pot.xi0 - u2, pot, cw * cw)
    return float(out) if np.ndim(out) == 0 else out


def _z_to_uw(z, xi0: float):
    # z <= 0 resolves small u2, z > 0 resolves u2 close to xi0
    z = np.asarray(z, float)
    half = 0.5 * xi0
    small = half * np.exp(np.minimum(z, 0.0))
    near = half * np.exp(-np.maximum(z, 0.0))
    u2 = np.where(z <= 0.0, small, xi0 - near)
    w = np.where(z <= 0.0, xi0 - small, near)
    return u2, w


def _residual_z(z, pot: PotentialIncident, cos2: float):
    u2, w = _z_to_uw(z, pot.xi0)
    out = _residual_uw(u2, w, pot, cos2)
    return float(out) if np.ndim(out) == 0 else out


def state_two_rh_residual(pot: PotentialIncident, theta_w: float, u2: float,
                          theta_sh: float, point: Optional[Tuple[float, float]] = None) -> float:
    """Normal mass-flux jump across the reflected shock at a point of it.

    Densities are evaluated from the Bernoulli law of each state, so this is
    independent of the reduction used by :func:`state_two_solve`.
    """
    cw, tw = _cos_tan(theta_w)
    p0x, p0y = (pot.xi0, pot.xi0 * tw) if point is None else point
    normal = np.array([math.sin(theta_sh), -math.cos(theta_sh)])
    _, g1 = phi1(p0x, p0y, pot)
    v1, _ = phi1(p0x, p0y, pot)
    gradsq1 = float(g1 @ g1)
    rho1 = float(bernoulli_density(gradsq1, float(v1), pot.gas))
    # phi2 = phi1 at P0, gradient shifted by (u2 - u1, u2 tan)
    g2 = np.array([u2 - p0x, u2 * tw - p0y])
    v2 = float(v1)
    if point is not None:
        v2 = float(v1) + (u2 - pot.u1) * (p0x - pot.xi0) + u2 * tw * (p0y - pot.xi0 * tw)
    rho2 = float(bernoulli_density(float(g2 @ g2), v2, pot.gas))
    return rho2 * float(g2 @ normal) - rho1 * float(g1 @ normal)


@dataclass(frozen=True)
class SearchConfig:
    tol: float = 1e-10
    n_scan: int = 400
    theta_lo: float = 1e-3
    z_span: float = 700.0


def _scan_max(pot: PotentialIncident, theta_w: float, cfg: SearchConfig) -> Tuple[float, float]:
    """Maximum of the reduced residual over admissible u2; returns (z_max, H_max)."""
    cw, _ = _cos_tan(theta_w)
    cos2 = cw * cw
    z_grid = np.linspace(-cfg.z_span, cfg.z_span, 2 * cfg.n_scan + 1)
    h = _residual_z(z_grid, pot, cos2)
    h = np.where(np.isfinite(h), h, -np.inf)
    k = int(np.argmax(h))
    lo = z_grid[max(k - 1, 0)]
    hi = z_grid[min(k + 1, z_grid.size - 1)]
    res = minimize_scalar(lambda z: -_residual_z(z, pot, cos2), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    z_star, h_star = float(res.x), _residual_z(res.x, pot, cos2)
    if h[k] > h_star:
        z_star, h_star = float(z_grid[k]), float(h[k])
    return z_star, h_star


def state_two_solve(pot: PotentialIncident, theta_w: float,
                    cfg: SearchConfig = SearchConfig()) -> Optional[Tuple[StateTwo, StateTwo]]:
    """Weak (a) and strong (b) reflected states at P0, or None past detachment.

    At theta_w = pi/2 the strong root has escaped to infinity and the pair
    degenerates: both entries are the normal reflection state.
    """
    if not 0.0 < theta_w <= HALF_PI:
        raise LocalStateError(f"theta_w must lie in (0, pi/2], got {theta_w}")
    if theta_w == HALF_PI:
        nr = potential_normal_reflection(pot)
        return nr, nr
    z_star, h_star = _scan_max(pot, theta_w, cfg)
    if not h_star > 0.0:
        return None
    cw, _ = _cos_tan(theta_w)
    cos2 = cw * cw
    H = lambda z: _residual_z(z, pot, cos2)  # noqa: E731
    z_lo, z_hi = -cfg.z_span, cfg.z_span
    if not (H(z_lo) < 0.0 and H(z_hi) < 0.0):
        raise ConfigurationError("reduced residual has an unexpected sign at the range ends")
    kw = dict(xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    roots = [brentq(H, z_lo, z_star, **kw), brentq(H, z_star, z_hi, **kw)]
    out = []
    for z, label in zip(roots, "ab"):
        u2, w = _z_to_uw(z, pot.xi0)
        out.append(_state_from_uw(pot, theta_w, float(u2), float(w), label))
    return out[0], out[1]


def _max_residual(theta_w: float, pot: PotentialIncident, cfg: SearchConfig) -> float:
    return _scan_max(pot, theta_w, cfg)[1]


def _theta_grid(cfg: SearchConfig) -> np.ndarray:
    return np.linspace(HALF_PI - 1e-6, cfg.theta_lo, 400)


def detachment_angle(pot: PotentialIncident, cfg: SearchConfig = SearchConfig()) -> float:
    """Wedge angle below which no reflected state exists at P0.

    Found as the zero of the maximal reduced residual, which is positive
    exactly when the two roots exist and vanishes when they merge.
    """
    f = lambda t: _max_residual(t, pot, cfg)  # noqa: E731
    prev_t, prev_v = None, None
    for t in _theta_grid(cfg):
        v = f(t)
        if prev_v is not None and prev_v > 0.0 >= v:
            return brentq(f, t, prev_t, xtol=cfg.tol, rtol=4 * np.finfo(float).eps)
        prev_t, prev_v = t, v
    raise ConfigurationError("no detachment bracket found in (0, pi/2)")


def _sonic_gap(theta_w: float, pot: PotentialIncident, cfg: SearchConfig) -> float:
    pair = state_two_solve(pot, theta_w, cfg)
    if pair is None:
        return math.nan
    a = pair[0]
    return a.pseudo_speed_at_P0 - a.c2


def sonic_angle(pot: PotentialIncident, cfg: SearchConfig = SearchConfig(),
                theta_d: Optional[float] = None) -> float:
    """Wedge angle where the weak state becomes sonic at P0."""
    td = detachment_angle(pot, cfg) if theta_d is None else theta_d
    f = lambda t: _sonic_gap(t, pot, cfg)  # noqa: E731
    lo = td + 1e-9
    hi = HALF_PI - 1e-6
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo < 0.0 < f_hi):
        # the weak state may already be supersonic right at detachment
        grid = np.linspace(lo, hi, 200)
        vals = [f(t) for t in grid]
        for k in range(len(grid) - 1):
            if vals[k] < 0.0 <= vals[k + 1]:
                return brentq(f, grid[k], grid[k + 1], xtol=cfg.tol)
        raise ConfigurationError("no sonic bracket found in (theta_d, pi/2)")
    return brentq(f, lo, hi, xtol=cfg.tol, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class TransitionAngles:
    theta_d: float
    theta_s: float


def transition_angles(pot: PotentialIncident, cfg: SearchConfig = SearchConfig()) -> TransitionAngles:
    td = detachment_angle(pot, cfg)
    return TransitionAngles(td, sonic_angle(pot, cfg, theta_d=td))


@dataclass(frozen=True)
class TransitionRow:
    parameter: float
    rho1: float
    theta_d: float
    theta_s: float
    ok: bool
    message: str = ""

    @property
    def gap(self) -> float:
        return self.theta_s - self.theta_d


def transition_curve(gas: GasParams, values: Sequence[float], by: str = "rho1",
                     cfg: SearchConfig = SearchConfig()) -> List[TransitionRow]:
    """Detachment and sonic angles over a sweep of incident strengths.

    Args:
        gas: upstream state.
        values: sweep values of ``rho1`` or of ``m1`` (Mach number of state (1)).
        by: ``"rho1"`` or ``"m1"``.

    Failed samples come back as rows with ``ok=False`` and NaN angles.
    """
    if by not in ("rho1", "m1"):
        raise LocalStateError(f"unknown sweep parameter {by!r}")
    rows = []
    for v in values:
        try:
            rho1 = float(v) if by == "rho1" else rho1_from_m1(gas, float(v))
            ta = transition_angles(potential_incident(gas, rho1), cfg)
            rows.append(TransitionRow(float(v), rho1, ta.theta_d, ta.theta_s, True))
        except (LocalStateError, ValueError, ArithmeticError) as exc:
            rows.append(TransitionRow(float(v), math.nan, math.nan, math.nan, False, str(exc)))
    return rows
