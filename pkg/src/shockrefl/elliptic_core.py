"""Finite element discretization of the self-similar potential equation.

The equation ``div(rho grad phi) + 2 rho = 0`` is discretized with bilinear
(Q1) elements on a boundary-fitted grid of the subsonic region. Near the sonic
arc the grid is exactly polar about the sonic center, so grid lines ``i = const``
are arcs ``x = const``. Further out it blends into a Coons patch spanned by
the four boundary curves.

Boundary conditions: Dirichlet ``phi = phi2`` on the sonic arc, zero flux on
the wedge and the symmetry line, and the state-(1) mass flux across the shock.
The latter two are natural conditions of the weak form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from shockrefl.domain import GeometryError, NearSonicCoords, ShockCurve, WedgeGeometry
from shockrefl.thermo import GasParams

INTERIOR, SONIC, WEDGE, SYMM, SHOCK = 0, 1, 2, 3, 4
KIND_NAMES = {INTERIOR: "interior", SONIC: "sonic", WEDGE: "wedge", SYMM: "symm", SHOCK: "shock"}


class CoefficientError(AssertionError):
    """Effective coefficients lost ellipticity after the cutoff (a bug, not data)."""


class NonconvergenceError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


# ----------------------------------------------------------------------------
# grid
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GridConfig:
    n_x: int = 64
    n_y: int = 64
    grading: str = "power"
    power: float = 2.0
    ratio: float = 1.05
    band_width: float = 0.2
    blend_width: float = 0.25

    def __post_init__(self):
        if self.n_x < 2 or self.n_y < 2:
            raise ValueError("need at least 2 cells per direction")
        if self.grading not in ("power", "geometric", "uniform"):
            raise ValueError(f"unknown grading {self.grading!r}")
        if not 0 < self.band_width < self.blend_width:
            raise ValueError("need 0 < band_width < blend_width (fractions of c2)")


def grading(n: int, cfg: GridConfig) -> np.ndarray:
    """Node positions in [0, 1] clustered toward 0."""
    a = np.linspace(0.0, 1.0, n + 1)
    if cfg.grading == "uniform":
        return a
    if cfg.grading == "power":
        return a ** cfg.power
    r = cfg.ratio
    if r == 1.0:
        return a
    return (r ** np.arange(n + 1) - 1.0) / (r ** n - 1.0)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def _shock_heights(shock: ShockCurve, sigma: np.ndarray, sig_blend: float, wedge_len: float):
    """Height of the shock node attached to each wedge parameter ``sigma``.

    Inside the polar region the shock point lies on the arc ``x = sigma L``;
    beyond it a monotone cubic Hermite carries the height down to P2.
    """
    c2 = shock.geom.c2
    eta = np.empty_like(sigma)
    inner = sigma <= sig_blend + 1e-15
    for k in np.nonzero(inner)[0]:
        eta[k] = shock.eta_at_radius(c2 - sigma[k] * wedge_len)
    e2 = shock.eta_at_radius(c2 - sig_blend * wedge_len)
    # slope d eta / d sigma at the junction
    de = 1e-6 * max(e2, 1e-3)
    dr = (float(shock.radius(e2 + de)) - float(shock.radius(e2 - de))) / (2 * de)
    slope = -wedge_len / dr
    span = 1.0 - sig_blend
    delta = -e2
    alpha = np.clip(slope * span / delta, 0.0, 2.9)
    tau = (sigma[~inner] - sig_blend) / span
    h00 = 2 * tau ** 3 - 3 * tau ** 2 + 1
    h10 = tau ** 3 - 2 * tau ** 2 + tau
    h01 = -2 * tau ** 3 + 3 * tau ** 2
    h11 = tau ** 3 - tau ** 2
    eta[~inner] = h00 * e2 + h10 * alpha * delta + h01 * 0.0 + h11 * 1.0 * delta
    return eta


@dataclass
class Grid2D:
    """Mapped logical rectangle: index ``i`` runs from the sonic arc to the symmetry line,
    index ``j`` from the wedge to the shock."""

    cfg: GridConfig
    geom: WedgeGeometry
    shock: ShockCurve
    sigma: np.ndarray
    b: np.ndarray
    nodes: np.ndarray
    kind: np.ndarray
    polar_rows: int

    @property
    def shape(self):
        return self.nodes.shape[:2]

    @property
    def coords(self) -> NearSonicCoords:
        return self.geom.coords

    @property
    def xi(self):
        return self.nodes[..., 0]

    @property
    def eta(self):
        return self.nodes[..., 1]

    def xy(self) -> np.ndarray:
        return self.coords.to_xy(self.nodes)

    def cell_areas(self) -> np.ndarray:
        """Cell areas, positive for a non-folded grid.

        Index order (arc to symmetry, wedge to shock) is clockwise in the
        plane, hence the sign flip.
        """
        X = self.nodes
        a, b, c, d = X[:-1, :-1], X[1:, :-1], X[1:, 1:], X[:-1, 1:]
        cross = lambda u, v: u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]  # noqa: E731
        return -0.5 * (cross(c - a, d - b))

    def h(self) -> float:
        """Largest edge length."""
        X = self.nodes
        e1 = np.linalg.norm(np.diff(X, axis=0), axis=-1).max()
        e2 = np.linalg.norm(np.diff(X, axis=1), axis=-1).max()
        return float(max(e1, e2))


def build_grid(geom: WedgeGeometry, shock: ShockCurve, cfg: GridConfig = GridConfig()) -> Grid2D:
    """Boundary-fitted grid with a polar band next to the sonic arc."""
    c2 = geom.c2
    C = np.asarray(geom.sonic_center, float)
    P1, P3, P4 = (np.asarray(p, float) for p in (geom.p1, geom.p3, geom.p4))
    P2 = np.asarray(shock.p2, float)
    L = float(np.linalg.norm(P3 - P4))
    wdir = (P3 - P4) / L
    sigma = grading(cfg.n_x, cfg)
    bb = np.linspace(0.0, 1.0, cfg.n_y + 1)
    sig_band = cfg.band_width * c2 / L
    sig_blend = cfg.blend_width * c2 / L
    if sig_blend >= 0.9:
        raise GeometryError("blend region reaches the wedge vertex; domain too small")

    eta_s = _shock_heights(shock, sigma, sig_blend, L)
    S = shock.point(eta_s)
    S[0] = P1
    S[-1] = P2
    W = P4[None, :] + sigma[:, None] * L * wdir[None, :]
    W[-1] = P3
    y1 = geom.p1_angle_offset
    th_w = geom.theta_w
    A = C[None, :] + c2 * np.stack([np.cos(th_w + bb * y1), np.sin(th_w + bb * y1)], axis=-1)
    A[0], A[-1] = P4, P1
    B = P3[None, :] + bb[:, None] * (P2 - P3)[None, :]

    s_ = sigma[:, None, None]
    b_ = bb[None, :, None]
    coons = ((1 - s_) * A[None, :, :] + s_ * B[None, :, :]
             + (1 - b_) * W[:, None, :] + b_ * S[:, None, :]
             - ((1 - s_) * (1 - b_) * P4 + (1 - s_) * b_ * P1 + s_ * (1 - b_) * P3 + s_ * b_ * P2))

    # polar rows: arcs x = sigma L from the wedge to the shock
    coords = geom.coords
    beta = 1.0 - _smoothstep((sigma - sig_band) / (sig_blend - sig_band))
    in_polar = sigma <= sig_blend + 1e-15
    X = coons.copy()
    for i in np.nonzero(in_polar)[0]:
        x_i = sigma[i] * L
        y_top = float(coords.to_xy(S[i])[1]) if i > 0 else y1
        th = th_w + bb * y_top
        polar = C[None, :] + (c2 - x_i) * np.stack([np.cos(th), np.sin(th)], axis=-1)
        X[i] = beta[i] * polar + (1 - beta[i]) * coons[i]
    # boundary rows are exact
    X[:, 0] = W
    X[:, -1] = S
    X[0] = A
    X[-1] = B
    polar_rows = int(np.count_nonzero(beta >= 1.0))

    kind = np.zeros(X.shape[:2], dtype=np.int8)
    kind[-1, :] = SYMM
    kind[:, 0] = WEDGE
    kind[:, -1] = SHOCK
    kind[0, :] = SONIC
    grid = Grid2D(cfg, geom, shock, sigma, bb, X, kind, polar_rows)
    areas = grid.cell_areas()
    if not np.all(areas > 0):
        bad = np.argwhere(areas <= 0)
        raise GeometryError(f"grid folds: {len(bad)} cells with non-positive area, first at {bad[0].tolist()}")
    return grid


# ----------------------------------------------------------------------------
# cutoff
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffConfig:
    delta: float = 0.25
    near_arc_width: float = 0.2
    global_mach_cap: float = 0.95
    smooth_width: float = 0.1
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.near_arc_width > 0:
            raise ValueError("near_arc_width must be positive")
        if not 0 < self.global_mach_cap <= 1:
            raise ValueError("global_mach_cap must lie in (0, 1]")
        if not 0 <= self.smooth_width < 1:
            raise ValueError("smooth_width must lie in [0, 1)")


def soft_clamp(v, T, w):
    """C1 clamp of ``|v|`` at ``T`` with a quadratic blend over ``[(1-w)T, (1+w)T]``.

    Returns the clamped value and its derivative with respect to ``v``.
    """
    v = np.asarray(v, float)
    T = np.asarray(T, float)
    a = np.abs(v)
    sgn = np.sign(v)
    if w == 0:
        out = np.minimum(a, T)
        slope = (a < T).astype(float)
        return sgn * out, slope
    lo, hi = (1 - w) * T, (1 + w) * T
    mid = (a > lo) & (a < hi)
    # values outside the blend interval are discarded below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        blend = a - (a - lo) ** 2 / (4 * w * T)
        blend_slope = 1 - (a - lo) / (2 * w * T)
    out = np.where(a <= lo, a, np.where(mid, blend, T))
    slope = np.where(a <= lo, 1.0, np.where(mid, blend_slope, 0.0))
    return sgn * out, slope


# ----------------------------------------------------------------------------
# finite element operator
# ----------------------------------------------------------------------------


_G3 = (np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)]), np.array([5 / 9, 8 / 9, 5 / 9]))


@dataclass
class ProblemData:
    """Data of one boundary value problem on a grid.

    ``dirichlet(X) -> phi`` on the sonic arc; ``flux[kind](X, nu) -> g`` is the
    prescribed outward mass flux on the other sides; ``source(X)`` is added to
    the right-hand side (zero except in manufactured tests); ``state2(X)``
    returns (phi2, grad phi2) for the cutoff.
    """

    gas: GasParams
    dirichlet: Callable
    state2: Callable
    flux: Dict[int, Callable] = field(default_factory=dict)
    source: Optional[Callable] = None


class FEMOperator:
    """Residual and Jacobian of the cutoff-modified weak form on a fixed grid.

    Fields are nodal values of ``phi``; internally only ``psi = phi - phi2`` is
    interpolated by the elements while the reference state ``phi2`` and its
    gradient are evaluated exactly at quadrature points. Interpolating phi2
    itself would tilt its radial gradient by the cell angle, an error larger
    than the ellipticity margin next to the sonic arc.
    """

    def __init__(self, grid: Grid2D, data: ProblemData, cutoff: CutoffConfig = CutoffConfig()):
        self.grid = grid
        self.data = data
        self.cutoff = cutoff
        nx, ny = grid.shape
        self.n_nodes = nx * ny
        idx = np.arange(self.n_nodes).reshape(nx, ny)
        self.conn = np.stack([idx[:-1, :-1], idx[1:, :-1], idx[1:, 1:], idx[:-1, 1:]], axis=-1).reshape(-1, 4)
        X = grid.nodes.reshape(-1, 2)[self.conn]  # (C, 4, 2)
        g, gw = _G3
        s, t = np.meshgrid(g, g, indexing="ij")
        s, t = s.ravel(), t.ravel()
        w = np.outer(gw, gw).ravel()
        N = 0.25 * np.stack([(1 - s) * (1 - t), (1 + s) * (1 - t), (1 + s) * (1 + t), (1 - s) * (1 + t)], -1)
        dNs = 0.25 * np.stack([-(1 - t), (1 - t), (1 + t), -(1 + t)], -1)
        dNt = 0.25 * np.stack([-(1 - s), -(1 + s), (1 + s), (1 - s)], -1)
        # Jacobian of the bilinear map per cell and quadrature point
        Jm = np.empty(X.shape[:1] + (len(w), 2, 2))
        Jm[..., 0, 0] = np.einsum("qa,ca->cq", dNs, X[..., 0])
        Jm[..., 0, 1] = np.einsum("qa,ca->cq", dNs, X[..., 1])
        Jm[..., 1, 0] = np.einsum("qa,ca->cq", dNt, X[..., 0])
        Jm[..., 1, 1] = np.einsum("qa,ca->cq", dNt, X[..., 1])
        det = Jm[..., 0, 0] * Jm[..., 1, 1] - Jm[..., 0, 1] * Jm[..., 1, 0]
        if not (np.all(det > 0) or np.all(det < 0)):
            raise GeometryError("mapping Jacobian changes sign")
        inv = np.empty_like(Jm)
        inv[..., 0, 0] = Jm[..., 1, 1] / det
        inv[..., 1, 1] = Jm[..., 0, 0] / det
        inv[..., 0, 1] = -Jm[..., 0, 1] / det
        inv[..., 1, 0] = -Jm[..., 1, 0] / det
        dNref = np.stack([dNs, dNt], axis=-1)  # (Q, 4, 2)
        # physical gradients: dN/dX = inv(J) applied to reference gradients
        self.dN = np.einsum("cqij,qaj->cqai", inv, dNref)
        self.N = N
        self.wq = np.abs(det) * w[None, :]
        self.xq = np.einsum("qa,cad->cqd", N, X)
        self.area = self.wq.sum(axis=1)
        self._prepare_cutoff_geometry()
        self._prepare_boundary()
        self._prepare_source()
        self._prepare_sparsity()

    # -- setup --------------------------------------------------------------
    def _prepare_cutoff_geometry(self):
        coords = self.grid.coords
        r, er, _ = coords.basis(self.xq)
        self.x_q = coords.c2 - r
        self.er_q = er
        self.phi2_q, self.gphi2_q = self.data.state2(self.xq)
        self.phi2_nodes = self.data.state2(self.grid.nodes.reshape(-1, 2))[0]
        self.band_q = self.x_q < self.cutoff.near_arc_width * coords.c2

    def _prepare_boundary(self):
        grid = self.grid
        nx, ny = grid.shape
        idx = np.arange(self.n_nodes).reshape(nx, ny)
        g, gw = _G3
        t = 0.5 * (g + 1)
        edges = []
        for kind, fn in self.data.flux.items():
            if kind == SHOCK:
                a, b_, inner = idx[:-1, -1], idx[1:, -1], idx[:-1, -2]
            elif kind == WEDGE:
                a, b_, inner = idx[:-1, 0], idx[1:, 0], idx[:-1, 1]
            elif kind == SYMM:
                a, b_, inner = idx[-1, :-1], idx[-1, 1:], idx[-2, :-1]
            else:
                raise ValueError(f"flux condition on boundary kind {kind}")
            Xn = grid.nodes.reshape(-1, 2)
            pa, pb, pin = Xn[a], Xn[b_], Xn[inner]
            tang = pb - pa
            length = np.linalg.norm(tang, axis=1)
            nu = np.stack([tang[:, 1], -tang[:, 0]], -1) / length[:, None]
            flip = np.einsum("ed,ed->e", nu, pin - pa) > 0
            nu[flip] *= -1
            pts = pa[:, None, :] + t[None, :, None] * tang[:, None, :]
            gval = fn(pts, np.broadcast_to(nu[:, None, :], pts.shape))
            wts = 0.5 * gw[None, :] * length[:, None]
            contrib_a = np.sum(wts * gval * (1 - t)[None, :], axis=1)
            contrib_b = np.sum(wts * gval * t[None, :], axis=1)
            edges.append((a, contrib_a))
            edges.append((b_, contrib_b))
        vec = np.zeros(self.n_nodes)
        for nodes, vals in edges:
            vec += np.bincount(nodes, weights=vals, minlength=self.n_nodes)
        self.boundary_load = vec

    def _prepare_source(self):
        if self.data.source is None:
            self.source_load = np.zeros(self.n_nodes)
            return
        f = self.data.source(self.xq)
        local = np.einsum("cq,cq,qa->ca", self.wq, f, self.N)
        self.source_load = np.bincount(self.conn.ravel(), weights=local.ravel(), minlength=self.n_nodes)

    def _prepare_sparsity(self):
        rows = np.repeat(self.conn, 4, axis=1).ravel()
        cols = np.tile(self.conn, (1, 4)).ravel()
        self._rows, self._cols = rows, cols

    # -- coefficients -------------------------------------------------------
    def coefficients(self, phi: np.ndarray):
        """Quadrature-point values: phi, grad phi, modified gradient, its Jacobian,
        modified density and squared sound speed, and the clamp activity mask."""
        gas = self.data.gas
        cut = self.cutoff
        # the perturbation psi = phi - phi2 is interpolated; phi2 enters exactly
        psi = phi - self.phi2_nodes
        ph = self.phi2_q + np.einsum("qa,ca->cq", self.N, psi[self.conn])
        gr = self.gphi2_q + np.einsum("cqai,ca->cqi", self.dN, psi[self.conn])
        gmod = gr.copy()
        M = np.broadcast_to(np.eye(2), gr.shape + (2,)).copy()
        active = np.zeros(ph.shape, dtype=bool)
        if cut.enabled:
            band = self.band_q
            er = self.er_q
            gpsi = gr - self.gphi2_q
            psi_x = -np.einsum("cqi,cqi->cq", gpsi, er)
            T = np.maximum((2 - cut.delta) * self.x_q / (gas.gamma + 1), 1e-300)
            psi_x_mod, k = soft_clamp(psi_x, T, cut.smooth_width)
            corr = np.where(band, psi_x - psi_x_mod, 0.0)
            gmod = gr + corr[..., None] * er
            kk = np.where(band, k, 1.0)
            M = M - (1 - kk)[..., None, None] * np.einsum("cqi,cqj->cqij", er, er)
            active |= band & (np.abs(psi_x) > (1 - cut.smooth_width) * T)
            # global cap on |grad phi| relative to the critical speed, outside the band
            head = gas.bernoulli_head
            cstar = np.sqrt(np.maximum(2 / (gas.gamma + 1) * (head - (gas.gamma - 1) * ph), 0.0))
            q = np.linalg.norm(gmod, axis=-1)
            Tq = cut.global_mach_cap * cstar
            qm, kq = soft_clamp(q, Tq, cut.smooth_width)
            capped = (~band) & (q > (1 - cut.smooth_width) * Tq)
            if np.any(capped):
                with np.errstate(invalid="ignore", divide="ignore"):
                    ratio = np.where(capped, qm / q, 1.0)
                    n = np.where(capped[..., None], gmod / q[..., None], 0.0)
                Mc = (ratio[..., None, None] * (np.eye(2) - np.einsum("cqi,cqj->cqij", n, n))
                      + np.where(capped, kq, 1.0)[..., None, None] * np.einsum("cqi,cqj->cqij", n, n))
                Mc = np.where(capped[..., None, None], Mc, np.eye(2))
                gmod = ratio[..., None] * gmod
                M = np.einsum("cqij,cqjk->cqik", Mc, M)
                active |= capped
        c2sq = gas.bernoulli_head - (gas.gamma - 1) * (ph + 0.5 * np.sum(gmod * gmod, -1))
        if np.any(c2sq <= 0):
            raise CoefficientError("vacuum reached in the coefficient evaluation")
        rho = c2sq ** (1 / (gas.gamma - 1))
        return ph, gr, gmod, M, rho, c2sq, active

    def residual(self, phi: np.ndarray, with_jacobian: bool = False, linearization: str = "newton"):
        ph, gr, gmod, M, rho, c2sq, active = self.coefficients(phi)
        margin = c2sq - np.sum(gmod * gmod, -1)
        if np.any(margin <= 0):
            raise CoefficientError(f"modified coefficients not elliptic at {int(np.sum(margin <= 0))} points")
        flux = rho[..., None] * gr
        w = self.wq
        local = (np.einsum("cq,cqi,cqai->ca", w, flux, self.dN)
                 - np.einsum("cq,cq,qa->ca", w, 2 * rho, self.N))
        R = np.bincount(self.conn.ravel(), weights=local.ravel(), minlength=self.n_nodes)
        R -= self.source_load + self.boundary_load
        if not with_jacobian:
            return R
        ratio = rho / c2sq
        if linearization == "newton":
            Mg = np.einsum("cqij,cqj->cqi", M, gmod)
            A = rho[..., None, None] * np.eye(2) - ratio[..., None, None] * np.einsum("cqi,cqj->cqij", gr, Mg)
            bvec = -ratio[..., None] * gr
            dvec = 2 * ratio[..., None] * Mg
            e = 2 * ratio
            loc = (np.einsum("cq,cqai,cqij,cqbj->cab", w, self.dN, A, self.dN)
                   + np.einsum("cq,cqai,cqi,qb->cab", w, self.dN, bvec, self.N)
                   + np.einsum("cq,qa,cqj,cqbj->cab", w, self.N, dvec, self.dN)
                   + np.einsum("cq,cq,qa,qb->cab", w, e, self.N, self.N))
        elif linearization == "picard":
            loc = np.einsum("cq,cq,cqai,cqbi->cab", w, rho, self.dN, self.dN)
        else:
            raise ValueError(f"unknown linearization {linearization!r}")
        J = sp.csr_matrix((loc.ravel(), (self._rows, self._cols)), shape=(self.n_nodes, self.n_nodes))
        return R, J

    def clamp_activity(self, phi: np.ndarray) -> float:
        """Fraction of quadrature points where a cutoff modifies the gradient."""
        return float(np.mean(self.coefficients(phi)[-1]))

    def min_margin(self, phi: np.ndarray) -> float:
        _, _, gmod, _, _, c2sq, _ = self.coefficients(phi)
        return float(np.min(c2sq - np.sum(gmod * gmod, -1)))


def reflection_problem(pot, s2) -> ProblemData:
    """Data of the reflection problem: phi2 on the sonic arc, state-(1) flux across the shock."""
    from shockrefl.local_states import phi1, phi2

    gas = pot.gas

    def state2(X):
        return phi2(X[..., 0], X[..., 1], s2, pot)

    def dirichlet(X):
        return state2(X)[0]

    def shock_flux(X, nu):
        _, g1 = phi1(X[..., 0], X[..., 1], pot)
        return pot.rho1 * np.sum(g1 * nu, axis=-1)

    return ProblemData(gas=gas, dirichlet=dirichlet, state2=state2, flux={SHOCK: shock_flux})


def assemble(phi: np.ndarray, op: FEMOperator, linearization: str = "newton"):
    """Residual vector and linearized matrix at ``phi``."""
    return op.residual(phi.ravel(), with_jacobian=True, linearization=linearization)


def dirichlet_mask(grid: Grid2D) -> np.ndarray:
    return (grid.kind == SONIC).ravel()


def apply_boundary_conditions(J, R, grid: Grid2D, phi: np.ndarray, dirichlet_values: np.ndarray):
    """Reduce the Newton system to the free nodes.

    Returns ``(J_ff, rhs, free, delta_d)`` such that solving ``J_ff d = rhs`` gives the
    free-node correction; ``delta_d`` moves the Dirichlet nodes onto their data.
    """
    kinds = grid.kind.ravel()
    if np.any((kinds < INTERIOR) | (kinds > SHOCK)):
        raise ValueError("unclassified boundary node")
    fixed = dirichlet_mask(grid)
    free = ~fixed
    delta_d = dirichlet_values[fixed] - phi.ravel()[fixed]
    J = J.tocsr()
    J_ff = J[free][:, free]
    rhs = -R[free] - J[free][:, fixed] @ delta_d
    return J_ff.tocsc(), rhs, free, delta_d


def _linear_solve(A, b, rtol=1e-11):
    x = spsolve(A, b)
    bn = max(np.linalg.norm(b), 1e-300)
    for _ in range(3):
        r = b - A @ x
        if np.linalg.norm(r) <= rtol * bn:
            break
        x = x + spsolve(A, r)
    return x


@dataclass
class InnerReport:
    iterations: int
    converged: bool
    history: List[float]
    residual_history: List[float]
    clamp_active_fraction: float
    min_margin: float


def picard_solve(initial: np.ndarray, op: FEMOperator, tol: float = 1e-9, max_iter: int = 200,
                 linearization: str = "newton"):
    """Iterate linearize -> solve until the update max-norm falls below ``tol``.

    ``linearization="newton"`` differentiates the modified flux exactly apart
    from the state dependence of the global cap threshold;
    ``"picard"`` freezes the density and solves the resulting linear problem.
    Steps are halved while they increase the residual norm.
    Raises NonconvergenceError on sustained growth or after ``max_iter`` steps.
    """
    grid = op.grid
    phi = initial.astype(float).ravel().copy()
    dvals = op.data.dirichlet(grid.nodes.reshape(-1, 2))
    fixed = dirichlet_mask(grid)
    phi[fixed] = dvals[fixed]
    history, rhist = [], []
    growth = 0
    for it in range(1, max_iter + 1):
        R, J = op.residual(phi, with_jacobian=True, linearization=linearization)
        Jff, rhs, free, _ = apply_boundary_conditions(J, R, grid, phi, dvals)
        rnorm = float(np.max(np.abs(R[free])))
        delta = _linear_solve(Jff, rhs)
        lam = 1.0
        while True:
            trial = phi.copy()
            trial[free] += lam * delta
            try:
                Rt = op.residual(trial)
                ok = np.max(np.abs(Rt[free])) < max(rnorm, 1e-14) * (1 - 1e-4 * lam) or lam < 1 / 64
            except CoefficientError:
                ok = False
                if lam < 1 / 1024:
                    raise
            if ok:
                break
            lam *= 0.5
        phi = trial
        step = float(np.max(np.abs(lam * delta))) if delta.size else 0.0
        history.append(step)
        rhist.append(rnorm)
        # a clamp that switches on and off makes the steps non-monotone; only
        # sustained growth far above the best step counts as divergence
        if not np.isfinite(step) or step > 1e3 * max(min(history), tol):
            growth += 1
            if growth >= 3:
                raise NonconvergenceError("inner iteration diverges", history)
        else:
            growth = 0
        if step < tol:
            return phi.reshape(grid.shape), InnerReport(it, True, history, rhist,
                                                        op.clamp_activity(phi), op.min_margin(phi))
    raise NonconvergenceError(f"inner iteration hit max_iter={max_iter}", history)


# ----------------------------------------------------------------------------
# boundary rows (diagnostic)
# ----------------------------------------------------------------------------


def nodal_gradient(values: np.ndarray, grid) -> np.ndarray:
    """Gradient at every node from second-order index differences and the chain rule.

    ``grid`` is a :class:`Grid2D` or a bare node array of shape ``(n+1, m+1, 2)``.
    One-sided three-point differences are used on the grid boundary.
    """
    X = getattr(grid, "nodes", grid)
    # arclength along the wedge as the first coordinate: the index map is
    # singular at the arc for power grading
    t = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(X[:, 0], axis=0), axis=-1))])
    da = lambda f: np.gradient(f, t, axis=0, edge_order=2)  # noqa: E731
    db = lambda f: np.gradient(f, axis=1, edge_order=2)  # noqa: E731
    xa, xb, ya, yb = da(X[..., 0]), db(X[..., 0]), da(X[..., 1]), db(X[..., 1])
    fa, fb = da(values), db(values)
    det = xa * yb - xb * ya
    gx = (fa * yb - fb * ya) / det
    gy = (fb * xa - fa * xb) / det
    return np.stack([gx, gy], axis=-1)


def boundary_row_residual(phi: np.ndarray, grid: Grid2D, kind: int, flux_fn: Callable, gas: GasParams,
                          use_density: bool = True) -> np.ndarray:
    """Pointwise residual of the flux condition on one side, one-sided second-order differences.

    Returns ``rho grad phi . nu - g`` at the side's nodes (``grad phi . nu - g`` if
    ``use_density`` is False).
    """
    grad = nodal_gradient(phi, grid)
    if kind == SHOCK:
        sl, inner = (slice(None), -1), (slice(None), -2)
    elif kind == WEDGE:
        sl, inner = (slice(None), 0), (slice(None), 1)
    elif kind == SYMM:
        sl, inner = (-1, slice(None)), (-2, slice(None))
    else:
        raise ValueError("flux rows exist only on wedge, symmetry and shock")
    X = grid.nodes[sl]
    tang = np.gradient(X, axis=0, edge_order=2)
    nu = np.stack([tang[:, 1], -tang[:, 0]], -1)
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    flip = np.einsum("ed,ed->e", nu, grid.nodes[inner] - X) > 0
    nu[flip] *= -1
    g = grad[sl]
    val = np.einsum("ed,ed->e", g, nu)
    if use_density:
        p = phi[sl]
        base = gas.bernoulli_head - (gas.gamma - 1) * (p + 0.5 * np.sum(g * g, -1))
        val = np.maximum(base, 0.0) ** (1 / (gas.gamma - 1)) * val
    return val - flux_fn(X, nu)
