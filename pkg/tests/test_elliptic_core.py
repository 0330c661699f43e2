import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mms import manufactured_problem, mms_errors, observed_orders
from shockrefl.domain import build_geometry, initial_shock
from shockrefl.elliptic_core import (
    SHOCK,
    SONIC,
    SYMM,
    WEDGE,
    CutoffConfig,
    FEMOperator,
    GridConfig,
    NonconvergenceError,
    ProblemData,
    apply_boundary_conditions,
    assemble,
    boundary_row_residual,
    build_grid,
    grading,
    nodal_gradient,
    picard_solve,
    reflection_problem,
    soft_clamp,
)
from shockrefl.local_states import potential_incident, state_two_solve
from shockrefl.thermo import GasParams


@pytest.fixture(scope="module")
def setup89():
    pot = potential_incident(GasParams(), 2.0)
    tw = math.radians(89.0)
    s2, _ = state_two_solve(pot, tw)
    geom = build_geometry(pot, s2, tw)
    return pot, s2, geom, initial_shock(geom)


@pytest.mark.parametrize("kind", ["power", "geometric", "uniform"])
def test_grading_monotone_and_clustered(kind):
    cfg = GridConfig(n_x=20, grading=kind, power=3.0, ratio=1.1)
    s = grading(20, cfg)
    assert s[0] == 0.0 and s[-1] == pytest.approx(1.0)
    d = np.diff(s)
    assert np.all(d > 0)
    if kind != "uniform":
        assert d[0] < d[-1]


def test_grid_config_validation():
    with pytest.raises(ValueError):
        GridConfig(n_x=1)
    with pytest.raises(ValueError):
        GridConfig(grading="cosine")
    with pytest.raises(ValueError):
        GridConfig(band_width=0.3, blend_width=0.2)


@pytest.mark.parametrize("n,p", [(16, 2.0), (48, 2.0), (64, 4.0)])
def test_grid_unfolded_with_exact_arcs(setup89, n, p):
    _, _, geom, shock = setup89
    grid = build_grid(geom, shock, GridConfig(n_x=n, n_y=n, power=p))
    assert np.all(grid.cell_areas() > 0)
    xy = grid.xy()
    # polar rows are arcs of constant distance to the sonic circle
    for i in range(grid.polar_rows):
        assert np.ptp(xy[i, :, 0]) < 1e-12
    np.testing.assert_allclose(xy[0, :, 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(grid.nodes[0, -1], geom.p1, atol=1e-14)
    np.testing.assert_allclose(grid.nodes[0, 0], geom.p4, atol=1e-14)
    assert grid.kind[0, 5] == SONIC and grid.kind[5, 0] == WEDGE
    assert grid.kind[-1, 5] == SYMM and grid.kind[5, -1] == SHOCK


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 3.0), st.floats(0.0, 0.5))
def test_soft_clamp_properties(v, T, w):
    out, slope = soft_clamp(np.array([v]), T, w)
    out, slope = float(out[0]), float(slope[0])
    assert abs(out) <= min(abs(v), T) + 1e-12
    assert np.sign(out) == np.sign(v) or out == 0.0
    assert 0.0 <= slope <= 1.0
    if abs(v) < (1 - w) * T:
        assert out == v and slope == 1.0
    if abs(v) > (1 + w) * T:
        assert abs(out) == pytest.approx(T) and slope == 0.0


def test_soft_clamp_is_c1():
    T, w = 1.0, 0.2
    v = np.linspace(0.5, 1.5, 20001)
    out, slope = soft_clamp(v, T, w)
    fd = np.gradient(out, v)
    np.testing.assert_allclose(fd[1:-1], slope[1:-1], atol=2e-3)


def test_cutoff_config_validation():
    with pytest.raises(ValueError):
        CutoffConfig(delta=1.5)
    with pytest.raises(ValueError):
        CutoffConfig(global_mach_cap=0.0)


def test_nodal_gradient_exact_for_linear_functions(setup89):
    _, _, geom, shock = setup89
    grid = build_grid(geom, shock, GridConfig(n_x=24, n_y=24))
    X = grid.nodes
    g = nodal_gradient(2.0 * X[..., 0] - 0.7 * X[..., 1] + 3.0, grid)
    np.testing.assert_allclose(g[..., 0], 2.0, atol=1e-9)
    np.testing.assert_allclose(g[..., 1], -0.7, atol=1e-9)


def test_nodal_gradient_converges_for_quadratics(setup89):
    _, _, geom, shock = setup89
    errs = []
    for n in (16, 32, 64):
        grid = build_grid(geom, shock, GridConfig(n_x=n, n_y=n, grading="uniform"))
        X = grid.nodes
        f = X[..., 0] ** 2 - 3 * X[..., 0] * X[..., 1] + 0.5 * X[..., 1]
        exact = np.stack([2 * X[..., 0] - 3 * X[..., 1], -3 * X[..., 0] + 0.5], -1)
        errs.append(np.abs(nodal_gradient(f, grid) - exact).max(axis=-1))
    # second order where the map is smooth; the polar-to-Coons blend edge is only C1
    med = [np.median(e) for e in errs]
    assert med[1] < med[0] / 3.5 and med[2] < med[1] / 3.5
    assert errs[2].max() < errs[1].max() < errs[0].max()


def test_jacobian_matches_finite_differences():
    geom, shock, data, exact = manufactured_problem()
    grid = build_grid(geom, shock, GridConfig(n_x=8, n_y=8))
    op = FEMOperator(grid, data, CutoffConfig(enabled=False))
    rng = np.random.default_rng(0)
    phi = exact(grid.nodes).ravel() + 1e-3 * rng.standard_normal(op.n_nodes)
    R, J = assemble(phi, op)
    v = rng.standard_normal(op.n_nodes)
    eps = 1e-6
    fd = (op.residual(phi + eps * v) - op.residual(phi - eps * v)) / (2 * eps)
    np.testing.assert_allclose(J @ v, fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())


def test_cutoff_jacobian_matches_finite_differences(setup89):
    pot, s2, geom, shock = setup89
    grid = build_grid(geom, shock, GridConfig(n_x=16, n_y=16))
    op = FEMOperator(grid, reflection_problem(pot, s2))
    # psi ~ a x^2 near the arc puts psi_x inside the blend interval of the clamp
    x = np.maximum(grid.xy()[..., 0], 0.0)
    bump = np.maximum(0.0, 1.0 - x / (0.15 * geom.c2)) ** 3
    phi = op.phi2_nodes + (0.38 * x ** 2 * bump).ravel()
    active = op.coefficients(phi)[-1]
    assert active.sum() > 0 and not np.any(active & ~op.band_q)
    R, J = assemble(phi, op)
    v = np.random.default_rng(1).standard_normal(op.n_nodes)
    # the clamp curvature scales like 1/x, so the difference step must be tiny
    eps = 1e-9
    fd = (op.residual(phi + eps * v) - op.residual(phi - eps * v)) / (2 * eps)
    np.testing.assert_allclose(J @ v, fd, rtol=1e-4, atol=1e-6 * np.abs(fd).max())


def test_dirichlet_reduction(setup89):
    pot, s2, geom, shock = setup89
    grid = build_grid(geom, shock, GridConfig(n_x=8, n_y=8))
    data = reflection_problem(pot, s2)
    op = FEMOperator(grid, data)
    phi = op.phi2_nodes.copy()
    R, J = assemble(phi, op)
    dv = phi.copy()
    dv[: grid.shape[1]] += 1e-3
    Jff, rhs, free, dd = apply_boundary_conditions(J, R, grid, phi, dv)
    assert Jff.shape == (free.sum(), free.sum())
    np.testing.assert_allclose(dd, 1e-3)


def test_mms_converges_second_order():
    errs, _ = mms_errors(sizes=(32, 64, 128))
    orders = observed_orders(errs, (32, 64, 128))
    assert np.all(np.diff(errs) < 0)
    assert orders[-1] >= 1.9


def test_mms_flux_rows_consistent():
    geom, shock, data, exact = manufactured_problem()
    res = []
    for n in (16, 32):
        grid = build_grid(geom, shock, GridConfig(n_x=n, n_y=n, grading="uniform"))
        phi = exact(grid.nodes)
        r = boundary_row_residual(phi, grid, SYMM, data.flux[SYMM], data.gas)
        res.append(np.abs(r).max())
    assert res[1] < res[0] / 3


def test_constant_state_is_a_discrete_fixed_point(setup89):
    # phi2 solves the equation with its own flux on every side
    pot, s2, geom, shock = setup89
    grid = build_grid(geom, shock, GridConfig(n_x=12, n_y=12))
    from shockrefl.local_states import phi2

    def state2(X):
        return phi2(X[..., 0], X[..., 1], s2, pot)

    def flux(X, nu):
        p, g = state2(X)
        c2 = pot.gas.bernoulli_head - (pot.gas.gamma - 1) * (p + 0.5 * np.sum(g * g, -1))
        return c2 ** (1 / (pot.gas.gamma - 1)) * np.sum(g * nu, -1)

    data = ProblemData(pot.gas, lambda X: state2(X)[0], state2, {WEDGE: flux, SYMM: flux, SHOCK: flux})
    op = FEMOperator(grid, data, CutoffConfig(enabled=False))
    phi, rep = picard_solve(op.phi2_nodes.reshape(grid.shape), op, tol=1e-11)
    np.testing.assert_allclose(phi.ravel(), op.phi2_nodes, atol=1e-9)
    assert rep.converged and rep.iterations <= 3


def test_discrete_maximum_principle_on_constant_density():
    # with state2 data and zero source the solution stays between the arc data extremes
    geom, shock, data, exact = manufactured_problem()
    grid = build_grid(geom, shock, GridConfig(n_x=16, n_y=16))
    op = FEMOperator(grid, data, CutoffConfig(enabled=False))
    base = data.state2(grid.nodes)[0]
    phi, _ = picard_solve(base + (exact(grid.nodes) - base)[:1], op, tol=1e-11)
    psi = phi - base
    assert np.max(np.abs(psi - (exact(grid.nodes) - base))) < 1e-3


def test_picard_hits_max_iter(setup89):
    pot, s2, geom, shock = setup89
    grid = build_grid(geom, shock, GridConfig(n_x=8, n_y=8))
    op = FEMOperator(grid, reflection_problem(pot, s2))
    with pytest.raises(NonconvergenceError, match="max_iter"):
        picard_solve(op.phi2_nodes.reshape(grid.shape), op, tol=0.0, max_iter=2)


def test_picard_linearization_agrees_with_newton(setup89):
    pot, s2, geom, shock = setup89
    grid = build_grid(geom, shock, GridConfig(n_x=10, n_y=10))
    op = FEMOperator(grid, reflection_problem(pot, s2))
    start = op.phi2_nodes.reshape(grid.shape)
    a, ra = picard_solve(start, op, tol=1e-11)
    b, rb = picard_solve(start, op, tol=1e-11, linearization="picard", max_iter=500)
    np.testing.assert_allclose(a, b, atol=1e-8)
    assert ra.iterations < rb.iterations
