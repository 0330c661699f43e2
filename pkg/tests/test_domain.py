import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockrefl.domain import (
    GeometryError,
    NearSonicCoords,
    ShockCurve,
    SingularPointError,
    build_geometry,
    initial_shock,
    initial_shock_function,
)
from shockrefl.local_states import (
    HALF_PI,
    normal_shock_position,
    phi1,
    phi2,
    potential_incident,
    potential_normal_reflection,
    state_two_solve,
)
from shockrefl.thermo import GasParams


@pytest.fixture(scope="module")
def setup89():
    pot = potential_incident(GasParams(), 2.0)
    tw = math.radians(89.0)
    a, b = state_two_solve(pot, tw)
    return pot, a, b, build_geometry(pot, a, tw)


def test_p1_on_sonic_circle_and_straight_shock(setup89):
    pot, s2, _, g = setup89
    C = np.array(g.sonic_center)
    assert np.hypot(*(np.array(g.p1) - C)) == pytest.approx(g.c2, abs=1e-12)
    v1 = phi1(*g.p1, pot)[0]
    v2 = phi2(*g.p1, s2, pot)[0]
    assert float(v1 - v2) == pytest.approx(0.0, abs=1e-12)


def test_p4_on_wedge_and_circle(setup89):
    _, _, _, g = setup89
    C = np.array(g.sonic_center)
    assert np.hypot(*(np.array(g.p4) - C)) == pytest.approx(g.c2, rel=1e-14)
    # P4 lies on the wedge ray through the origin
    cross = g.p4[0] * math.sin(g.theta_w) - g.p4[1] * math.cos(g.theta_w)
    assert cross == pytest.approx(0.0, abs=1e-14)
    assert g.wedge_length == pytest.approx(math.hypot(*g.p4))


def test_p1_angle_offset_positive(setup89):
    _, _, _, g = setup89
    y1 = g.p1_angle_offset
    assert 0 < y1 < math.pi
    np.testing.assert_allclose(g.coords.from_xy([0.0, y1]), g.p1, atol=1e-12)


def test_normal_reflection_geometry():
    pot = potential_incident(GasParams(), 2.0)
    nr = potential_normal_reflection(pot)
    g = build_geometry(pot, nr, HALF_PI)
    xbar = normal_shock_position(pot, nr.rho2)
    assert g.sonic_center == (0.0, 0.0)
    assert g.p1 == (xbar, math.sqrt(nr.c2 ** 2 - xbar ** 2))
    assert g.p2 == (xbar, 0.0)
    f = initial_shock_function(g)
    np.testing.assert_allclose(f(np.linspace(0, g.p1[1], 5)), xbar, atol=1e-15)


def test_strong_branch_rejected(setup89):
    pot, _, b, _ = setup89
    with pytest.raises(GeometryError):
        build_geometry(pot, b, math.radians(89.0))


def test_initial_shock_tangent_and_orthogonal(setup89):
    _, _, _, g = setup89
    f = initial_shock_function(g)
    e1 = g.p1[1]
    assert float(f(e1)) == pytest.approx(g.p1[0], abs=1e-14)
    h = 1e-6
    # tangent to the straight shock at P1
    slope = (float(f(e1)) - float(f(e1 - h))) / h
    assert slope == pytest.approx(g.s1_slope(), rel=1e-4)
    # orthogonal to the symmetry line
    assert (float(f(h)) - float(f(-h))) / (2 * h) == pytest.approx(0.0, abs=1e-9)


def test_initial_curve(setup89):
    _, _, _, g = setup89
    c = initial_shock(g)
    assert c.eta[0] == 0.0 and c.eta[-1] == g.p1[1]
    assert float(c.df(0.0)) == 0.0
    np.testing.assert_allclose(c.point(c.eta[-1]), g.p1, atol=1e-12)
    # fhat starts at P1's angular offset and increases into the band
    assert c.fhat(0.0) == pytest.approx(g.p1_angle_offset, abs=1e-10)
    ys = c.fhat(np.array([0.0, 0.01, 0.02, 0.05]))
    assert np.all(np.diff(ys) > 0)
    nu = c.normal(np.array([0.1, 0.5]))
    np.testing.assert_allclose(np.linalg.norm(nu, axis=-1), 1.0)
    assert np.all(nu[:, 0] < 0)


def test_shock_curve_validation(setup89):
    _, _, _, g = setup89
    eta = np.linspace(0, g.p1[1], 10)
    xi = initial_shock_function(g)(eta)
    with pytest.raises(GeometryError, match="symmetry"):
        ShockCurve(eta[1:], xi[1:], g)
    bad = xi.copy()
    bad[-1] += 1e-3
    with pytest.raises(GeometryError, match="P1"):
        ShockCurve(eta, bad, g)


def test_sonic_center_singular(setup89):
    _, _, _, g = setup89
    with pytest.raises(SingularPointError):
        g.coords.to_xy(g.sonic_center)


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.5, 1.0), st.floats(-3.0, 3.0), st.floats(0.05, 1.5))
def test_near_sonic_roundtrip(x, y, tw):
    c = NearSonicCoords((0.1, 0.2), 1.3, tw)
    pt = c.from_xy([x, y])
    back = c.to_xy(pt)
    np.testing.assert_allclose(back, [x, y], atol=1e-12)
    r, er, et = c.basis(pt)
    assert r == pytest.approx(1.3 - x)
    assert float(er @ et) == pytest.approx(0.0, abs=1e-15)
