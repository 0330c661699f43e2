import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockrefl.thermo import (
    CavitationError,
    GasParams,
    bernoulli_density,
    critical_speed,
    ellipticity_margin,
    sonic_speed_euler,
    sonic_speed_selfsim,
)


def test_gas_params_validation():
    with pytest.raises(ValueError):
        GasParams(gamma=1.0)
    with pytest.raises(ValueError):
        GasParams(rho0=0.0)
    with pytest.raises(ValueError):
        GasParams(p0=-1.0)
    assert GasParams(p0=None).p0 is None


@pytest.mark.parametrize("p,rho,expected", [
    (1.0, 1.0, mp.sqrt(mp.mpf("1.4"))),
    (1 / 1.4, 1.0, mp.mpf(1)),
    (2.75, 2.0, mp.sqrt(mp.mpf("1.4") * mp.mpf("2.75") / 2)),
])
def test_sonic_speed_euler(p, rho, expected):
    assert sonic_speed_euler(p, rho, 1.4) == pytest.approx(float(expected), abs=1e-15)


def test_sonic_speed_euler_fixture_decimals():
    assert sonic_speed_euler(1.0, 1.0) == pytest.approx(1.1832160, abs=5e-8)
    assert sonic_speed_euler(2.75, 2.0) == pytest.approx(1.3874437, abs=5e-8)


@pytest.mark.parametrize("p,rho", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_sonic_speed_euler_rejects_nonpositive(p, rho):
    with pytest.raises(ValueError):
        sonic_speed_euler(p, rho)


def test_bernoulli_density_cases(gas14):
    assert bernoulli_density(0.0, 0.0, gas14) == 1.0
    vac = gas14.rho0 ** 0.4 / 0.4
    assert bernoulli_density(0.0, vac, gas14) == pytest.approx(0.0, abs=1e-12)
    oracle = (1 - mp.mpf("0.4") * (mp.mpf("0.1") + mp.mpf("0.125"))) ** mp.mpf("2.5")
    assert bernoulli_density(0.25, 0.1, gas14) == pytest.approx(float(oracle), abs=1e-15)
    # the density is the sound-speed square 0.91 raised to 1/(gamma-1)
    assert float(oracle) == pytest.approx(0.91 ** 2.5, abs=1e-15)


def test_bernoulli_density_cavitation(gas14):
    with pytest.raises(CavitationError):
        bernoulli_density(10.0, 1.0, gas14)


def test_sonic_speed_selfsim(gas14):
    assert sonic_speed_selfsim(0.0, 0.0, gas14) == 1.0
    assert sonic_speed_selfsim(0.25, 0.1, gas14) == pytest.approx(0.91, abs=1e-15)
    assert sonic_speed_selfsim(100.0, 0.0, gas14) < 0


def test_critical_speed(gas14):
    assert critical_speed(0.0, gas14) == pytest.approx(math.sqrt(2 / 2.4), abs=1e-15)
    assert critical_speed(0.0, gas14) == pytest.approx(0.9128709, abs=5e-8)
    assert critical_speed(1 / 0.4, gas14) == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(ValueError):
        critical_speed(3.0, gas14)


def test_ellipticity_margin(gas14):
    cs = critical_speed(0.0, gas14)
    assert ellipticity_margin([0.0, 0.0], 0.0, gas14) == pytest.approx(cs)
    assert ellipticity_margin([cs, 0.0], 0.0, gas14) == pytest.approx(0.0, abs=1e-15)
    assert ellipticity_margin([0.6, 0.8], 0.0, gas14) == pytest.approx(0.9128709 - 1, abs=5e-8)
    arr = ellipticity_margin(np.zeros((3, 4, 2)), np.zeros((3, 4)), gas14)
    assert arr.shape == (3, 4)


gammas = st.floats(1.05, 3.0)
rho0s = st.floats(0.2, 5.0)


@settings(max_examples=200, deadline=None)
@given(gammas, rho0s, st.floats(0, 1), st.floats(0, 1))
def test_density_power_matches_sound_speed(g, r0, a, b):
    gas = GasParams(g, r0)
    head = gas.bernoulli_head / (g - 1)
    phi = a * head * 0.9 - 0.5
    q2 = 2 * b * max(head - phi, 0.0) * 0.9
    rho = bernoulli_density(q2, phi, gas)
    assert rho ** (g - 1) == pytest.approx(sonic_speed_selfsim(q2, phi, gas), rel=1e-11, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(gammas, st.floats(-1, 0.0), st.floats(0, 0.4), st.floats(1e-3, 0.4))
def test_monotonicity(g, phi, q, dq):
    gas = GasParams(g, 1.0)
    assert ellipticity_margin([q + dq, 0.0], phi, gas) < ellipticity_margin([q, 0.0], phi, gas)
    rho = bernoulli_density(q * q, phi, gas)
    assert bernoulli_density((q + dq) ** 2, phi, gas) < rho
    assert bernoulli_density(q * q, phi + dq, gas) < rho
