"""Independent extended-precision oracles used by the test-suite."""

import mpmath as mp


def euler_incident_mp(g, r0, p0, r1):
    g, r0, p0, r1 = map(mp.mpf, (g, r0, p0, r1))
    p1 = p0 * ((g + 1) * r1 - (g - 1) * r0) / ((g + 1) * r0 - (g - 1) * r1)
    u1 = mp.sqrt((p1 - p0) * (r1 - r0) / (r0 * r1))
    m1_sq = 2 * (r1 - r0) ** 2 / (r0 * ((g + 1) * r1 - (g - 1) * r0))
    return p1, u1, m1_sq


def normal_ratio_bisect(m1_sq, g, iters=200):
    """Root t > 1 of the density-ratio quadratic by plain bisection."""
    m1_sq, g = mp.mpf(m1_sq), mp.mpf(g)
    q = lambda t: (1 + (g - 1) * m1_sq / 2) * t * t - (2 + (g + 1) * m1_sq / 2) * t + 1
    lo, hi = mp.mpf(1), mp.mpf(2)
    while q(hi) < 0:
        hi *= 2
    # q(1) = -m1_sq < 0
    for _ in range(iters):
        mid = (lo + hi) / 2
        if q(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def potential_incident_mp(g, r0, r1):
    g, r0, r1 = map(mp.mpf, (g, r0, r1))
    u1 = mp.sqrt(2 * (r1 - r0) * (r1 ** (g - 1) - r0 ** (g - 1)) / ((g - 1) * (r1 + r0)))
    return u1, r1 * u1 / (r1 - r0)


def rho_mp(q2, phi, g, r0):
    return (r0 ** (g - 1) - (g - 1) * (phi + q2 / 2)) ** (1 / (g - 1))


def state_two_residuals(u2, th, theta_w, g, r0, r1):
    """(RH flux jump at P0, alignment of the shock with {phi1 = phi2}).

    Unknowns are the state-(2) horizontal velocity and the reflected-shock
    angle, posed directly at the reflection point.
    """
    g, r0, r1 = map(mp.mpf, (g, r0, r1))
    u1, xi0 = potential_incident_mp(g, r0, r1)
    tw = mp.tan(theta_w)
    P = (xi0, xi0 * tw)
    n = (mp.sin(th), -mp.cos(th))
    phi_p0 = -(P[0] ** 2 + P[1] ** 2) / 2
    g1 = (u1 - P[0], -P[1])
    g2 = (u2 - P[0], u2 * tw - P[1])
    rho1 = rho_mp(g1[0] ** 2 + g1[1] ** 2, phi_p0, g, r0)
    rho2 = rho_mp(g2[0] ** 2 + g2[1] ** 2, phi_p0, g, r0)
    f1 = rho2 * (g2[0] * n[0] + g2[1] * n[1]) - rho1 * (g1[0] * n[0] + g1[1] * n[1])
    f2 = u2 * tw * mp.sin(th) - (u1 - u2) * mp.cos(th)
    return f1, f2


def state_two_newton_continuation(theta_w_deg, g=1.4, r0=1, r1=2, step_deg=0.1):
    """Weak state by 2-D Newton continued from 89.9 degrees in fixed steps.

    The start guess scales the normal-reflection limit by cos^2, keeping
    Newton away from the trivial root u2 = 0.
    """
    gm, r0m, r1m = map(mp.mpf, (g, r0, r1))
    u1, xi0 = potential_incident_mp(gm, r0m, r1m)
    f = lambda r2: r2 ** (gm - 1) - r1m ** (gm - 1) - (gm - 1) * u1 ** 2 * (r2 + r1m) / (2 * (r2 - r1m))
    r2 = mp.findroot(f, (r1m * (1 + mp.mpf("1e-20")), 100 * r1m), solver="anderson")
    s_lim = (r2 ** (gm - 1) - r0m ** (gm - 1)) / ((gm - 1) * xi0)
    u2 = s_lim * mp.cos(mp.radians(mp.mpf("89.9"))) ** 2
    deg = mp.mpf("89.9")
    th = mp.atan2(u1 - u2, u2 * mp.tan(mp.radians(deg)))
    target = mp.mpf(theta_w_deg)
    while True:
        tw = mp.radians(deg)
        def deflated(a, b):
            f1, f2 = state_two_residuals(a, b, tw, g, r0, r1)
            return f1 / a, f2

        sol = mp.findroot(deflated, (u2, th))
        u2, th = sol[0], sol[1]
        if deg <= target:
            break
        deg = max(deg - mp.mpf(step_deg), target)
    return u2, th
