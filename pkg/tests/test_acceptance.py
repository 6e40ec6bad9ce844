"""The ten acceptance criteria at their stated tolerances, one verdict line each."""

import math
import time

import numpy as np
import pytest

from conftest import record_criterion
from deltasmile import geometry as geo
from deltasmile import kernel as ker
from deltasmile import oracle as orc
from deltasmile import pricing as pr
from deltasmile.model import ModelParams, Verdict, feller_classify, feller_numeric_check

SABR = ModelParams(1.0, 0.5, 0.3, -0.3)
F0, S0 = 1.0, 0.2


def test_criterion_01_closed_form_geodesics():
    y = np.linspace(0.0, 0.99, 200)
    forms = {
        1.0: 1 - np.sqrt(1 - y * y),
        0.5: np.arcsin(np.sqrt(y)) - np.sqrt(y - y * y),
        1 / 3: 2 - np.sqrt(1 - y ** (2 / 3)) * (2 + y ** (2 / 3)),
        0.25: 0.5 * (3 * np.arcsin(y**0.25) - np.sqrt(1 - np.sqrt(y)) * (3 + 2 * np.sqrt(y)) * y**0.25),
    }
    t = time.perf_counter()
    err = max(float(np.max(np.abs(geo.standard_geodesic_x(d, y) - f))) for d, f in forms.items())
    elapsed = time.perf_counter() - t
    ok = err <= 1e-8 and elapsed < 1.0
    record_criterion(1, ok, f"max |x - closed form| = {err:.2e} (tol 1e-8), {elapsed * 1e3:.1f} ms (limit 1 s)")
    assert ok


def test_criterion_02_hyperbolic_degeneracy():
    grid = np.linspace(0.05, math.pi - 0.05, 50)
    sind_err = 0.0
    for a in grid:
        for b in grid:
            if abs(geo.sind_solve(1.0, a, b).intercept + 1 / math.tan(b)) < 1e-6:
                continue  # branch boundary
            sind_err = max(sind_err, abs(geo.sind(1.0, a, b) - math.sin(a) / math.sin(b)))
    ds = np.linspace(0.0, 3.0, 61)
    errs = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        jac = geo.jacobi_solve(1.0, eps, numeric=True)
        errs.append(max(abs(jac.Z1(t) - math.sinh(t)) for t in ds))
    # refinement must not make things worse beyond round-off
    refining = all(e1 <= max(e0, 1e-10) for e0, e1 in zip(errs, errs[1:]))
    z_a = geo.jacobi_solve(0.5, 1e-2).Z1(1.0)
    z_b = geo.jacobi_solve(0.5, 5e-3).Z1(1.0)
    robust = abs(z_a / z_b - 1) < 1e-3
    ok = sind_err <= 1e-8 and errs[0] <= 1e-4 and refining and robust
    record_criterion(2, ok, f"sind err {sind_err:.1e} (tol 1e-8); Z1 - sinh at eps 1e-2/5e-3/2.5e-3 = "
                            f"{errs[0]:.1e}/{errs[1]:.1e}/{errs[2]:.1e} (tol 1e-4)")
    assert ok


def test_criterion_03_killing_and_curvature():
    worst = 0.0
    for d in (0.5, 0.6, 0.7, 0.8, 0.9, 1.0):
        # geodesics reach y = 0 after finite length when delta < 1; start high enough to run length 5
        y0 = 1.0 if d == 1.0 else max(1.0, (20.0 / float(geo.apex_distance(d, 0.0))) ** (1 / (1 - d)))
        for angle in (0.0, 0.7, -0.4):
            path = geo.geodesic_integrate(geo.GeodesicState.unit(0.0, y0, angle, d), 5.0, d)
            worst = max(worst, *path.killing_drift())
    curv = max(abs(geo.curvature_from_christoffel(d, 0.3, y) + d * y ** (2 * d - 2))
               for d in (0.5, 0.6, 0.7, 0.8, 0.9, 1.0) for y in (0.4, 1.0, 2.0))
    ok = worst < 1e-6 and curv <= 1e-5
    record_criterion(3, ok, f"Killing drift {worst:.1e} (tol 1e-6); curvature FD err {curv:.1e} (tol 1e-5)")
    assert ok


def _line(theta1, u):
    return (u * math.cos(theta1) / math.sin(theta1), u)


def test_criterion_04_variation_formulas():
    worst_sv = 0.0
    for d in (1.0, 0.6, 0.8):
        for theta1, P in ((1.2, (0.9, 0.7)), (2.0, (-0.4, 1.1)), (1.0, (-0.3, 0.9))):
            foot = geo.distance_point_to_line(d, geo.HalfPlanePoint(*P), theta1, 0.0)
            z, zd = geo.jacobi_along(d, P, foot.start_velocity, foot.d)
            d2 = geo.second_variation(d, foot.foot.y, theta1, foot.d, z, zd, foot.side)
            y, h = foot.foot.y, 1e-3 * foot.foot.y
            f = [geo.geodesic_distance(d, P, _line(theta1, y + k * h)) for k in (-1, 0, 1)]
            fd = (f[0] - 2 * f[1] + f[2]) / h**2
            worst_sv = max(worst_sv, abs(d2 - fd) / max(1.0, abs(fd)))
    worst_pd = [0.0, 0.0, 0.0]
    for theta1, Y0 in ((1.3, 0.8), (0.9, 1.4), (2.1, 0.5)):
        phi = lambda u: 0.5 * geo.geodesic_distance(1.0, (0.3, Y0), (0.3 + (u - Y0) / math.tan(theta1), u)) ** 2  # noqa
        pd = geo.phase_derivatives_atm(1.0, Y0, theta1)
        h = 2e-3 * Y0
        f = {k: phi(Y0 + k * h) for k in range(-3, 4)}
        fd = ((f[1] - 2 * f[0] + f[-1]) / h**2,
              (f[2] - 2 * f[1] + 2 * f[-1] - f[-2]) / (2 * h**3),
              (-f[3] + 12 * f[2] - 39 * f[1] + 56 * f[0] - 39 * f[-1] + 12 * f[-2] - f[-3]) / (6 * h**4))
        for i, (a, b) in enumerate(zip((pd.d2, pd.d3, pd.d4), fd)):
            worst_pd[i] = max(worst_pd[i], abs(a / b - 1))
    ok = worst_sv <= 1e-4 and max(worst_pd) <= 1e-3
    record_criterion(4, ok, f"second variation err {worst_sv:.1e} (tol 1e-4); phi'' / phi''' / phi'''' rel err "
                            f"{worst_pd[0]:.1e} / {worst_pd[1]:.1e} / {worst_pd[2]:.1e} (tol 1e-3)")
    assert ok


def test_criterion_05_pipeline_equivalence():
    strikes = np.geomspace(0.6, 1.6, 20)
    t = time.perf_counter()
    worst = 0.0
    for tau in (0.1, 0.5, 1.0):
        for K in strikes:
            a = pr.digital_density_P(SABR, tau, F0, S0, float(K))
            b = pr.sabr_closed_form_P(SABR, tau, F0, S0, float(K))
            worst = max(worst, abs(a / b - 1))
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-6 and elapsed < 10
    record_criterion(5, ok, f"max relative gap {worst:.1e} on 20 x 3 grid (tol 1e-6), {elapsed:.2f} s (limit 10 s)")
    assert ok


def _mass(tau, order, n=201):
    sd = S0 * math.sqrt(tau)
    ks = np.exp(np.linspace(-6 * sd * 2.5, 6 * sd * 2.5, n))
    return float(np.trapezoid([pr.digital_density_P(SABR, tau, F0, S0, float(k), order) for k in ks], ks))


def test_criterion_06_distribution_mass():
    m0 = _mass(0.25, 0)
    taus = (0.5, 1.0, 2.0, 3.0)
    m0s = [_mass(t, 0) for t in taus]
    m1s = [_mass(t, 1) for t in taus]
    gaps = [abs(1 - m) for m in m1s]
    trend = all(a < b for a, b in zip(gaps, gaps[1:]))
    stable = all(0.9 <= m <= 1.1 for m in m0s)
    ok = 0.95 <= m0 <= 1.05 and stable and trend
    record_criterion(6, ok, f"int P (order 0, tau 0.25) = {m0:.4f}; order 0 over tau 0.5..3: "
                            f"{', '.join(f'{m:.3f}' for m in m0s)}; |1 - int P| order 1 grows: "
                            f"{', '.join(f'{g:.1e}' for g in gaps)}")
    assert ok


CORNERS = {
    "SABR-like (1, 0.5)": (ModelParams(1.0, 0.5, 0.4, -0.3), 0.5),
    "Heston-like (1/2, 1)": (ModelParams(0.5, 1.0, 0.3, -0.5, 1.0, 0.25), 0.25),
}


@pytest.mark.slow
def test_criterion_07_monte_carlo():
    tau = 0.1
    strikes = np.exp(np.linspace(-0.3, 0.3, 7))
    t = time.perf_counter()
    worst, lines = 0.0, []
    for name, (p, s0) in CORNERS.items():
        sim = orc.simulate(p, tau, F0, s0, orc.SimConfig(n_paths=200_000, n_steps=500, seed=7))
        for K in strikes:
            mc = orc.mc_implied_vol(sim, float(K), tau, F0)
            v = pr.implied_vol(p, tau, F0, s0, float(K), 0)
            worst = max(worst, abs(v - mc.vol))
            lines.append(f"  {name} K={K:.4f}: asymptotic {v:.5f}, MC {mc.vol:.5f} +/- {mc.stderr:.5f}")
    elapsed = time.perf_counter() - t
    print("\n".join(lines))
    ok = worst <= 0.005 and elapsed < 120
    record_criterion(7, ok, f"max |sigma_B - MC| = {worst * 100:.2f} vol points (tol 0.5), {elapsed:.0f} s "
                            f"(limit 120 s)")
    assert ok


def test_criterion_08_degenerate_limits():
    q = ModelParams(0.6, 0.5, 0.0, -0.3)
    lv = all(pr.local_vol(q, 0.25, F0, S0, K) == S0**0.6 * K**0.5 for K in (0.5, 0.9, 1.0, 1.7))
    k1 = True
    for d in (0.5, 0.75, 1.0):
        for y in (0.3, 1.0, 2.0):
            zero = ker.DriftFieldSample(geo.HalfPlanePoint(0.0, y), 0.0, 0.0, 0.0, ((0.0, 0.0), (0.0, 0.0)))
            k1 &= ker.k1_origin(d, y, zero) == geo.gauss_curvature(d, y) / 6
    fav = all(pr.f_av(f, f) == f for f in (0.3, 1.0, 2.5))
    ok = lv and k1 and fav
    record_criterion(8, ok, f"nu=0 local vol exact: {lv}; f=0 K1_0 = R/6 exact: {k1}; f_av(f0, f0) = f0: {fav}")
    assert ok


REGIMES = [
    ((0.3, 1.0, 0.2, 0.4), Verdict.EXPLOSION_POSSIBLE),
    ((0.5, 1.0, 0.3, 0.5), Verdict.NO_EXPLOSION_RECURRENT),
    ((0.5, 0.25, 0.25, 0.5), Verdict.EXPLOSION_POSSIBLE),
    ((0.75, 1.0, 0.2, 0.4), Verdict.NO_EXPLOSION_RECURRENT),
    ((0.75, 0.0, 0.0, 0.4), Verdict.EXPLOSION_POSSIBLE),
    ((1.0, 0.0, 0.0, 0.4), Verdict.NO_EXPLOSION_RECURRENT),
]


def test_criterion_09_feller_table():
    agree = sum(feller_classify(*args).verdict is v for args, v in REGIMES)
    diags = [feller_numeric_check(*args) for args, _ in REGIMES]
    confident = [d for d in diags if d.consistent is not None]
    consistent = sum(d.consistent for d in confident)
    ok = agree == len(REGIMES) and consistent == len(confident)
    record_criterion(9, ok, f"analytic agreement {agree}/{len(REGIMES)}; numeric consistent "
                            f"{consistent}/{len(confident)} confident verdicts")
    assert ok


def test_criterion_10_first_order_coefficient():
    nu, tau = 0.3, 0.5
    worst, generic = 0.0, []
    for rho in (-0.5, 0.0, 0.5):
        p = ModelParams(1.0, 0.5, nu, rho)
        ratio = pr.sabr_closed_form_P(p, tau, F0, S0, F0, 1) / pr.sabr_closed_form_P(p, tau, F0, S0, F0, 0)
        worst = max(worst, abs(ratio - (1 + (4 - 5 * rho**2) / 24 * nu**2 * tau)))
        g = pr.digital_density_P(p, tau, F0, S0, F0, 1) / pr.digital_density_P(p, tau, F0, S0, F0, 0)
        generic.append(f"{(g - 1) / (nu**2 * tau):.4f}")
    ok = worst <= 1e-10
    record_criterion(10, ok, f"closed-form ratio err {worst:.1e} (tol 1e-10); generic expansion coefficient "
                             f"for rho = -0.5, 0, 0.5: {', '.join(generic)} (formula audit only)")
    assert ok
