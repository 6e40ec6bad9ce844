import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deltasmile import geometry as geo
from deltasmile.errors import BoundaryHit, InvalidPoint

SQ = np.sqrt


def closed_forms():
    return {
        1.0: lambda y: 1 - SQ(1 - y * y),
        0.5: lambda y: np.arcsin(SQ(y)) - SQ(y - y * y),
        1 / 3: lambda y: 2 - SQ(1 - y ** (2 / 3)) * (2 + y ** (2 / 3)),
        0.25: lambda y: 0.5 * (3 * np.arcsin(y**0.25) - SQ(1 - SQ(y)) * (3 + 2 * SQ(y)) * y**0.25),
    }


@pytest.mark.parametrize("delta", [1.0, 0.5, 1 / 3, 0.25])
def test_standard_geodesic_closed_forms(delta):
    y = np.linspace(0.0, 0.99, 200)
    assert np.max(np.abs(geo.standard_geodesic_x(delta, y) - closed_forms()[delta](y))) <= 1e-8


def test_standard_geodesic_example_and_apex():
    assert geo.standard_geodesic_x(1.0, 0.6) == pytest.approx(0.2, abs=1e-14)
    for d in (0.5, 0.7, 1.0):
        assert geo.standard_geodesic_x(d, 1.0) == pytest.approx(geo.half_width(d), abs=1e-12)


def test_printed_one_third_row_is_not_a_geodesic():
    # the tabulated delta = 1/3 expression uses y^(3/2) where y^(2/3) is needed
    y = np.linspace(0.1, 0.9, 9)
    printed = 2 - 2 * SQ(1 - y**1.5) - SQ(y ** (4 / 3) - y**2)
    assert np.max(np.abs(geo.standard_geodesic_x(1 / 3, y) - printed)) > 1e-2


@pytest.mark.parametrize("delta", [0.5, 0.75, 1.0])
def test_standard_geodesic_solves_ode(delta):
    # dx/dy = y^delta / sqrt(1 - y^(2 delta)) on the standard curve
    y = np.linspace(0.05, 0.9, 18)
    h = 1e-6
    slope = (geo.standard_geodesic_x(delta, y + h) - geo.standard_geodesic_x(delta, y - h)) / (2 * h)
    assert np.allclose(slope, y**delta / SQ(1 - y ** (2 * delta)), rtol=1e-7)


def test_curvature_formula_and_fd():
    for d in (0.5, 0.6, 0.8, 1.0):
        for y in (0.3, 1.0, 2.5):
            exact = -d * y ** (2 * d - 2)
            assert geo.gauss_curvature(d, y) == pytest.approx(exact, rel=1e-14)
            assert abs(geo.curvature_from_christoffel(d, 0.2, y) - exact) <= 1e-5


@pytest.mark.parametrize("delta", [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
def test_killing_constants_conserved(delta):
    # for delta < 1 a geodesic reaches y = 0 after finite length; lengths scale like height^(1 - delta)
    y0 = 1.0 if delta == 1.0 else max(1.0, (6.0 / float(geo.apex_distance(delta, 0.0))) ** (1 / (1 - delta)))
    path = geo.geodesic_integrate(geo.GeodesicState.unit(0.0, y0, 0.0, delta), 5.0, delta)
    assert max(path.killing_drift()) < 1e-6


def test_geodesic_hits_floor():
    with pytest.raises(BoundaryHit) as info:
        geo.geodesic_integrate(geo.GeodesicState.unit(0.0, 1.0, -math.pi / 2, 1.0), 40.0, 1.0)
    assert info.value.partial.y[-1] < 1e-6


def test_point_validation():
    with pytest.raises(InvalidPoint):
        geo.HalfPlanePoint(0.0, -1.0)


def test_chord_matches_hyperbolic_distance():
    a, b = (0.1, 0.7), (1.3, 0.4)
    exact = math.acosh(1 + ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) / (2 * a[1] * b[1]))
    assert geo.geodesic_chord(1.0, a, b).d == pytest.approx(exact, rel=1e-10)
    assert geo.geodesic_distance(1.0, a, b) == pytest.approx(exact, rel=1e-14)


@pytest.mark.parametrize("delta", [0.5, 0.7, 0.9])
def test_chord_shoots_to_target(delta):
    a, b = (0.0, 0.8), (0.9, 1.4)
    ch = geo.geodesic_chord(delta, a, b)
    path = geo.geodesic_integrate(geo.GeodesicState(geo.HalfPlanePoint(*a), *ch.start_velocity), ch.d, delta)
    assert path.x[-1] == pytest.approx(b[0], abs=1e-8)
    assert path.y[-1] == pytest.approx(b[1], abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(
    delta=st.floats(0.5, 1.0),
    ax=st.floats(-1, 1), ay=st.floats(0.3, 2), bx=st.floats(-1, 1), by=st.floats(0.3, 2),
    cx=st.floats(-1, 1), cy=st.floats(0.3, 2),
)
def test_distance_is_a_metric(delta, ax, ay, bx, by, cx, cy):
    a, b, c = (ax, ay), (bx, by), (cx, cy)
    dab = geo.geodesic_distance(delta, a, b)
    assert dab == pytest.approx(geo.geodesic_distance(delta, b, a), rel=1e-8, abs=1e-10)
    assert dab <= geo.geodesic_distance(delta, a, c) + geo.geodesic_distance(delta, c, b) + 1e-8


@settings(max_examples=25, deadline=None)
@given(delta=st.floats(0.5, 1.0), k=st.floats(0.2, 5.0))
def test_distance_homogeneity(delta, k):
    a, b = (0.0, 0.6), (0.7, 1.1)
    d1 = geo.geodesic_distance(delta, a, b)
    dk = geo.geodesic_distance(delta, (k * a[0], k * a[1]), (k * b[0], k * b[1]))
    assert dk == pytest.approx(k ** (1 - delta) * d1, rel=1e-8)


def _grid(n):
    return np.linspace(0.05, math.pi - 0.05, n)


def test_sind_hyperbolic():
    worst = 0.0
    for a in _grid(50):
        for b in _grid(50):
            if abs(geo.sind_solve(1.0, a, b).intercept + 1 / math.tan(b)) < 1e-6:
                continue
            worst = max(worst, abs(geo.sind(1.0, a, b) - math.sin(a) / math.sin(b)))
    assert worst <= 1e-8


@pytest.mark.parametrize("delta", [0.5, 0.75])
def test_sind_partials_fd(delta):
    t1, t2, h = 1.1, 0.7, 1e-6
    p1, p2 = geo.sind_partials(delta, t1, t2)
    f1 = (geo.sind(delta, t1 + h, t2) - geo.sind(delta, t1 - h, t2)) / (2 * h)
    f2 = (geo.sind(delta, t1, t2 + h) - geo.sind(delta, t1, t2 - h)) / (2 * h)
    assert p1 == pytest.approx(f1, rel=1e-5)
    assert p2 == pytest.approx(f2, rel=1e-5)


def test_sind_ratio_and_crash_height():
    sol = geo.sind_solve(0.7, 1.0, 0.6)
    assert geo.sind(0.7, 1.0, 0.6) == pytest.approx(sol.launch_height / sol.crash_height, rel=1e-14)
    assert geo.sind_crash_height(0.7, 1.0, 0.6) == sol.crash_height


def test_i_delta_equal_angles():
    assert geo.i_delta(0.6, 1.0, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_jacobi_sinh():
    jac = geo.jacobi_solve(1.0, 1e-2, numeric=True)
    ds = np.linspace(0.0, 3.0, 31)
    assert max(abs(jac.Z1(t) - math.sinh(t)) for t in ds) <= 1e-4
    assert max(abs(jac.Z2(t) - math.cosh(t)) for t in ds) <= 1e-4


@pytest.mark.parametrize("delta", [0.5, 0.8])
def test_jacobi_wronskian(delta):
    jac = geo.jacobi_solve(delta)
    for t in (-0.8, 0.0, 0.3, 1.0):
        assert jac.wronskian(t) == pytest.approx(1.0, abs=1e-9)


def test_jacobi_along_constant_curvature():
    z, zd = geo.jacobi_along(1.0, (0.0, 1.0), (0.6, 0.8), 1.7)
    assert z == pytest.approx(math.sinh(1.7), rel=1e-12)
    assert zd == pytest.approx(math.cosh(1.7), rel=1e-12)
    zn, zdn = geo.jacobi_along(0.999999999, (0.0, 1.0), (0.6, 0.8), 1.7)
    assert zn == pytest.approx(z, rel=1e-6)


def _line_point(theta1, anchor, u):
    return (anchor + u * math.cos(theta1) / math.sin(theta1), u)


@pytest.mark.parametrize("delta", [0.6, 0.8, 1.0])
@pytest.mark.parametrize("theta1, P", [(1.2, (0.9, 0.7)), (2.0, (-0.4, 1.1)), (1.0, (-0.3, 0.9))])
def test_point_to_line_is_minimal_and_orthogonal(delta, theta1, P):
    foot = geo.distance_point_to_line(delta, geo.HalfPlanePoint(*P), theta1, 0.0)
    y = foot.foot.y
    ds = [geo.geodesic_distance(delta, P, _line_point(theta1, 0.0, u)) for u in (0.98 * y, y, 1.02 * y)]
    assert ds[1] == pytest.approx(foot.d, rel=1e-9)
    assert ds[1] < ds[0] and ds[1] < ds[2]


@pytest.mark.parametrize("delta", [0.6, 0.8, 1.0])
@pytest.mark.parametrize("theta1, P", [(1.2, (0.9, 0.7)), (2.0, (-0.4, 1.1)), (1.0, (-0.3, 0.9))])
def test_second_variation_fd(delta, theta1, P):
    foot = geo.distance_point_to_line(delta, geo.HalfPlanePoint(*P), theta1, 0.0)
    z, zd = geo.jacobi_along(delta, P, foot.start_velocity, foot.d)
    d2 = geo.second_variation(delta, foot.foot.y, theta1, foot.d, z, zd, foot.side)
    y, h = foot.foot.y, 1e-3 * foot.foot.y
    f = [geo.geodesic_distance(delta, P, _line_point(theta1, 0.0, y + k * h)) for k in (-1, 0, 1)]
    fd = (f[0] - 2 * f[1] + f[2]) / h**2
    assert d2 == pytest.approx(fd, abs=1e-4 * max(1.0, abs(fd)))


@pytest.mark.parametrize("theta1, Y0", [(1.3, 0.8), (0.9, 1.4), (2.1, 0.5)])
def test_phase_derivatives_fd_hyperbolic(theta1, Y0):
    x0 = 0.3
    phi = lambda u: 0.5 * geo.geodesic_distance(1.0, (x0, Y0), (x0 + (u - Y0) / math.tan(theta1), u)) ** 2  # noqa
    pd = geo.phase_derivatives_atm(1.0, Y0, theta1)
    h = 2e-3 * Y0
    f = {k: phi(Y0 + k * h) for k in range(-3, 4)}
    d2 = (f[1] - 2 * f[0] + f[-1]) / h**2
    d3 = (f[2] - 2 * f[1] + 2 * f[-1] - f[-2]) / (2 * h**3)
    d4 = (-f[3] + 12 * f[2] - 39 * f[1] + 56 * f[0] - 39 * f[-1] + 12 * f[-2] - f[-3]) / (6 * h**4)
    assert pd.d2 == pytest.approx(d2, rel=1e-3)
    assert pd.d3 == pytest.approx(d3, rel=1e-3)
    assert pd.d4 == pytest.approx(d4, rel=1e-3)


def test_quartic_variants():
    exact = geo.phase_derivatives_atm(0.7, 1.0, math.pi / 2, "exact")
    printed = geo.phase_derivatives_atm(0.7, 1.0, math.pi / 2, "printed")
    assert exact.d4 == pytest.approx(printed.d4, rel=1e-14)
    assert geo.phase_derivatives_atm(0.7, 1.0, 1.0, "zero").d4 == 0.0
    assert geo.phase_derivatives_atm(0.7, 1.0, 1.0, "exact").d4 != geo.phase_derivatives_atm(0.7, 1.0, 1.0, "printed").d4
