"""Geometry of the delta-space: the upper half-plane with metric (dx^2 + dy^2) / y^(2 delta).

Most computations are reduced by homogeneity to the *standard geodesic*, the
geodesic with apex (0, 1).  Along it

    dx/dy = -y^delta / sqrt(1 - y^(2 delta))      (right half, moving away from the apex)

and both the horizontal offset from the apex and the arc length from the apex
have closed forms in terms of incomplete beta / Gauss hypergeometric functions.
Scaling every coordinate by ``k`` maps geodesics to geodesics and multiplies
lengths by ``k^(1 - delta)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    BoundaryHit,
    BranchAmbiguity,
    ConjugatePoint,
    InvalidArgument,
    InvalidGrid,
    InvalidPoint,
    NoIntersection,
    NumericalFailure,
    UseHyperbolicForm,
)

Y_FLOOR = 1e-12


class Frame(enum.Enum):
    MODEL = "G"
    DELTA = "H"


@dataclass(frozen=True)
class HalfPlanePoint:
    x: float
    y: float
    frame: Frame = Frame.DELTA

    def __post_init__(self) -> None:
        if not (self.y > 0.0):
            raise InvalidPoint(f"y must be > 0, got {self.y}")


@dataclass(frozen=True)
class GeodesicState:
    point: HalfPlanePoint
    vx: float
    vy: float

    def speed2(self, delta: float) -> float:
        return (self.vx**2 + self.vy**2) / self.point.y ** (2 * delta)

    @classmethod
    def unit(cls, x: float, y: float, angle: float, delta: float) -> "GeodesicState":
        """Unit-speed state at (x, y) heading along the Euclidean angle ``angle``."""
        scale = y**delta
        return cls(HalfPlanePoint(x, y), scale * math.cos(angle), scale * math.sin(angle))


# --- curvature -----------------------------------------------------------------


def christoffel(delta: float, y: float) -> tuple[float, float, float]:
    """Non-zero symbols (Gamma^x_xy, Gamma^y_yy, Gamma^y_xx)."""
    if not (y > 0.0):
        raise InvalidPoint("y must be > 0")
    return (-delta / y, -delta / y, delta / y)


def gauss_curvature(delta: float, y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise InvalidPoint("y must be > 0")
    out = -delta * np.power(y, 2 * delta - 2)
    return float(out) if out.ndim == 0 else out


def curvature_from_christoffel(delta: float, x: float, y: float, h: float = 1e-4) -> float:
    """R = (1/sqrt g)[d_y(sqrt g / g_xx Gamma^y_xx) - d_x(sqrt g / g_xx Gamma^y_xy)] by central differences.

    For a conformal metric sqrt(g) / g_xx = 1, so only the Christoffel symbols
    are differenced.  ``x`` is carried for completeness (the metric does not
    depend on it).
    """
    def g_yxx(yy: float) -> float:
        return christoffel(delta, yy)[2]

    def g_yxy(xx: float) -> float:
        return 0.0  # Gamma^y_xy vanishes identically

    d_y = (g_yxx(y + h) - g_yxx(y - h)) / (2 * h)
    d_x = (g_yxy(x + h) - g_yxy(x - h)) / (2 * h)
    return y ** (2 * delta) * (d_y - d_x)


# --- geodesic integration -----------------------------------------------------


def killing_constants(delta: float, y, vx, vy):
    """(|v|^2 / y^(2 delta), vx / y^(2 delta)): speed and the x-translation invariant."""
    w = np.power(y, -2 * delta)
    return (np.square(vx) + np.square(vy)) * w, vx * w


def _geodesic_rhs(delta: float):
    def rhs(t, u):
        y, vx, vy = u[1], u[2], u[3]
        return [vx, vy, 2 * delta / y * vx * vy, delta / y * (vy * vy - vx * vx)]

    return rhs


@dataclass(frozen=True)
class GeodesicPath:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    delta: float
    killing_constants: tuple[float, float]
    dense: Callable[[float], np.ndarray] | None = field(default=None, repr=False, compare=False)

    @property
    def length(self) -> float:
        return float(self.t[-1])

    def killing_drift(self) -> tuple[float, float]:
        """Largest relative deviation of each Killing constant from its initial value."""
        c1, c2 = killing_constants(self.delta, self.y, self.vx, self.vy)
        k1, k2 = self.killing_constants
        d1 = float(np.max(np.abs(c1 - k1)) / abs(k1))
        d2 = float(np.max(np.abs(c2 - k2)) / max(abs(k2), 1e-300)) if k2 != 0 else float(np.max(np.abs(c2)))
        return d1, d2

    def scaled(self, factor: float) -> "GeodesicPath":
        return scale_path(self, factor)


def geodesic_integrate(
    start: GeodesicState,
    length: float,
    delta: float,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    n_samples: int = 201,
) -> GeodesicPath:
    """Integrate x'' = (2 delta / y) x' y', y'' = (delta / y)(y'^2 - x'^2) in proper time."""
    if length < 0:
        raise InvalidArgument("length must be >= 0")
    speed2 = start.speed2(delta)
    if abs(speed2 - 1.0) > 1e-9:
        raise InvalidArgument(f"start state is not unit speed (|v|^2 = {speed2})")
    y0 = start.point.y
    k = killing_constants(delta, y0, start.vx, start.vy)
    u0 = [start.point.x, y0, start.vx, start.vy]
    t_eval = np.linspace(0.0, length, n_samples)

    def floor_event(t, u):
        return u[1] - Y_FLOOR

    floor_event.terminal = True
    floor_event.direction = -1
    if length == 0.0:
        arr = np.array(u0, dtype=float)[:, None]
        return _freeze_path(np.zeros(1), arr, delta, k, None)
    sol = integrate.solve_ivp(
        _geodesic_rhs(delta), (0.0, length), u0, method="DOP853", rtol=rtol, atol=atol,
        t_eval=t_eval, dense_output=True, events=floor_event,
    )
    if sol.status == 1:
        partial = _freeze_path(sol.t, sol.y, delta, k, sol.sol)
        raise BoundaryHit("geodesic reached the y = 0 boundary", partial)
    if not sol.success:
        raise NumericalFailure(sol.message)
    return _freeze_path(sol.t, sol.y, delta, k, sol.sol)


def _freeze_path(t, u, delta, k, dense) -> GeodesicPath:
    arrays = [np.array(a, dtype=float) for a in (t, u[0], u[1], u[2], u[3])]
    for a in arrays:
        a.setflags(write=False)
    return GeodesicPath(*arrays, delta=delta, killing_constants=(float(k[0]), float(k[1])), dense=dense)


def scale_path(path: GeodesicPath, factor: float) -> GeodesicPath:
    """Image of a geodesic under (x, y) -> factor (x, y); proper times scale by factor^(1 - delta)."""
    if not factor > 0:
        raise InvalidArgument("scale factor must be > 0")
    d = path.delta
    tscale = factor ** (1 - d)
    vscale = factor / tscale
    dense = None
    if path.dense is not None:
        inner = path.dense

        def scaled_dense(t):
            u = np.asarray(inner(np.asarray(t) / tscale))
            return np.vstack([u[0] * factor, u[1] * factor, u[2] * vscale, u[3] * vscale])

        dense = scaled_dense

    u = np.vstack([path.x * factor, path.y * factor, path.vx * vscale, path.vy * vscale])
    k = killing_constants(d, u[1][0], u[2][0], u[3][0])
    return _freeze_path(path.t * tscale, u, d, k, dense)


def scale_length(length: float, factor: float, delta: float) -> float:
    return length * factor ** (1 - delta)


# --- the standard geodesic ------------------------------------------------------


def half_width(delta: float) -> float:
    """x where the standard geodesic meets y = 0: B(1/2 + 1/(2 delta), 1/2) / (2 delta)."""
    return float(special.beta(0.5 + 0.5 / delta, 0.5) / (2 * delta))


_SERIES_LIMIT = 0.95


def standard_geodesic_x(delta: float, y):
    """x(y) = int_0^y u^delta / sqrt(1 - u^(2 delta)) du, so x(0) = 0 and x(1) = half_width.

    Gauss 2F1 for y^(2 delta) <= 0.95; beyond that the regularised incomplete
    beta complement, which stays accurate up to the branch point y = 1.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr < 0.0) | (y_arr > 1.0)) or np.any(np.isnan(y_arr)):
        raise InvalidArgument("standard_geodesic_x needs 0 <= y <= 1")
    z = np.power(y_arr, 2 * delta)
    a = (delta + 1) / (2 * delta)
    series = np.power(y_arr, delta + 1) / (delta + 1) * special.hyp2f1(a, 0.5, a + 1, np.minimum(z, _SERIES_LIMIT))
    near = half_width(delta) - apex_offset(delta, y_arr)
    out = np.where(z <= _SERIES_LIMIT, series, near)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("standard_geodesic_x produced a non-finite value")
    return float(out) if out.ndim == 0 else out


def apex_offset(delta: float, y):
    """Horizontal distance from the apex (0, 1) to the standard geodesic at height y."""
    y_arr = np.asarray(y, dtype=float)
    p = 0.5 + 0.5 / delta
    out = half_width(delta) * special.betainc(0.5, p, 1.0 - np.power(y_arr, 2 * delta))
    return float(out) if out.ndim == 0 else out


def apex_distance(delta: float, y):
    """Arc length from the apex (0, 1) to height y on the standard geodesic."""
    y_arr = np.asarray(y, dtype=float)
    if delta == 1.0:
        out = np.arccosh(1.0 / y_arr)
    else:
        x1 = apex_offset(delta, y_arr)
        out = (x1 - np.power(y_arr, 1 - delta) * np.sqrt(1.0 - np.power(y_arr, 2 * delta))) / (1 - delta)
    return float(out) if np.ndim(out) == 0 else out


def distance_on_standard(delta: float, x1: float, y1: float) -> float:
    """Distance from (0, 1) to (x1, y1) on the standard geodesic, delta < 1 only."""
    if delta == 1.0:
        raise UseHyperbolicForm("delta = 1: use the hyperbolic closed form")
    if not (0.0 < y1 <= 1.0):
        raise InvalidArgument("need 0 < y1 <= 1")
    expected = apex_offset(delta, y1)
    if abs(abs(x1) - expected) > 1e-8:
        raise InvalidPoint(f"({x1}, {y1}) is not on the standard geodesic (|x| should be {expected})")
    return float((abs(x1) - y1 ** (1 - delta) * math.sqrt(1 - y1 ** (2 * delta))) / (1 - delta))


def _standard_tangent(delta: float, side: int, y: float, forward: int) -> tuple[float, float]:
    """Euclidean unit tangent at height y; ``forward=+1`` moves toward larger signed arc length."""
    a = y**delta
    b = math.sqrt(max(0.0, 1.0 - y ** (2 * delta)))
    # increasing signed arc length: down the right half, up the left half
    vy = -b if side > 0 else b
    return forward * a, forward * vy


# --- two-point distance ---------------------------------------------------------


def _vertical_distance(delta: float, ya: float, yb: float) -> float:
    if delta == 1.0:
        return abs(math.log(yb / ya))
    return abs(yb ** (1 - delta) - ya ** (1 - delta)) / (1 - delta)


@dataclass(frozen=True)
class GeodesicChord:
    """Minimising geodesic between two points: length and unit launch velocity at the first point."""

    d: float
    start_velocity: tuple[float, float]
    apex_height: float  # math.inf for a vertical chord


def geodesic_chord(delta: float, a: tuple[float, float], b: tuple[float, float]) -> GeodesicChord:
    """Solve for the arch through both points by homogeneity.

    Every non-vertical geodesic is a copy of the standard one scaled by its apex
    height k and translated.  The horizontal gap between the points fixes k by a
    one-dimensional root find; signed arc lengths from the apex give the distance.
    """
    (xa, ya), (xb, yb) = a, b
    if ya <= 0 or yb <= 0:
        raise InvalidPoint("points must have y > 0")
    gap = xb - xa
    dx = abs(gap)
    if dx <= 1e-15 * max(ya, yb):
        if ya == yb:
            return GeodesicChord(0.0, (0.0, 0.0), math.inf)
        return GeodesicChord(_vertical_distance(delta, ya, yb), (0.0, math.copysign(ya**delta, yb - ya)), math.inf)
    lo, hi = sorted((ya, yb))
    W = half_width(delta)
    X = lambda t: standard_geodesic_x(delta, t)  # noqa: E731
    span_at_apex = hi * (W - X(lo / hi))
    same_side = dx <= span_at_apex
    if same_side:
        f = lambda k: k * (X(hi / k) - X(lo / k)) - dx  # noqa: E731
    else:
        f = lambda k: k * (2 * W - X(lo / k) - X(hi / k)) - dx  # noqa: E731
    k_lo, k_hi = hi, 2.0 * hi
    if same_side and f(k_lo) <= 0.0:
        k = k_lo
    else:
        sign = 1.0 if same_side else -1.0
        while sign * f(k_hi) > 0.0:
            k_hi *= 2.0
        k = optimize.brentq(f, k_lo, k_hi, xtol=1e-15 * hi, rtol=1e-15)
    ta, tb = min(ya / k, 1.0), min(yb / k, 1.0)
    if same_side:
        # the lower point lies further from the apex; its side is where it sits relative to the higher one
        lower_is_a = ya <= yb
        lower_right = (gap < 0) if lower_is_a else (gap > 0)
        side_a = side_b = 1 if lower_right else -1
    else:
        side_a, side_b = (-1, 1) if gap > 0 else (1, -1)
    sig_a = side_a * apex_distance(delta, ta)
    sig_b = side_b * apex_distance(delta, tb)
    forward = 1 if sig_b > sig_a else -1
    ex, ey = _standard_tangent(delta, side_a, ta, forward)
    norm = math.hypot(ex, ey)
    v = (ya**delta * ex / norm, ya**delta * ey / norm)
    return GeodesicChord(float(k ** (1 - delta) * abs(sig_b - sig_a)), v, float(k))


def geodesic_distance(delta: float, a: tuple[float, float], b: tuple[float, float]) -> float:
    """Distance between two points of the delta-space (closed form at delta = 1)."""
    (xa, ya), (xb, yb) = a, b
    if ya <= 0 or yb <= 0:
        raise InvalidPoint("points must have y > 0")
    if delta == 1.0:
        return float(np.arccosh(1.0 + ((xa - xb) ** 2 + (ya - yb) ** 2) / (2 * ya * yb)))
    return geodesic_chord(delta, a, b).d


# --- sind and the rocket construction ---------------------------------------------


@dataclass(frozen=True)
class SindSolution:
    launch_height: float  # y1 = sin(theta1)^(1/delta)
    intercept: float  # e
    crash_height: float  # root of the implicit equation
    branch: int  # +1 right half, -1 left half
    residual: float

    @property
    def ratio(self) -> float:
        return self.launch_height / self.crash_height


_BRANCH_TOL = 1e-12


def _launch(delta: float, theta1: float) -> tuple[float, float]:
    s1, c1 = math.sin(theta1), math.cos(theta1)
    y1 = s1 ** (1.0 / delta)
    off = apex_offset(delta, y1)
    e = (off if theta1 <= math.pi / 2 else -off) - y1 * c1 / s1
    return y1, e


def _crash_on_branch(delta: float, e: float, cot2: float, branch: int) -> tuple[float, float]:
    g = lambda h: e + h * cot2 - branch * apex_offset(delta, h)  # noqa: E731
    lo, hi = 1e-300, 1.0
    glo, ghi = g(lo), g(hi)
    if ghi == 0.0:
        return 1.0, 0.0
    if glo * ghi > 0.0:
        raise NoIntersection("the geodesic does not meet the second line")
    h = optimize.brentq(g, lo, hi, xtol=1e-16, rtol=1e-15, maxiter=500)
    return h, abs(g(h))


def sind_solve(delta: float, theta1: float, theta2: float) -> SindSolution:
    """Launch perpendicular to the line at angle theta1 and find where the geodesic meets the line at theta2.

    Both lines pass through (e, 0); the geodesic is the standard one.  Brent's
    method on (0, 1] keeps a bracket at every step.
    """
    for th in (theta1, theta2):
        if not (0.0 < th < math.pi):
            raise InvalidArgument("angles must lie in (0, pi)")
    y1, e = _launch(delta, theta1)
    cot2 = math.cos(theta2) / math.sin(theta2)
    s = e + cot2
    if abs(s) < _BRANCH_TOL:
        candidates = []
        for br in (1, -1):
            try:
                candidates.append((*_crash_on_branch(delta, e, cot2, br), br))
            except NoIntersection:
                pass
        if not candidates:
            raise NoIntersection("no root on either branch")
        h, res, br = min(candidates, key=lambda c: c[1])
    else:
        br = 1 if s >= 0.0 else -1
        h, res = _crash_on_branch(delta, e, cot2, br)
    return SindSolution(y1, e, h, br, res)


def sind(delta: float, theta1: float, theta2: float) -> float:
    """Ordinate ratio y1 / y2 of the rocket construction (equals sin(theta1)/sin(theta2) at delta = 1)."""
    return sind_solve(delta, theta1, theta2).ratio


def sind_crash_height(delta: float, theta1: float, theta2: float) -> float:
    """Root of the implicit equation e + h / tan(theta2) = +-x(h) on the standard geodesic."""
    return sind_solve(delta, theta1, theta2).crash_height


def sind_partials(delta: float, theta1: float, theta2: float) -> tuple[float, float]:
    """(d/d theta1, d/d theta2) of the ratio returned by :func:`sind`.

    The crash height h is differentiated implicitly,
        (+-h^d / sqrt(1 - h^2d) + cot theta2) dh/dtheta1 = (1/d - 1) sin(theta1)^(1/d - 2),
        (+-h^d / sqrt(1 - h^2d) + cot theta2) dh/dtheta2 = h / sin^2 theta2,
    and the ratio y1 / h follows by the quotient rule.
    """
    sol = sind_solve(delta, theta1, theta2)
    cot2 = math.cos(theta2) / math.sin(theta2)
    if abs(sol.intercept + cot2) < 1e-10:
        raise BranchAmbiguity("derivatives are undefined on the branch boundary")
    h, y1 = sol.crash_height, sol.launch_height
    slope = h**delta / math.sqrt(1.0 - h ** (2 * delta))
    denom = sol.branch * slope + cot2
    s1 = math.sin(theta1)
    dh1 = (1.0 / delta - 1.0) * s1 ** (1.0 / delta - 2.0) / denom
    dh2 = h / math.sin(theta2) ** 2 / denom
    dy1 = s1 ** (1.0 / delta - 1.0) * math.cos(theta1) / delta
    return dy1 / h - y1 * dh1 / h**2, -y1 * dh2 / h**2


def i_delta(delta: float, theta1: float, theta2: float) -> float:
    return sind(delta, theta1, theta2)


# --- point to line ------------------------------------------------------------------


@dataclass(frozen=True)
class LineFoot:
    d: float
    foot: HalfPlanePoint
    theta2: float
    side: int  # +1 when the geodesic reaches the foot moving along (-sin theta1, cos theta1)
    start_velocity: tuple[float, float]  # unit-speed velocity at the point, toward the foot
    scale: float  # homogeneity factor from the standard configuration


def line_side(theta1: float, anchor: float, point: tuple[float, float]) -> int:
    """+1 if the point lies to the right of the line (direction (cos theta1, sin theta1)), else -1."""
    n = (-math.sin(theta1), math.cos(theta1))
    val = n[0] * (point[0] - anchor) + n[1] * point[1]
    return 1 if val < 0.0 else -1


def distance_point_to_line(delta: float, point: HalfPlanePoint, theta1: float, anchor: float) -> LineFoot:
    """Geodesic distance from ``point`` to the straight line through (anchor, 0) at angle theta1."""
    X, Y = point.x, point.y
    theta2 = math.atan2(Y, X - anchor)
    if abs(theta2 - theta1) < 1e-14:
        return LineFoot(0.0, point, theta2, 1, (0.0, 0.0), 1.0)
    sol = sind_solve(delta, theta1, theta2)
    k = Y / sol.crash_height
    y_min = k * sol.launch_height
    foot = HalfPlanePoint(anchor + y_min * math.cos(theta1) / math.sin(theta1), y_min)
    side_launch = 1 if theta1 <= math.pi / 2 else -1
    sig_launch = side_launch * apex_distance(delta, sol.launch_height)
    sig_point = sol.branch * apex_distance(delta, min(sol.crash_height, 1.0))
    d = k ** (1 - delta) * abs(sig_point - sig_launch)
    forward = 1 if sig_launch > sig_point else -1
    ex, ey = _standard_tangent(delta, sol.branch, sol.crash_height, forward)
    norm = math.hypot(ex, ey)
    v = (Y**delta * ex / norm, Y**delta * ey / norm)
    return LineFoot(float(d), foot, theta2, line_side(theta1, anchor, (X, Y)), v, k)


# --- Jacobi fields -------------------------------------------------------------------


def _jacobi_arc_rhs(delta: float):
    def rhs(t, u):
        x, y, vx, vy, z, zd = u
        return [vx, vy, 2 * delta / y * vx * vy, delta / y * (vy * vy - vx * vx), zd, delta * y ** (2 * delta - 2) * z]

    return rhs


def jacobi_along(delta: float, start: tuple[float, float], velocity: tuple[float, float], length: float,
                 rtol: float = 1e-12, atol: float = 1e-14) -> tuple[float, float]:
    """(Z(d), Z'(d)) for the normal Jacobi field with Z(0) = 0, Z'(0) = 1 along a geodesic.

    Solves Z'' = delta y^(2 delta - 2) Z together with the geodesic in arc
    length, which is regular everywhere (the y-parametrised form is singular at
    the apex).  delta = 1 has constant curvature: Z = sinh, Z' = cosh.
    """
    if length == 0.0:
        return 0.0, 1.0
    if delta == 1.0:
        return math.sinh(length), math.cosh(length)
    u0 = [start[0], start[1], velocity[0], velocity[1], 0.0, 1.0]
    sol = integrate.solve_ivp(_jacobi_arc_rhs(delta), (0.0, length), u0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalFailure(sol.message)
    z, zd = float(sol.y[4, -1]), float(sol.y[5, -1])
    if z <= 0.0:
        raise ConjugatePoint("Jacobi field vanished along the geodesic")
    return z, zd


@dataclass(frozen=True)
class JacobiSolution:
    """Fundamental Jacobi fields along the standard geodesic, as functions of signed arc length from the apex.

    Z1 is odd and Z2 even in the signed arc length (odd/even in x).  Below the
    offset arc length ``t_eps`` the arc-length equation is integrated from the
    apex (where the y-parametrised form is singular); beyond it the
    y-parametrised equation integrated from y = 1 - epsilon.
    """

    delta: float
    epsilon: float
    t_eps: float
    y_grid: np.ndarray
    d_grid: np.ndarray
    Z1_grid: np.ndarray
    Z2_grid: np.ndarray
    Z1dot_grid: np.ndarray
    Z2dot_grid: np.ndarray
    _sol: Callable | None = field(default=None, repr=False, compare=False)
    _cap: Callable | None = field(default=None, repr=False, compare=False)
    analytic: bool = False

    def _eval(self, d: float) -> tuple[float, float, float, float]:
        t = abs(d)
        if self.analytic:
            return math.sinh(t), math.cosh(t), math.cosh(t), math.sinh(t)
        dl = self.delta
        if t <= self.t_eps:
            u = self._cap(t)
            return float(u[4]), float(u[6]), float(u[5]), float(u[7])
        y = _height_at_distance(dl, t)
        z1, z1y, z2, z2y = self._sol(y)
        ydot = -(y**dl) * math.sqrt(1 - y ** (2 * dl))
        return z1, z2, z1y * ydot, z2y * ydot

    def Z1(self, d: float) -> float:
        return math.copysign(1.0, d) * self._eval(d)[0] if d != 0 else 0.0

    def Z2(self, d: float) -> float:
        return self._eval(d)[1]

    def Z1dot(self, d: float) -> float:
        return self._eval(d)[2]

    def Z2dot(self, d: float) -> float:
        return math.copysign(1.0, d) * self._eval(d)[3]

    def wronskian(self, d: float) -> float:
        z1, z2, z1d, z2d = self._eval(d)
        return z1d * z2 - z1 * z2d


def _height_at_distance(delta: float, t: float) -> float:
    if delta == 1.0:
        return 1.0 / math.cosh(t)
    f = lambda y: apex_distance(delta, y) - t  # noqa: E731
    return optimize.brentq(f, 1e-300, 1.0, xtol=1e-16, rtol=1e-15, maxiter=500)


def _apex_cap(delta: float, t_end: float) -> Callable:
    """Dense solution of geodesic + both Jacobi fields on [0, t_end] starting at the apex."""
    rhs1 = _jacobi_arc_rhs(delta)

    def rhs(t, u):
        a = rhs1(t, u[:6])
        return a + [u[7], delta * u[1] ** (2 * delta - 2) * u[6]]

    sol = integrate.solve_ivp(rhs, (0.0, t_end), [0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0], method="DOP853",
                              rtol=1e-13, atol=1e-15, dense_output=True)
    if not sol.success:
        raise NumericalFailure(sol.message)
    return sol.sol


def jacobi_solve(delta: float, epsilon: float = 1e-2, y_grid=None, numeric: bool = False) -> JacobiSolution:
    """Integrate (1 - y^2d) Z'' + d (1 - 2 y^2d)/y Z' - (d / y^2) Z = 0 downward from y = 1 - epsilon.

    The initial values at y = 1 - epsilon come from integrating the regular
    arc-length equation Z'' = delta y^(2 delta - 2) Z from the apex, so the
    offset introduces no truncation error.
    ``numeric=True`` forces the ODE route at delta = 1 (for validation).
    """
    if not (0.0 < epsilon < 1.0):
        raise InvalidArgument("epsilon must lie in (0, 1)")
    if y_grid is None:
        y_grid = np.geomspace(1 - epsilon, 1e-3, 200)
    y_grid = np.asarray(y_grid, dtype=float)
    if np.any(y_grid > 1 - epsilon) or np.any(y_grid <= 0.0):
        raise InvalidGrid("y_grid must lie in (0, 1 - epsilon]")
    t_eps = apex_distance(delta, 1 - epsilon)
    d_grid = apex_distance(delta, y_grid)
    if delta == 1.0 and not numeric:
        return JacobiSolution(delta, epsilon, t_eps, y_grid, d_grid, np.sinh(d_grid), np.cosh(d_grid),
                              np.cosh(d_grid), np.sinh(d_grid), None, analytic=True)
    y0 = 1 - epsilon
    dl = delta
    ydot = -(y0**dl) * math.sqrt(1 - y0 ** (2 * dl))
    cap = _apex_cap(dl, t_eps)
    _, _, _, _, z1, z1d, z2, z2d = cap(t_eps)

    def rhs(y, u):
        a = 1 - y ** (2 * dl)
        b = dl * (1 - 2 * y ** (2 * dl)) / y
        c = dl / (y * y)
        return [u[1], (c * u[0] - b * u[1]) / a, u[3], (c * u[2] - b * u[3]) / a]

    y_end = float(np.min(y_grid))
    sol = integrate.solve_ivp(rhs, (y0, y_end), [z1, z1d / ydot, z2, z2d / ydot], method="DOP853",
                              rtol=1e-12, atol=1e-14, dense_output=True)
    if not sol.success:
        raise NumericalFailure(sol.message)
    vals = sol.sol(y_grid)
    yd = -np.power(y_grid, dl) * np.sqrt(1 - np.power(y_grid, 2 * dl))
    if np.any(vals[0] <= 0):
        raise ConjugatePoint("Z1 vanished: conjugate point on the standard geodesic")
    return JacobiSolution(delta, epsilon, t_eps, y_grid, d_grid, vals[0], vals[2], vals[1] * yd, vals[3] * yd,
                          sol.sol, cap)


# --- variations -------------------------------------------------------------------------


def second_variation(delta: float, Y_min: float, theta1: float, d: float, Z_at_d: float, Zdot_at_d: float,
                     side: int) -> float:
    """d''(u) along the strike line parametrised by its ordinate u, at the foot of the perpendicular.

    ``side=+1`` when the geodesic arrives at the foot moving along the left
    normal (-sin theta1, cos theta1) of the line direction (cos theta1, sin theta1);
    then the line's geodesic curvature adds +delta cos(theta1) / Y^(delta + 1).
    """
    if d <= 0.0:
        raise InvalidArgument("second_variation needs d > 0")
    if Z_at_d <= 0.0:
        raise ConjugatePoint("Z(d) = 0")
    s2 = math.sin(theta1) ** 2
    return (Zdot_at_d / (Z_at_d * Y_min ** (2 * delta)) + side * delta * math.cos(theta1) / Y_min ** (delta + 1)) / s2


@dataclass(frozen=True)
class PhaseDerivatives:
    d2: float
    d3: float
    d4: float
    f0: float = 1.0
    f1: float = 0.0
    f2: float = 0.0


def phase_derivatives_atm(delta: float, Y0: float, theta1: float, quartic: str = "exact") -> PhaseDerivatives:
    """Derivatives of u -> d(Z0, line(u))^2 / 2 at the money (the point lies on the line).

    ``quartic="exact"`` uses the normal-coordinate expansion
        phi'''' = (4 delta (2 delta + 1) / S - delta^2 / S^2) / Y0^(2 delta + 2),  S = sin^2 theta1,
    which equals the closed form delta(4 + 7 delta) / (S Y0^(2 delta + 2)) when S = 1;
    ``quartic="printed"`` keeps that closed form for every S and ``"zero"`` drops the term.
    """
    if not (Y0 > 0.0) or not (0.0 < theta1 < math.pi):
        raise InvalidArgument("need Y0 > 0 and theta1 in (0, pi)")
    S = math.sin(theta1) ** 2
    d2 = 1.0 / (S * Y0 ** (2 * delta))
    d3 = -3.0 * delta / (Y0 ** (2 * delta + 1) * S)
    if quartic == "exact":
        d4 = (4 * delta * (2 * delta + 1) / S - delta * delta / (S * S)) / Y0 ** (2 * delta + 2)
    elif quartic == "printed":
        d4 = delta * (4 + 7 * delta) / (Y0 ** (2 * delta + 2) * S)
    elif quartic == "zero":
        d4 = 0.0
    else:
        raise InvalidArgument(f"unknown quartic mode {quartic!r}")
    return PhaseDerivatives(d2, d3, d4)
