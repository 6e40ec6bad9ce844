"""Isometry onto the delta-space, the transported drift, and the short-time heat kernel.

Coordinates: the model lives in reduced variables (x = F, y = sigma / nu) with
time s = nu^2 tau.  The map

    X = nu^(1-delta) (I(x) - rho y) / sqrt(1 - rho^2),   Y = nu^(1-delta) y,   I(x) = int_p^x du / c(u)

sends the diffusion metric to kappa times the delta-space metric, with
kappa = nu^(2 delta (delta - 1)).  Every kernel quantity below is therefore
expressed in delta-space time s_H = kappa s, and the drift is the first-order
part of the generator divided by kappa.

Two drift conventions are offered:

* ``"metric"``: generator-consistent drift (mean reversion pulls Y toward mu_H)
  and work paired through the metric, W = int (f_X dX + f_Y dY) / Y^(2 delta).
* ``"printed"``: the literal closed-form display, with lambda (Y - mu) and the
  Euclidean pairing int f_X dX + f_Y dY.  Kept for audits only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidArgument, InvalidGeometry, InvalidParameter, InvalidPoint, OutOfImage, SingularField
from .geometry import (
    GeodesicPath,
    HalfPlanePoint,
    Frame,
    geodesic_chord,
    geodesic_integrate,
    GeodesicState,
    jacobi_along,
)
from .model import ModelParams

CONVENTIONS = ("metric", "printed")


@dataclass(frozen=True)
class IsometrySpec:
    delta: float
    beta: float
    nu: float
    rho: float
    p: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.beta <= 1.0) or not (abs(self.rho) < 1.0) or not (self.nu > 0.0) or not (self.delta > 0):
            raise InvalidParameter("isometry needs 0 <= beta <= 1, |rho| < 1, nu > 0, delta > 0")
        if self.p is None:
            object.__setattr__(self, "p", 0.0 if self.beta < 1.0 else 1.0)
        if self.beta == 1.0 and not self.p > 0.0:
            raise InvalidParameter("beta = 1 needs a base point p > 0")

    @classmethod
    def from_params(cls, params: ModelParams, p: float | None = None) -> "IsometrySpec":
        return cls(params.delta, params.beta, params.nu, params.rho, p)

    @property
    def root(self) -> float:
        return math.sqrt(1.0 - self.rho * self.rho)

    @property
    def scale(self) -> float:
        return self.nu ** (1.0 - self.delta)

    @property
    def time_factor(self) -> float:
        """kappa with s_H = kappa * s."""
        return self.nu ** (2.0 * self.delta * (self.delta - 1.0))

    def c(self, x):
        return np.power(x, self.beta)

    def dc(self, x):
        return self.beta * np.power(x, self.beta - 1.0) if self.beta != 0.0 else np.zeros_like(np.asarray(x, float))

    def d2c(self, x):
        if self.beta in (0.0, 1.0):
            return np.zeros_like(np.asarray(x, float))
        return self.beta * (self.beta - 1.0) * np.power(x, self.beta - 2.0)

    def integral(self, x):
        """int_p^x du / u^beta."""
        if self.beta == 1.0:
            return np.log(np.asarray(x, float) / self.p)
        q = 1.0 - self.beta
        return (np.power(x, q) - self.p**q) / q

    def integral_inverse(self, value):
        if self.beta == 1.0:
            return self.p * np.exp(value)
        q = 1.0 - self.beta
        base = q * np.asarray(value, float) + self.p**q
        if np.any(base <= 0.0):
            raise OutOfImage("point lies outside the image of x > 0")
        return np.power(base, 1.0 / q)


def _coords(point) -> tuple[float, float]:
    if isinstance(point, HalfPlanePoint):
        return point.x, point.y
    return float(point[0]), float(point[1])


def phi_forward(spec: IsometrySpec, point) -> HalfPlanePoint:
    x, y = _coords(point)
    if not x > 0.0:
        raise InvalidPoint("x must be > 0")
    s = spec.scale
    return HalfPlanePoint(float(s * (spec.integral(x) - spec.rho * y) / spec.root), s * y, Frame.DELTA)


def phi_inverse(spec: IsometrySpec, point) -> HalfPlanePoint:
    X, Y = _coords(point)
    s = spec.scale
    x = spec.integral_inverse((spec.root * X + spec.rho * Y) / s)
    return HalfPlanePoint(float(x), Y / s, Frame.MODEL)


def jacobian(spec: IsometrySpec, x: float) -> np.ndarray:
    s, r = spec.scale, spec.root
    return np.array([[s / (r * float(spec.c(x))), -s * spec.rho / r], [0.0, s]])


def det_jacobian(spec: IsometrySpec, x: float) -> float:
    """nu^(2 - 2 delta) / (sqrt(1 - rho^2) c(x))."""
    return spec.scale**2 / (spec.root * float(spec.c(x)))


def model_metric(spec: IsometrySpec, x: float, y: float) -> np.ndarray:
    """Inverse of the reduced diffusion matrix nu^(2 delta - 2) y^(2 delta) [[c^2, rho c], [rho c, 1]]."""
    c = float(spec.c(x))
    a = spec.nu ** (2 * spec.delta - 2) * y ** (2 * spec.delta)
    return np.linalg.inv(a * np.array([[c * c, spec.rho * c], [spec.rho * c, 1.0]]))


def pulled_back_metric(spec: IsometrySpec, x: float, y: float) -> np.ndarray:
    """(grad Phi)^T H (grad Phi); equals time_factor * model_metric."""
    J = jacobian(spec, x)
    Y = spec.scale * y
    return J.T @ J / Y ** (2 * spec.delta)


# --- drift ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftFieldSample:
    at: HalfPlanePoint
    fx: float
    fy: float
    div: float
    jac: tuple[tuple[float, float], tuple[float, float]]


@dataclass(frozen=True)
class DriftField:
    """Transported first-order part of the generator, in delta-space time.

    ``lam`` and ``mu`` are the reduced mean-reversion parameters
    (lambda' / nu^2 and mu' / nu).
    """

    spec: IsometrySpec
    lam: float = 0.0
    mu: float = 0.0
    convention: str = "metric"

    def __post_init__(self) -> None:
        if self.convention not in CONVENTIONS:
            raise InvalidArgument(f"convention must be one of {CONVENTIONS}")

    @property
    def lam_h(self) -> float:
        if self.convention == "printed":
            return self.lam
        d = self.spec.delta
        return self.lam * self.spec.nu ** (2 * d * (1 - d))

    @property
    def mu_h(self) -> float:
        return self.mu if self.convention == "printed" else self.spec.scale * self.mu

    def _reversion(self, Y):
        """Vertical component: lam_H (mu_H - Y), or lam (Y - mu) as printed."""
        if self.convention == "printed":
            return self.lam * (Y - self.mu)
        return self.lam_h * (self.mu_h - Y)

    def _model_x(self, X, Y):
        sp = self.spec
        try:
            x = sp.integral_inverse((sp.root * np.asarray(X, float) + sp.rho * np.asarray(Y, float)) / sp.scale)
        except OutOfImage as exc:
            raise SingularField(f"drift undefined at X={X}, Y={Y}: {exc}") from exc
        if np.any(~np.isfinite(x)) or np.any(x <= 0.0):
            raise SingularField(f"drift undefined at X={X}, Y={Y}")
        return x

    def components(self, X, Y):
        sp = self.spec
        d = sp.delta
        Y = np.asarray(Y, float)
        ito = -0.5 * sp.nu ** (d - 1) * np.power(Y, 2 * d) * sp.dc(self._model_x(X, Y)) if sp.beta else 0.0 * Y
        rev = self._reversion(Y)
        fx = (ito - sp.rho * rev) / sp.root
        return fx, rev + 0.0 * fx

    def jacobian(self, X, Y):
        """((d_X f_X, d_Y f_X), (d_X f_Y, d_Y f_Y))."""
        sp = self.spec
        d, r = sp.delta, sp.root
        dyrev = self.lam if self.convention == "printed" else -self.lam_h
        if sp.beta == 0.0:
            return (0.0, float(-sp.rho * dyrev / r)), (0.0, float(dyrev))
        x = self._model_x(X, Y)
        c, c1, c2 = sp.c(x), sp.dc(x), sp.d2c(x)
        k = sp.nu ** (2 * d - 2)
        dxfx = -0.5 * k * Y ** (2 * d) * c * c2
        dyfx = (-d * sp.nu ** (d - 1) * Y ** (2 * d - 1) * c1 - 0.5 * k * Y ** (2 * d) * sp.rho * c * c2
                - sp.rho * dyrev) / r
        return (float(dxfx), float(dyfx)), (0.0, float(dyrev))

    def sample(self, point) -> DriftFieldSample:
        X, Y = _coords(point)
        fx, fy = self.components(X, Y)
        jac = self.jacobian(X, Y)
        return DriftFieldSample(HalfPlanePoint(X, Y), float(fx), float(fy), jac[0][0] + jac[1][1], jac)

    def one_form(self, X, Y):
        fx, fy = self.components(X, Y)
        if self.convention == "printed":
            return fx, fy
        w = np.power(np.asarray(Y, float), -2 * self.spec.delta)
        return fx * w, fy * w

    @property
    def vanishes(self) -> bool:
        return self.lam == 0.0 and self.spec.beta == 0.0


def drift_field(spec: IsometrySpec, lam: float, mu: float, point, convention: str = "metric") -> DriftFieldSample:
    return DriftField(spec, lam, mu, convention).sample(point)


def work_along_geodesic(field: DriftField, path: GeodesicPath, method: str = "dense") -> float:
    """Line integral of the drift one-form along the path.

    ``method="dense"`` integrates the solver's continuous extension adaptively;
    ``"samples"`` applies Simpson's rule to the stored samples.
    """
    if field.vanishes or path.length == 0.0:
        return 0.0
    if method == "dense" and path.dense is not None:
        def integrand(t):
            x, y, vx, vy = path.dense(t)
            wx, wy = field.one_form(x, y)
            return float(wx * vx + wy * vy)

        val, _ = integrate.quad(integrand, 0.0, path.length, epsabs=1e-13, epsrel=1e-12, limit=200)
        return float(val)
    wx, wy = field.one_form(path.x, path.y)
    return float(integrate.simpson(wx * path.vx + wy * path.vy, x=path.t))


def work_between(field: DriftField, a, b, n_samples: int = 201) -> float:
    """Work along the minimising geodesic from a to b."""
    a, b = _coords(a), _coords(b)
    if field.vanishes:
        return 0.0
    chord = geodesic_chord(field.spec.delta, a, b)
    if chord.d == 0.0:
        return 0.0
    path = geodesic_integrate(GeodesicState(HalfPlanePoint(*a), *chord.start_velocity), chord.d, field.spec.delta,
                              n_samples=n_samples)
    return work_along_geodesic(field, path)


# --- SABR circle geometry and closed-form work ------------------------------------------


@dataclass(frozen=True)
class SabrGeometry:
    """Endpoints of the delta = 1 geodesic from the spot to the foot on the strike line."""

    zeta: float
    i: float
    X0: float
    Y0: float
    Xend: float
    Yend: float
    l: float
    r: float
    a: float
    d: float

    @property
    def degenerate(self) -> bool:
        return self.zeta == 0.0


def sabr_geometry(beta: float, nu: float, rho: float, f0: float, sigma0: float, K: float) -> SabrGeometry:
    if not (f0 > 0 and K > 0 and sigma0 > 0 and nu > 0):
        raise InvalidParameter("need f0, K, sigma0, nu > 0")
    spec = IsometrySpec(1.0, beta, nu, rho)
    root = spec.root
    Y0 = sigma0 / nu
    zeta = float(spec.integral(f0) - spec.integral(K)) / Y0
    i = math.sqrt(zeta * zeta - 2 * rho * zeta + 1.0)
    X0 = (float(spec.integral(f0)) - rho * Y0) / root
    Yend = Y0 * i
    Xend = (float(spec.integral(K)) - rho * Yend) / root
    d = abs(math.log((i + zeta - rho) / (1.0 - rho)))
    if zeta == 0.0 or Xend == X0:
        return SabrGeometry(zeta, i, X0, Y0, Xend, Yend, math.nan, math.inf, math.nan, d)
    l = ((Xend**2 + Yend**2) - (X0**2 + Y0**2)) / (2 * (Xend - X0))
    r = math.hypot(X0 - l, Y0)
    return SabrGeometry(zeta, i, X0, Y0, Xend, Yend, l, r, root * l / r, d)


def printed_G(a: float, rho: float, x):
    """Closed-form primitive in x of (1 - x^2) / (a + sqrt(1 - rho^2) x + rho sqrt(1 - x^2)), for a > 1."""
    if not a > 1.0:
        raise InvalidGeometry("printed primitive needs a > 1")
    x = np.asarray(x, float)
    if np.any(np.abs(x) > 1.0):
        raise InvalidGeometry("|x| must be <= 1")
    r = math.sqrt(1 - rho * rho)
    s = math.sqrt(a * a - 1)
    w = np.sqrt(1 - x * x)
    acos = np.arccos(x)
    at = np.arctan((rho + (a - r) * np.sqrt((1 - x) / (1 + x))) / s)
    inner = (r + 4 * a * x - 8 * a * rho**2 * x - 2 * r * x * x + 4 * (1 - 4 * a * a) * rho**3 * acos
             + 2 * rho * ((-4 * a * r + x) * w + (-3 + 6 * a * a) * acos)
             + 4 * r * (1 - rho**2 + a * a * (-1 + 4 * rho**2)) * np.log(a + r * x + rho * w))
    return -(-8 * a * rho * (3 - 3 * rho**2 + a * a * (-3 + 4 * rho**2)) * at - s * inner) / (4 * s)


def g_integrand(a: float, rho: float, x):
    r = math.sqrt(1 - rho * rho)
    return (1 - x * x) / (a + r * x + rho * np.sqrt(1 - x * x))


def _half_disk_integral(a: float, rho: float, q0: float, q1: float) -> float:
    val, _ = integrate.quad(lambda q: g_integrand(a, rho, q), q0, q1, epsabs=1e-14, epsrel=1e-12, limit=200)
    return float(val)


def _J(a: float, chi):
    """int dchi / (a + cos chi), continuous on the arcs used here."""
    h = 0.5 * np.asarray(chi, float)
    if abs(a - 1.0) < 1e-12:
        return np.tan(h)
    if a > 1.0:
        return 2.0 / math.sqrt(a * a - 1) * np.arctan2(math.sqrt(a - 1) * np.sin(h), math.sqrt(a + 1) * np.cos(h))
    if a > -1.0:
        p, m = math.sqrt(1 + a) * np.cos(h), math.sqrt(1 - a) * np.sin(h)
        return np.log(np.abs((p + m) / (p - m))) / math.sqrt(1 - a * a)
    raise InvalidGeometry("a <= -1: the arc leaves the image of the map")


def _inverse_u_integral(geo: SabrGeometry, rho: float) -> float:
    """int dX / (sqrt(1 - rho^2) X + rho Y) along the circle arc, in closed form."""
    psi = math.asin(rho)
    phi0 = math.atan2(geo.Y0, geo.X0 - geo.l)
    phi1 = math.atan2(geo.Yend, geo.Xend - geo.l)
    chi = np.linspace(phi0 - psi, phi1 - psi, 65)
    if np.min(geo.a + np.cos(chi)) <= 0.0:
        raise SingularField("the geodesic arc crosses F = 0")

    def prim(ch):
        return math.cos(psi) * math.log(geo.a + math.cos(ch)) - math.sin(psi) * (ch - geo.a * float(_J(geo.a, ch)))

    return prim(phi1 - psi) - prim(phi0 - psi)


def sabr_work_closed_form(geo: SabrGeometry, lam: float, mu: float, beta: float, rho: float,
                          convention: str = "metric") -> tuple[float, float]:
    """(W0, WRevert): the CEV part and the mean-reversion part of the work at delta = 1."""
    if convention not in CONVENTIONS:
        raise InvalidArgument(f"convention must be one of {CONVENTIONS}")
    if geo.degenerate:
        return 0.0, 0.0
    root = math.sqrt(1 - rho * rho)
    if convention == "printed":
        q0, q1 = (geo.X0 - geo.l) / geo.r, (geo.Xend - geo.l) / geo.r
        if beta == 0.0:
            w0 = 0.0
        else:
            quad = _half_disk_integral(geo.a, rho, q0, q1)
            try:
                closed = float(printed_G(geo.a, rho, q1) - printed_G(geo.a, rho, q0))
                if not abs(closed - quad) <= 1e-8 * max(1.0, abs(quad)):
                    closed = quad
            except InvalidGeometry:
                closed = quad
            w0 = -beta / (2 * (1 - beta) * root) * geo.r**2 * closed

        def fq(q):
            return 0.5 * (q * math.sqrt(1 - q * q) + math.asin(q))

        rev = (-rho * lam / root * geo.r**2 * (fq(q1) - fq(q0)) + rho * lam * mu / root * (geo.Xend - geo.X0)
               + 0.5 * lam * (geo.Yend**2 - geo.Y0**2) - lam * mu * (geo.Yend - geo.Y0))
        return float(w0), float(rev)
    w0 = 0.0 if beta == 0.0 else -beta / (2 * (1 - beta) * root) * _inverse_u_integral(geo, rho)
    if lam == 0.0:
        return float(w0), 0.0
    phi0 = math.atan2(geo.Y0, geo.X0 - geo.l)
    phi1 = math.atan2(geo.Yend, geo.Xend - geo.l)

    def horiz(ph):
        return -(mu / geo.r) * math.log(math.tan(0.5 * ph)) + ph

    rev = (-rho * lam / root * (horiz(phi1) - horiz(phi0))
           + lam * (mu * (1 / geo.Y0 - 1 / geo.Yend) - math.log(geo.Yend / geo.Y0)))
    return float(w0), float(rev)


# --- first-order coefficient and the kernel ------------------------------------------------


def k1_origin(delta: float, y0: float, sample: DriftFieldSample, variant: str = "corrected") -> float:
    """First-order heat-kernel coefficient at coincident points.

    ``"corrected"``: K/6 - (div_g f + |f|_g^2) / 2 written in coordinates,
        -delta y^(2 delta - 2) / 6 - div f / 2 + delta f_y / y - |f|^2 / (2 y^(2 delta)).
    ``"printed"``: -delta y^(2 delta - 2) / 6 + div f / 2 - f_y / y + 3 |f|^2 / (2 y^(2 delta)).
    Both reduce to the Gauss curvature over 6 when f = 0.
    """
    if not y0 > 0:
        raise InvalidPoint("y0 must be > 0")
    curv = -delta * y0 ** (2 * delta - 2) / 6.0
    f2 = (sample.fx**2 + sample.fy**2) / y0 ** (2 * delta)
    if variant == "corrected":
        return curv - 0.5 * sample.div + delta * sample.fy / y0 - 0.5 * f2
    if variant == "printed":
        return curv + 0.5 * sample.div - sample.fy / y0 + 1.5 * f2
    raise InvalidArgument(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class KernelTerms:
    d: float
    W: float
    Zd: float
    K1_0: float
    s: float


def kernel_terms(field: DriftField, a, b, s: float, k1_variant: str = "corrected") -> KernelTerms:
    spec = field.spec
    a, b = _coords(a), _coords(b)
    chord = geodesic_chord(spec.delta, a, b)
    k1 = k1_origin(spec.delta, a[1], field.sample(a), k1_variant)
    if chord.d < 1e-6:
        return KernelTerms(chord.d, 0.0 if chord.d == 0 else work_between(field, a, b), chord.d or 1.0, k1, s)
    z, _ = jacobi_along(spec.delta, a, chord.start_velocity, chord.d)
    return KernelTerms(chord.d, work_between(field, a, b), z, k1, s)


def heat_kernel_density(field: DriftField, a, b, s: float, order: int = 0, k1_variant: str = "corrected") -> float:
    """Density of the delta-space diffusion with respect to the Riemannian volume, at time s (delta-space time)."""
    if not s > 0:
        raise InvalidArgument("s must be > 0")
    if order not in (0, 1):
        raise InvalidArgument("order must be 0 or 1")
    t = kernel_terms(field, a, b, s, k1_variant)
    ratio = 1.0 if t.d < 1e-6 else math.sqrt(t.d / t.Zd)
    return math.exp(-t.d**2 / (2 * s) + t.W) * ratio * (1 + order * t.K1_0 * s) / (2 * math.pi * s)
