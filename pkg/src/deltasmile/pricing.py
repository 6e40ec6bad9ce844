"""Digital densities, local and implied volatilities from the short-time kernel.

The density of F at a strike K integrates the delta-space kernel along the image
of the vertical line x = K, which is a straight line D of inclination theta1
(cos theta1 = -rho, sin theta1 = sqrt(1 - rho^2)).  A Laplace expansion around
the foot of the perpendicular from the spot gives P; weighting by sigma^(2 delta)
instead gives the conditional moment M, and sigma_K^2 = c(K)^2 M / P.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .errors import (
    DeltaSmileError,
    InvalidArgument,
    InvalidParameter,
    NotAMinimum,
)
from .geometry import (
    GeodesicState,
    PhaseDerivatives,
    distance_point_to_line,
    geodesic_integrate,
    jacobi_along,
    phase_derivatives_atm,
    second_variation,
    sind,
)
from .kernel import (
    DriftField,
    IsometrySpec,
    SabrGeometry,
    k1_origin,
    phi_forward,
    sabr_geometry,
    sabr_work_closed_form,
    work_along_geodesic,
)
from .model import ModelParams, reduce

__all__ = [
    "SabrGeometry",
    "sabr_geometry",
    "StrikeLine",
    "SmilePoint",
    "laplace_expand",
    "laplace_coefficient",
    "strike_line",
    "digital_density_P",
    "conditional_moment_M",
    "sabr_closed_form_P",
    "local_vol",
    "f_av",
    "implied_vol",
    "smile_curve",
    "strike_solution",
]

_ATM_DISTANCE = 1e-9


@dataclass(frozen=True)
class PricingOptions:
    """Switches between corrected and literal variants of the expansion ingredients."""

    convention: str = "metric"  # drift transport and work pairing, see kernel
    k1_variant: str = "corrected"
    quartic: str = "exact"  # phase_derivatives_atm quartic mode
    mapping: str = "midpoint"  # local-to-implied mapping: midpoint | printed | harmonic
    printed_f_av: bool = False
    # order-1 Black vol: "average" uses the mean of order-0 and order-1 local variance over [0, tau],
    # "terminal" maps the order-1 local volatility at tau directly
    order1_smile: str = "average"


DEFAULT_OPTIONS = PricingOptions()


# --- Laplace method -------------------------------------------------------------------


def laplace_coefficient(pd: PhaseDerivatives, g_term: float = 0.0) -> float:
    """Bracketed s-coefficient of the second-order Laplace expansion of int exp(-phi/s) f du."""
    d2, d3, d4 = pd.d2, pd.d3, pd.d4
    if not d2 > 0:
        raise NotAMinimum(f"phi'' = {d2} is not positive")
    return (g_term + pd.f2 / (2 * d2) - d4 * pd.f0 / (8 * d2**2) - pd.f1 * d3 / (2 * d2**2)
            + 5 * d3**2 * pd.f0 / (24 * d2**3))


def laplace_expand(pd: PhaseDerivatives, s: float, g_term: float = 0.0, order: int = 1) -> float:
    """sqrt(2 pi s / phi'') (f + s (g + f''/(2 phi'') - phi'''' f/(8 phi''^2) - f' phi'''/(2 phi''^2) + 5 phi'''^2 f/(24 phi''^3)))."""
    if not s > 0:
        raise InvalidArgument("s must be > 0")
    if not pd.d2 > 0:
        raise NotAMinimum(f"phi'' = {pd.d2} is not positive")
    return math.sqrt(2 * math.pi * s / pd.d2) * (pd.f0 + order * s * laplace_coefficient(pd, g_term))


# --- strike geometry --------------------------------------------------------------------


@dataclass(frozen=True)
class StrikeLine:
    theta1: float
    anchor: float

    def point(self, u: float) -> tuple[float, float]:
        return self.anchor + u * math.cos(self.theta1) / math.sin(self.theta1), u


def strike_line(spec: IsometrySpec, K: float) -> StrikeLine:
    theta1 = math.atan2(spec.root, -spec.rho)
    return StrikeLine(theta1, spec.scale * float(spec.integral(K)) / spec.root)


@dataclass(frozen=True)
class StrikeSolution:
    """Everything the Laplace expansion needs at one strike."""

    d: float
    W: float
    Zd: float
    phi2: float
    Y_min: float
    theta1: float
    theta2: float
    s_h: float
    amplitude: float  # exp(W) sqrt(d / Z) Y_min^(-2 delta)
    conversion: float  # delta-space line integral -> density in F
    moment_factor: float  # sigma^(2 delta) = moment_factor * Y^(2 delta)
    K1_0: float
    c1_P: float
    c1_M: float
    i_delta: float


def _atm_coefficients(field: DriftField, Z0, theta1: float, quartic: str, k1_variant: str):
    """First-order coefficients (c1_P, c1_M, K1_0) of the expansion evaluated at the money."""
    d = field.spec.delta
    u = Z0.y
    pd = phase_derivatives_atm(d, u, theta1, quartic)
    sample = field.sample(Z0)
    k1 = k1_origin(d, u, sample, k1_variant)
    e = np.array([math.cos(theta1) / math.sin(theta1), 1.0])
    f = np.array([sample.fx, sample.fy])
    jf = np.array(sample.jac)
    if field.convention == "printed":
        omega, jomega = f, jf
    else:
        w = u ** (-2 * d)
        omega = f * w
        jomega = jf * w
        jomega[:, 1] -= 2 * d * f * w / u
    w1 = float(omega @ e)
    w2 = float(e @ jomega @ e)
    curv = d * u ** (2 * d - 2) * pd.d2 / 6
    a1p = w1 - 2 * d / u
    a2p = a1p**2 + w2 + 2 * d / u**2 - curv
    a1m = w1
    a2m = w1**2 + w2 - curv
    cp = laplace_coefficient(PhaseDerivatives(pd.d2, pd.d3, pd.d4, 1.0, a1p, a2p), k1)
    cm = laplace_coefficient(PhaseDerivatives(pd.d2, pd.d3, pd.d4, 1.0, a1m, a2m), k1)
    return cp, cm, k1


def strike_solution(params: ModelParams, tau: float, f0: float, sigma0: float, K: float,
                    options: PricingOptions = DEFAULT_OPTIONS) -> StrikeSolution:
    if not (tau > 0 and f0 > 0 and sigma0 > 0 and K > 0):
        raise InvalidParameter("need tau, f0, sigma0, K > 0")
    red = reduce(params, tau, sigma0)
    spec = IsometrySpec.from_params(params)
    d = spec.delta
    s_h = spec.time_factor * red.s
    fld = DriftField(spec, red.lam, red.mu, options.convention)
    Z0 = phi_forward(spec, (f0, red.y0))
    line = strike_line(spec, K)
    foot = distance_point_to_line(d, Z0, line.theta1, line.anchor)
    S = math.sin(line.theta1) ** 2
    c1p, c1m, k1 = _atm_coefficients(fld, Z0, line.theta1, options.quartic, options.k1_variant)
    Y_min = foot.foot.y
    if foot.d < _ATM_DISTANCE:
        W, Zd, phi2 = 0.0, foot.d, 1.0 / (S * Y_min ** (2 * d))
        amp = Y_min ** (-2 * d)
    else:
        Zd, Zdot = jacobi_along(d, (Z0.x, Z0.y), foot.start_velocity, foot.d)
        path = geodesic_integrate(GeodesicState(Z0, *foot.start_velocity), foot.d, d)
        W = 0.0 if fld.vanishes else work_along_geodesic(fld, path)
        phi2 = foot.d * second_variation(d, Y_min, line.theta1, foot.d, Zd, Zdot, foot.side)
        amp = math.exp(W) * math.sqrt(foot.d / Zd) * Y_min ** (-2 * d)
    if not phi2 > 0:
        raise NotAMinimum(f"phi'' = {phi2} at K = {K}")
    conversion = spec.scale / (spec.root * float(spec.c(K)))
    moment = params.nu ** (2 * d * d)
    return StrikeSolution(foot.d, W, Zd, phi2, Y_min, line.theta1, foot.theta2, s_h, amp, conversion, moment,
                          k1, c1p, c1m, Y_min / Z0.y)


def _line_integral(sol: StrikeSolution, amplitude: float, coeff: float, order: int) -> float:
    s = sol.s_h
    lap = math.sqrt(2 * math.pi * s / sol.phi2) * amplitude * (1 + order * s * coeff)
    return math.exp(-sol.d**2 / (2 * s)) * lap / (2 * math.pi * s)


def digital_density_P(params: ModelParams, tau: float, f0: float, sigma0: float, K: float, order: int = 0,
                      options: PricingOptions = DEFAULT_OPTIONS) -> float:
    """Density of F_tau at K (volatility integrated out), to order 0 or 1 in time."""
    if order not in (0, 1):
        raise InvalidArgument("order must be 0 or 1")
    sol = strike_solution(params, tau, f0, sigma0, K, options)
    return sol.conversion * _line_integral(sol, sol.amplitude, sol.c1_P, order)


def conditional_moment_M(params: ModelParams, tau: float, f0: float, sigma0: float, K: float, order: int = 0,
                         options: PricingOptions = DEFAULT_OPTIONS) -> float:
    """E[sigma_tau^(2 delta) ; F_tau in dK] / dK, i.e. Sigma_min^(2 delta) P at leading order."""
    if order not in (0, 1):
        raise InvalidArgument("order must be 0 or 1")
    sol = strike_solution(params, tau, f0, sigma0, K, options)
    amp = sol.amplitude * sol.Y_min ** (2 * params.delta)
    return sol.moment_factor * sol.conversion * _line_integral(sol, amp, sol.c1_M, order)


def sabr_closed_form_P(params: ModelParams, tau: float, f0: float, sigma0: float, K: float, order: int = 0,
                       convention: str = "metric") -> float:
    """delta = 1 density in closed form:

        P = exp(-d^2 / (2 nu^2 tau) + W0 + WRevert) / (K^beta sigma0 i^(3/2) sqrt(2 pi tau)) (1 + (4 - 5 rho^2) nu^2 tau / 24)

    with the first-order factor applied when ``order=1``.
    """
    if params.delta != 1.0:
        raise InvalidParameter("the closed form needs delta = 1")
    if params.beta >= 1.0:
        raise InvalidParameter("the closed form needs beta < 1")
    if order not in (0, 1):
        raise InvalidArgument("order must be 0 or 1")
    red = reduce(params, tau, sigma0)
    geo = sabr_geometry(params.beta, params.nu, params.rho, f0, sigma0, K)
    w0, wr = sabr_work_closed_form(geo, red.lam, red.mu, params.beta, params.rho, convention)
    pref = 1.0 / (K**params.beta * sigma0 * geo.i**1.5 * math.sqrt(2 * math.pi * tau))
    first = 1.0 + order * (4 - 5 * params.rho**2) / 24 * params.nu**2 * tau
    return pref * math.exp(-geo.d**2 / (2 * red.s) + w0 + wr) * first


# --- local and implied volatility ------------------------------------------------------------


def _source_angles(params: ModelParams, f0: float, sigma0: float, K: float) -> tuple[float, float]:
    """(theta1, theta2): strike-line inclination and the direction from its foot on y = 0 to the spot."""
    spec = IsometrySpec.from_params(params)
    root = spec.root
    zeta = params.nu / sigma0 * float(spec.integral(f0) - spec.integral(K))
    return math.atan2(root, -params.rho), math.atan2(root, zeta - params.rho)


def local_vol(params: ModelParams, tau: float, f0: float, sigma0: float, K: float, order: int = 0,
              options: PricingOptions = DEFAULT_OPTIONS) -> float:
    """sigma_K = (sigma0 i_delta)^delta c(K) at leading order; order 1 uses c(K) sqrt(M / P) with both to order 1."""
    if not (f0 > 0 and sigma0 > 0 and K > 0):
        raise InvalidParameter("need f0, sigma0, K > 0")
    cK = K**params.beta
    if params.nu == 0.0:
        return sigma0**params.delta * cK
    if order == 0:
        t1, t2 = _source_angles(params, f0, sigma0, K)
        return (sigma0 * sind(params.delta, t1, t2)) ** params.delta * cK
    if order != 1:
        raise InvalidArgument("order must be 0 or 1")
    sol = strike_solution(params, tau, f0, sigma0, K, options)
    s = sol.s_h
    ratio = sol.moment_factor * sol.Y_min ** (2 * params.delta) * (1 + s * sol.c1_M) / (1 + s * sol.c1_P)
    if not ratio > 0:
        raise NotAMinimum("first-order correction made M / P non-positive")
    return cK * math.sqrt(ratio)


def f_av(K: float, f0: float, printed: bool = False) -> float:
    """Averaging level sqrt((K^2 - f0^2) / (2 ln(K / f0))); the printed variant omits the 2."""
    if not (K > 0 and f0 > 0):
        raise InvalidParameter("need K, f0 > 0")
    factor = 1.0 if printed else 2.0
    if K == f0:
        return f0 * math.sqrt(2.0 / factor)
    lr = math.log(K / f0)
    if abs(lr) < 1e-6:
        # (K^2 - f0^2) / (2 lr) = f0^2 (e^(2 lr) - 1) / (2 lr), expanded
        ratio = 1 + lr + 2 * lr * lr / 3
        return f0 * math.sqrt(ratio * 2.0 / factor)
    return math.sqrt((K * K - f0 * f0) / (factor * lr))


def _hagan_bracket(beta: float, K: float, f0: float, fav: float) -> float:
    return 1 + (1 - beta) * (2 + beta) / 24 * ((K - f0) / fav) ** 2


def implied_vol(params: ModelParams, tau: float, f0: float, sigma0: float, K: float, order: int = 0,
                options: PricingOptions = DEFAULT_OPTIONS) -> float:
    """Black volatility from the local volatility through Hagan's equivalent-volatility box.

    ``mapping="midpoint"``: a = sigma_loc(f_av) / c(f_av), sigma_B = a c(f_av)/f_av (1 + bracket);
    ``"printed"``: local volatility at K, sigma_B = sigma_K / f_av (1 + bracket);
    ``"harmonic"``: sigma_B = ln(f0 / K) / int_K^f0 du / sigma_loc(u), no bracket.

    At order 1 the local variance grows linearly over [0, tau]; ``order1_smile="average"``
    uses its time mean, which tracks Monte Carlo when mean reversion moves the volatility.
    """
    if order == 1 and options.order1_smile == "average":
        v0 = implied_vol(params, tau, f0, sigma0, K, 0, options)
        v1 = implied_vol(params, tau, f0, sigma0, K, 1, replace(options, order1_smile="terminal"))
        return math.sqrt(0.5 * (v0 * v0 + v1 * v1))
    if options.order1_smile not in ("average", "terminal"):
        raise InvalidArgument(f"unknown order1_smile {options.order1_smile!r}")
    fav = f_av(K, f0, options.printed_f_av)
    b = params.beta
    if options.mapping == "printed":
        return local_vol(params, tau, f0, sigma0, K, order, options) / fav * _hagan_bracket(b, K, f0, fav)
    if options.mapping == "midpoint":
        return local_vol(params, tau, f0, sigma0, fav, order, options) / fav * _hagan_bracket(b, K, f0, fav)
    if options.mapping == "harmonic":
        if K == f0:
            return local_vol(params, tau, f0, sigma0, K, order, options) / f0
        lo, hi = sorted((K, f0))
        val, _ = integrate.quad(lambda u: 1.0 / local_vol(params, tau, f0, sigma0, u, order, options), lo, hi,
                                epsabs=0.0, epsrel=1e-10, limit=100)
        return math.log(hi / lo) / val
    raise InvalidArgument(f"unknown mapping {options.mapping!r}")


@dataclass(frozen=True)
class SmilePoint:
    K: float
    sigma_local: float
    sigma_implied: float
    f_av: float
    order: int
    error: str | None = field(default=None, compare=False)


def smile_curve(params: ModelParams, tau: float, f0: float, sigma0: float, strikes, order: int = 0,
                options: PricingOptions = DEFAULT_OPTIONS) -> list[SmilePoint]:
    strikes = [float(k) for k in strikes]
    if not strikes:
        raise InvalidArgument("empty strike list")
    if any(k <= 0 for k in strikes) or any(b < a for a, b in zip(strikes, strikes[1:])):
        raise InvalidArgument("strikes must be positive and sorted")
    out: list[SmilePoint] = []
    for K in strikes:
        fav = f_av(K, f0, options.printed_f_av)
        try:
            sk = local_vol(params, tau, f0, sigma0, K, order, options)
            sb = implied_vol(params, tau, f0, sigma0, K, order, options)
            out.append(SmilePoint(K, sk, sb, fav, order))
        except DeltaSmileError as exc:
            out.append(SmilePoint(K, math.nan, math.nan, fav, order, f"{type(exc).__name__}: {exc}"))
    return out
