"""Model parameters, the time/volatility reduction, and the Feller boundary test.

The model is

    dF = sigma^delta c(F) dW,    d sigma = lambda' (mu' - sigma) dt + nu sigma^delta dZ,

with ``c(F) = F^beta`` and ``corr(dW, dZ) = rho``.  Working in rescaled time
``s = nu^2 tau`` and reduced volatility ``y = sigma / nu`` removes ``nu`` from
the diffusion part up to a constant factor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModel, InvalidParameter, NumericalFailure


@dataclass(frozen=True)
class ModelParams:
    delta: float
    beta: float
    nu: float
    rho: float
    lambda_raw: float = 0.0
    mu_raw: float = 0.0

    def __post_init__(self) -> None:
        checks = (
            (0.5 <= self.delta <= 1.0, "delta must lie in [1/2, 1]"),
            (0.0 <= self.beta <= 1.0, "beta must lie in [0, 1]"),
            (abs(self.rho) < 1.0, "|rho| must be < 1"),
            (self.nu >= 0.0, "nu must be >= 0"),
            (self.lambda_raw >= 0.0, "lambda' must be >= 0"),
            (self.mu_raw >= 0.0, "mu' must be >= 0"),
        )
        for ok, msg in checks:
            if not ok or any(math.isnan(v) for v in self._values()):
                raise InvalidParameter(msg)

    def _values(self) -> tuple[float, ...]:
        return (self.delta, self.beta, self.nu, self.rho, self.lambda_raw, self.mu_raw)

    def c(self, x):
        """Local elasticity function c(F) = F^beta."""
        return np.power(x, self.beta)

    def require_non_explosive(self) -> None:
        """Certify 2 lambda' mu' / nu^2 > 1 at delta = 1/2 (strict, as in the Feller test)."""
        verdict = feller_classify(self.delta, self.lambda_raw, self.mu_raw, self.nu)
        if verdict.verdict is Verdict.EXPLOSION_POSSIBLE:
            raise InvalidParameter(f"volatility may explode or vanish: {verdict.rationale}")


@dataclass(frozen=True)
class ReducedParams:
    s: float
    lam: float
    mu: float
    y0: float


def reduce(params: ModelParams, tau: float, sigma0: float) -> ReducedParams:
    if params.nu == 0.0:
        raise DegenerateModel("nu = 0: use the local-volatility degenerate path")
    if tau < 0.0 or sigma0 <= 0.0:
        raise InvalidParameter("need tau >= 0 and sigma0 > 0")
    nu = params.nu
    return ReducedParams(
        s=nu * nu * tau,
        lam=params.lambda_raw / (nu * nu),
        mu=params.mu_raw / nu,
        y0=sigma0 / nu,
    )


def expand(params: ModelParams, reduced: ReducedParams) -> tuple[float, float]:
    """Inverse of :func:`reduce` for the state variables: returns (tau, sigma0)."""
    nu = params.nu
    if nu == 0.0:
        raise DegenerateModel("nu = 0 has no reduced coordinates")
    return reduced.s / (nu * nu), reduced.y0 * nu


class Verdict(enum.Enum):
    NO_EXPLOSION_RECURRENT = "NoExplosionRecurrent"
    NO_EXPLOSION_NON_RECURRENT = "NoExplosionNonRecurrent"
    EXPLOSION_POSSIBLE = "ExplosionPossible"


@dataclass(frozen=True)
class BoundaryClassification:
    verdict: Verdict
    rationale: str


def feller_classify(delta: float, lambda_raw: float, mu_raw: float, nu: float) -> BoundaryClassification:
    """Explosion/recurrence verdict for d sigma = lambda'(mu' - sigma) dt + nu sigma^delta dZ."""
    if not (nu > 0.0) or not (delta > 0.0):
        raise InvalidParameter("feller_classify needs nu > 0 and delta > 0")
    if lambda_raw < 0.0 or mu_raw < 0.0:
        raise InvalidParameter("lambda' and mu' must be >= 0")
    reverting = lambda_raw > 0.0
    if delta < 0.5:
        return BoundaryClassification(Verdict.EXPLOSION_POSSIBLE, "delta<1/2: zero is reached")
    if delta == 0.5:
        ratio = 2.0 * lambda_raw * mu_raw / (nu * nu)
        if ratio > 1.0:
            return BoundaryClassification(Verdict.NO_EXPLOSION_RECURRENT, f"delta=1/2: 2 lambda mu / nu^2 = {ratio:g} > 1")
        return BoundaryClassification(Verdict.EXPLOSION_POSSIBLE, f"delta=1/2: 2 lambda mu / nu^2 = {ratio:g} <= 1")
    if delta < 1.0:
        if reverting:
            return BoundaryClassification(Verdict.NO_EXPLOSION_RECURRENT, "1/2<delta<1 with mean reversion")
        return BoundaryClassification(Verdict.EXPLOSION_POSSIBLE, "1/2<delta<1 without mean reversion: zero is reached")
    if delta == 1.0:
        return BoundaryClassification(Verdict.NO_EXPLOSION_RECURRENT, "delta=1: geometric-type volatility")
    if reverting:
        return BoundaryClassification(Verdict.NO_EXPLOSION_RECURRENT, "delta>1 with mean reversion")
    return BoundaryClassification(Verdict.NO_EXPLOSION_NON_RECURRENT, "delta>1 without mean reversion: p(+inf) < inf")


# --- numeric Feller diagnostic -------------------------------------------------


def _power_integral(q: float, c: float, x: np.ndarray) -> np.ndarray:
    """int_c^x u^q du, vectorised in x."""
    if abs(q + 1.0) < 1e-14:
        return np.log(x / c)
    return (np.power(x, q + 1.0) - c ** (q + 1.0)) / (q + 1.0)


@dataclass(frozen=True)
class FellerGrid:
    center: float = 1.0
    lower: tuple[float, ...] = (1e-2, 1e-4, 1e-8)
    upper: tuple[float, ...] = (1e2, 1e4, 1e8)
    nodes_per_decade: int = 400


class Trend(enum.Enum):
    DIVERGES = "diverges"
    CONVERGES = "converges"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class BoundaryTrend:
    truncations: tuple[float, ...]
    values: tuple[float, ...]
    trend: Trend


@dataclass(frozen=True)
class FellerDiagnostic:
    analytic: BoundaryClassification
    lower: BoundaryTrend
    upper: BoundaryTrend
    numeric_explosion: bool | None
    consistent: bool | None
    notes: list[str] = field(default_factory=list)


def _log_scale(delta: float, lambda_raw: float, mu_raw: float, nu: float, c: float, x: np.ndarray) -> np.ndarray:
    """log p'(x) = -2 int_c^x a / b^2 with a = lambda'(mu' - u), b = nu u^delta."""
    k = 2.0 * lambda_raw / (nu * nu)
    integral = mu_raw * _power_integral(-2.0 * delta, c, x) - _power_integral(1.0 - 2.0 * delta, c, x)
    return -k * integral


def _v_toward(delta, lambda_raw, mu_raw, nu, c, end, nodes_per_decade) -> float:
    """Nested integral v(end) = int_c^end p'(y) int_c^y 2 dz / (p'(z) b(z)^2) dy on a log grid."""
    n = max(int(abs(math.log10(end / c)) * nodes_per_decade), 16) + 1
    t = np.linspace(0.0, math.log(end / c), n)
    x = c * np.exp(t)
    logp = _log_scale(delta, lambda_raw, mu_raw, nu, c, x)
    w = 2.0 / (nu * nu * np.power(x, 2.0 * delta))
    # J(y) = p'(y) int_c^y w/p' dz, advanced with ratios so that p' never overflows on its own.
    J = np.zeros(n)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n):
            dx = x[k] - x[k - 1]
            growth = math.exp(min(logp[k] - logp[k - 1], 700.0))
            J[k] = growth * J[k - 1] + 0.5 * dx * (w[k] + growth * w[k - 1])
        v = float(np.sum(0.5 * (J[1:] + J[:-1]) * np.diff(x)))
    return abs(v) if math.isfinite(v) else math.inf


def _classify_trend(values: tuple[float, ...]) -> Trend:
    v = values
    growing = all(
        (not math.isfinite(b)) or (math.isfinite(a) and b >= 2.0 * a)
        for a, b in zip(v[:-1], v[1:])
    )
    if growing:
        return Trend.DIVERGES
    if all(math.isfinite(a) for a in v) and abs(v[-1] - v[-2]) <= 0.05 * abs(v[-1]):
        return Trend.CONVERGES
    return Trend.INCONCLUSIVE


def feller_numeric_check(
    delta: float, lambda_raw: float, mu_raw: float, nu: float, grid: FellerGrid | None = None
) -> FellerDiagnostic:
    """Advisory nested-quadrature estimate of v(0+) and v(+inf); never overrides feller_classify."""
    grid = grid or FellerGrid()
    analytic = feller_classify(delta, lambda_raw, mu_raw, nu)
    c = grid.center
    if not (all(0.0 < lo < c for lo in grid.lower) and all(hi > c for hi in grid.upper)):
        raise InvalidParameter("grid needs 0 < y_lo < center < y_hi")
    trends = []
    for bounds in (grid.lower, grid.upper):
        vals = []
        for b in bounds:
            v = _v_toward(delta, lambda_raw, mu_raw, nu, c, b, grid.nodes_per_decade)
            if math.isnan(v):
                raise NumericalFailure(f"quadrature failed on [{min(b, c)}, {max(b, c)}]")
            vals.append(v)
        trends.append(BoundaryTrend(tuple(bounds), tuple(vals), _classify_trend(tuple(vals))))
    lower, upper = trends
    notes: list[str] = []
    if Trend.CONVERGES in (lower.trend, upper.trend):
        numeric = True
    elif lower.trend is Trend.DIVERGES and upper.trend is Trend.DIVERGES:
        numeric = False
    else:
        numeric = None
        notes.append("no confident trend at one boundary")
    consistent = None
    if numeric is not None:
        consistent = numeric == (analytic.verdict is Verdict.EXPLOSION_POSSIBLE)
    return FellerDiagnostic(analytic, lower, upper, numeric, consistent, notes)
