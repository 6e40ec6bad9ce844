"""Monte Carlo reference values for the delta-model.

Paths are simulated in fixed-size blocks; block b draws from its own generator
spawned from ``SeedSequence(seed)``, so the output depends only on the seed and
the block size, never on how blocks are scheduled across threads.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .errors import InvalidArgument, NoImpliedVol
from .model import ModelParams


class WideBandWarning(UserWarning):
    """Too few samples inside the kernel window for a reliable density estimate."""


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 200_000
    n_steps: int = 500
    seed: int = 0
    scheme: str = "euler_full_truncation"
    vol_floor: float = 0.0
    antithetic: bool = False
    block_size: int = 8192
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_paths < 1 or self.n_steps < 1 or self.block_size < 1 or self.workers < 1:
            raise InvalidArgument("n_paths, n_steps, block_size and workers must be >= 1")
        if self.vol_floor < 0:
            raise InvalidArgument("vol_floor must be >= 0")
        if self.scheme != "euler_full_truncation":
            raise InvalidArgument(f"unknown scheme {self.scheme!r}")
        if self.antithetic and self.block_size % 2:
            raise InvalidArgument("antithetic sampling needs an even block size")


@dataclass(frozen=True)
class TerminalSample:
    """Terminal forward and volatility, one entry per path."""

    F: np.ndarray
    Sigma: np.ndarray

    def __len__(self) -> int:
        return int(self.F.size)

    def split(self) -> tuple["TerminalSample", "TerminalSample"]:
        h = len(self) // 2
        return TerminalSample(self.F[:h], self.Sigma[:h]), TerminalSample(self.F[h:], self.Sigma[h:])


def _simulate_block(params: ModelParams, tau: float, f0: float, sigma0: float, cfg: SimConfig, n: int,
                    seed_seq: np.random.SeedSequence) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    dt = tau / cfg.n_steps
    sq = math.sqrt(dt)
    d, b, nu, rho = params.delta, params.beta, params.nu, params.rho
    lam, mu = params.lambda_raw, params.mu_raw
    rbar = math.sqrt(1 - rho * rho)
    F = np.full(n, float(f0))
    s = np.full(n, float(sigma0))
    half = n // 2 if cfg.antithetic else n
    for _ in range(cfg.n_steps):
        z = rng.standard_normal((2, half))
        if cfg.antithetic:
            z = np.concatenate([z, -z], axis=1)
        sp = np.maximum(s, cfg.vol_floor)
        sd = sp if d == 1.0 else np.power(sp, d)
        if b == 0.0:
            cF = 1.0
        else:
            Fp = np.maximum(F, 0.0)
            cF = Fp if b == 1.0 else np.power(Fp, b)
        F = F + sd * cF * sq * z[0]
        s = s + lam * (mu - sp) * dt + nu * sd * sq * (rho * z[0] + rbar * z[1])
        if b > 0.0:
            np.maximum(F, 0.0, out=F)  # zero is absorbing once reached since c(0) = 0
    return F, np.maximum(s, 0.0)


def simulate(params: ModelParams, tau: float, f0: float, sigma0: float, cfg: SimConfig = SimConfig()) -> TerminalSample:
    """Full-truncation Euler scheme for dF = sigma^delta c(F) dW, d sigma = lambda'(mu' - sigma) dt + nu sigma^delta dZ."""
    if not (tau > 0 and f0 > 0 and sigma0 > 0):
        raise InvalidArgument("need tau, f0, sigma0 > 0")
    n_blocks = -(-cfg.n_paths // cfg.block_size)
    seqs = np.random.SeedSequence(cfg.seed).spawn(n_blocks)
    sizes = [min(cfg.block_size, cfg.n_paths - i * cfg.block_size) for i in range(n_blocks)]
    if cfg.antithetic:
        sizes = [sz + (sz % 2) for sz in sizes]

    def run(i: int):
        return _simulate_block(params, tau, f0, sigma0, cfg, sizes[i], seqs[i])

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(i) for i in range(n_blocks)]
    F = np.concatenate([p[0] for p in parts])[: cfg.n_paths]
    S = np.concatenate([p[1] for p in parts])[: cfg.n_paths]
    F.setflags(write=False)
    S.setflags(write=False)
    return TerminalSample(F, S)


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, float)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(float(np.std(x, ddof=1)), iqr / 1.34) if iqr > 0 else float(np.std(x, ddof=1))
    return 0.9 * spread * x.size ** (-0.2)


def mc_digital_density(samples: TerminalSample, K: float, bandwidth: float | None = None) -> tuple[float, float]:
    """Gaussian kernel estimate of the density of F at K, with the standard error of the sample mean."""
    F = samples.F
    alive = F[F > 0.0]
    h = silverman_bandwidth(alive) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise InvalidArgument("bandwidth must be > 0")
    u = (K - F) / h
    k = np.exp(-0.5 * u * u) / (h * math.sqrt(2 * math.pi))
    if np.count_nonzero(np.abs(u) < 1.0) < 100:
        warnings.warn(f"fewer than 100 samples within one bandwidth of K={K}", WideBandWarning, stacklevel=2)
    return float(np.mean(k)), float(np.std(k, ddof=1) / math.sqrt(F.size))


# --- Black formula ---------------------------------------------------------------------------


def black_price(f: float, K: float, tau: float, vol: float, call: bool = True) -> float:
    if vol <= 0 or tau <= 0:
        return max(f - K, 0.0) if call else max(K - f, 0.0)
    sd = vol * math.sqrt(tau)
    d1 = math.log(f / K) / sd + 0.5 * sd
    d2 = d1 - sd
    if call:
        return f * stats.norm.cdf(d1) - K * stats.norm.cdf(d2)
    return K * stats.norm.cdf(-d2) - f * stats.norm.cdf(-d1)


def black_vega(f: float, K: float, tau: float, vol: float) -> float:
    sd = vol * math.sqrt(tau)
    d1 = math.log(f / K) / sd + 0.5 * sd
    return f * stats.norm.pdf(d1) * math.sqrt(tau)


def black_implied_vol(price: float, f: float, K: float, tau: float, call: bool = True) -> float:
    intrinsic = max(f - K, 0.0) if call else max(K - f, 0.0)
    upper = f if call else K
    if not (intrinsic < price < upper):
        raise NoImpliedVol(f"price {price} outside ({intrinsic}, {upper})")
    g = lambda v: black_price(f, K, tau, v, call) - price  # noqa: E731
    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e3:
            raise NoImpliedVol("no volatility reproduces the price")
    return optimize.brentq(g, 1e-8, hi, xtol=1e-14, rtol=1e-13)


@dataclass(frozen=True)
class McVol:
    vol: float
    stderr: float
    price: float
    price_stderr: float
    call: bool


def mc_implied_vol(samples: TerminalSample, K: float, tau: float, f0: float, payoff: str = "otm") -> McVol:
    """Black volatility of the Monte Carlo option price at K.

    ``payoff="call"`` prices mean((F - K)^+); ``"otm"`` uses the put below f0,
    which has the same Black volatility by parity but far smaller variance.
    """
    if payoff not in ("call", "otm"):
        raise InvalidArgument("payoff must be 'call' or 'otm'")
    call = payoff == "call" or K >= f0
    pay = np.maximum(samples.F - K, 0.0) if call else np.maximum(K - samples.F, 0.0)
    price = float(np.mean(pay))
    se = float(np.std(pay, ddof=1) / math.sqrt(pay.size))
    vol = black_implied_vol(price, f0, K, tau, call)
    vega = black_vega(f0, K, tau, vol)
    err = se / vega if vega > 1e-12 else math.inf
    return McVol(vol, err, price, se, call)


def hagan_sabr_vol(alpha: float, beta: float, rho: float, nu: float, f: float, K: float, tau: float) -> float:
    """Classic lognormal SABR expansion, including its O(tau) term."""
    if abs(f - K) < 1e-12:
        fb = f ** (1 - beta)
        t = ((1 - beta) ** 2 / 24 * alpha**2 / fb**2 + rho * beta * nu * alpha / (4 * fb) + (2 - 3 * rho**2) / 24 * nu**2)
        return alpha / fb * (1 + t * tau)
    lfk = math.log(f / K)
    fkb = (f * K) ** ((1 - beta) / 2)
    z = nu / alpha * fkb * lfk
    x = math.log((math.sqrt(1 - 2 * rho * z + z * z) + z - rho) / (1 - rho))
    den = fkb * (1 + (1 - beta) ** 2 / 24 * lfk**2 + (1 - beta) ** 4 / 1920 * lfk**4)
    t = ((1 - beta) ** 2 / 24 * alpha**2 / fkb**2 + rho * beta * nu * alpha / (4 * fkb) + (2 - 3 * rho**2) / 24 * nu**2)
    return alpha / den * z / x * (1 + t * tau)
