"""Pricing kernels for European vanilla options.

Three routes to the same number: the Black-Scholes closed form (reference),
Monte Carlo on terminal draws (naive and threshold-screened variants that
consume the identical random stream), and a Cox-Ross-Rubinstein binomial
lattice. Randomness comes from a 32-bit Mersenne Twister word stream pushed
through the trigonometric Box-Muller transform, so a seed pins the full
sequence of draws.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OptionKind",
    "OptionContract",
    "McParams",
    "BtParams",
    "NormalStream",
    "ScreenedMcResult",
    "KernelSpec",
    "bs_price",
    "mc_price",
    "mc_threshold",
    "mc_price_screened",
    "bt_price",
]

_TWO32 = 4294967296.0  # 2**32
_CHUNK = 1 << 20  # draws per Monte Carlo block; fixed so summation order is reproducible


class OptionKind(enum.Enum):
    CALL = "call"
    PUT = "put"

    @classmethod
    def parse(cls, text: str) -> "OptionKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"option kind must be 'call' or 'put', got {text!r}") from None


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class OptionContract:
    """One European vanilla contract. Rates may be zero or negative."""

    spot: float
    strike: float
    expiry: float  # years
    rate: float  # per year, continuous compounding
    volatility: float  # per sqrt-year
    kind: OptionKind

    def __post_init__(self):
        for name in ("spot", "strike", "expiry", "rate", "volatility"):
            _require_finite(name, getattr(self, name))
        if self.spot <= 0:
            raise ValueError(f"spot must be > 0, got {self.spot}")
        if self.strike <= 0:
            raise ValueError(f"strike must be > 0, got {self.strike}")
        if self.expiry <= 0:
            raise ValueError(f"expiry must be > 0, got {self.expiry}")
        if self.volatility < 0:
            raise ValueError(f"volatility must be >= 0, got {self.volatility}")

    @property
    def is_call(self) -> bool:
        return self.kind is OptionKind.CALL


@dataclass(frozen=True)
class McParams:
    """Monte Carlo controls: draw count and the 32-bit generator seed."""

    iterations: int
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not 0 <= self.seed < 2**32:
            raise ValueError(f"seed must be a 32-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class BtParams:
    """Binomial tree controls: the lattice has levels+1 price rows."""

    levels: int

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")


class NormalStream:
    """Deterministic stream of i.i.d. standard-normal draws.

    The word source is the canonical 32-bit MT19937 generator (numpy's legacy
    ``RandomState`` with a scalar seed reproduces the reference sequence
    bit-for-bit; the unit tests pin this against published outputs). Words map
    to uniforms on (0, 1] via (word + 1) / 2**32 so log(u) stays finite, and
    each uniform pair feeds the trigonometric Box-Muller transform. The second
    normal of a pair is buffered, so the sequence does not depend on how draws
    are chunked.

    A stream is single-owner mutable state: do not share one instance between
    concurrent callers.
    """

    def __init__(self, seed: int = 0):
        if not 0 <= seed < 2**32:
            raise ValueError(f"seed must be a 32-bit unsigned integer, got {seed}")
        self.seed = seed
        self._words = np.random.RandomState(seed)
        self._pending: float | None = None

    def raw_words(self, n: int) -> np.ndarray:
        """Next n raw 32-bit generator outputs (uint32)."""
        return self._words.randint(0, 2**32, size=n, dtype=np.uint32)

    def uniforms(self, n: int) -> np.ndarray:
        """Next n uniforms on (0, 1]."""
        return (self.raw_words(n).astype(np.float64) + 1.0) / _TWO32

    def normals(self, n: int) -> np.ndarray:
        """Next n standard-normal draws as float64."""
        if n < 0:
            raise ValueError("n must be >= 0")
        out = np.empty(n)
        filled = 0
        if self._pending is not None and n > 0:
            out[0] = self._pending
            self._pending = None
            filled = 1
        remaining = n - filled
        if remaining <= 0:
            return out
        pairs = (remaining + 1) // 2
        u = self.uniforms(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(theta)
        z[1::2] = radius * np.sin(theta)
        out[filled:] = z[:remaining]
        if remaining < 2 * pairs:
            self._pending = float(z[remaining])
        return out

    def normal(self) -> float:
        return float(self.normals(1)[0])


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def bs_price(contract: OptionContract) -> float:
    """Black-Scholes closed-form price for a European vanilla contract.

    The zero-volatility limit degenerates to the discounted deterministic
    payoff max(0, +/-(S*exp(rT) - P)) * exp(-rT).
    """
    s, p = contract.spot, contract.strike
    t, r, sigma = contract.expiry, contract.rate, contract.volatility
    disc = math.exp(-r * t)
    if sigma == 0.0:
        forward = s * math.exp(r * t)
        intrinsic = forward - p if contract.is_call else p - forward
        return disc * max(0.0, intrinsic)
    vol_sqrt_t = sigma * math.sqrt(t)
    d1 = (math.log(s / p) + (r + 0.5 * sigma * sigma) * t) / vol_sqrt_t
    d2 = d1 - vol_sqrt_t
    if contract.is_call:
        return s * _norm_cdf(d1) - p * disc * _norm_cdf(d2)
    return p * disc * _norm_cdf(-d2) - s * _norm_cdf(-d1)


def mc_threshold(contract: OptionContract) -> float:
    """Standard-normal cutoff above (call) / below (put) which a draw pays.

    Thres = [ln(P/S) - (r - sigma^2/2) T] / (sigma sqrt(T)); the payoff of a
    call is positive exactly for draws x > Thres, of a put for x < Thres.
    """
    sigma, t = contract.volatility, contract.expiry
    vol_sqrt_t = sigma * math.sqrt(t)
    if vol_sqrt_t == 0.0:
        raise ValueError("threshold undefined for sigma*sqrt(T) == 0")
    drift = (contract.rate - 0.5 * sigma * sigma) * t
    return (math.log(contract.strike / contract.spot) - drift) / vol_sqrt_t


def mc_price(contract: OptionContract, params: McParams, dtype=np.float64) -> float:
    """Monte Carlo price from terminal draws S_T = S exp((r - sigma^2/2)T + sigma sqrt(T) x).

    Discounted mean of max(0, S_T - P) for calls, max(0, P - S_T) for puts.
    Fixed-size blocks keep the summation order, and therefore the result,
    bit-identical for a given (contract, params). ``dtype`` selects the payoff
    arithmetic precision; double is the reference default.
    """
    s, p = contract.spot, contract.strike
    t, r, sigma = contract.expiry, contract.rate, contract.volatility
    drift = dtype((r - 0.5 * sigma * sigma) * t)
    vol_sqrt_t = dtype(sigma * math.sqrt(t))
    stream = NormalStream(params.seed)
    total = 0.0
    done = 0
    while done < params.iterations:
        n = min(_CHUNK, params.iterations - done)
        x = stream.normals(n).astype(dtype, copy=False)
        terminal = dtype(s) * np.exp(drift + vol_sqrt_t * x)
        payoff = terminal - dtype(p) if contract.is_call else dtype(p) - terminal
        np.maximum(payoff, dtype(0.0), out=payoff)
        total += float(payoff.sum())
        done += n
    return math.exp(-r * t) * total / params.iterations


@dataclass(frozen=True)
class ScreenedMcResult:
    """Price from the screened Monte Carlo sum plus the screening statistics."""

    price: float
    passed: int  # draws with a strictly positive payoff (M)
    iterations: int  # total draws (N)

    @property
    def pass_fraction(self) -> float:
        return self.passed / self.iterations


def mc_price_screened(
    contract: OptionContract, params: McParams, dtype=np.float64
) -> ScreenedMcResult:
    """Threshold-screened Monte Carlo on the same stream as :func:`mc_price`.

    Draws are screened against :func:`mc_threshold`; only the M passing draws
    enter the sum of exp(sigma sqrt(T) x_j), and the discounted price is
    recovered as exp(-rT)/N * [S exp((r - sigma^2/2)T) * sum_j - M*P] for
    calls (sign-mirrored for puts). The screening is exact: up to the
    floating-point reassociation of the factored sum, the result equals the
    naive estimator on the identical seed.
    """
    thres = mc_threshold(contract)
    s, p = contract.spot, contract.strike
    t, r, sigma = contract.expiry, contract.rate, contract.volatility
    drift = (r - 0.5 * sigma * sigma) * t
    vol_sqrt_t = dtype(sigma * math.sqrt(t))
    stream = NormalStream(params.seed)
    exp_sum = 0.0
    passed = 0
    done = 0
    while done < params.iterations:
        n = min(_CHUNK, params.iterations - done)
        x = stream.normals(n).astype(dtype, copy=False)
        kept = x[x > thres] if contract.is_call else x[x < thres]
        exp_sum += float(np.exp(vol_sqrt_t * kept).sum())
        passed += int(kept.size)
        done += n
    growth = s * math.exp(drift)
    gross = growth * exp_sum - passed * p
    if not contract.is_call:
        gross = -gross
    price = math.exp(-r * t) * gross / params.iterations
    return ScreenedMcResult(price=price, passed=passed, iterations=params.iterations)


def bt_price(contract: OptionContract, params: BtParams) -> float:
    """Cox-Ross-Rubinstein lattice price by backward induction.

    Factors u = exp(sigma sqrt(dt)), d = 1/u, p = (exp(r dt) - d)/(u - d);
    slot i of the value row holds the lower-price node, so one backward sweep
    is v_i = a v_i + b v_{i+1} with a, b the discounted down/up weights. The
    sweep ascends over i, reading v_{i+1} before it is overwritten, which the
    vectorised update reproduces exactly.
    """
    s, p = contract.spot, contract.strike
    t, r, sigma = contract.expiry, contract.rate, contract.volatility
    n = params.levels
    dt = t / n
    up = math.exp(sigma * math.sqrt(dt))
    down = 1.0 / up
    if up == down:
        raise ValueError("degenerate lattice: sigma*sqrt(T/N) == 0")
    prob_up = (math.exp(r * dt) - down) / (up - down)
    disc = math.exp(-r * dt)
    a = disc * (1.0 - prob_up)
    b = disc * prob_up
    # terminal prices S * u^i * d^(n-i) = S * u^(2i-n), lowest node first
    exponents = 2.0 * np.arange(n + 1) - n
    terminal = s * np.exp(exponents * (sigma * math.sqrt(dt)))
    values = np.maximum(terminal - p if contract.is_call else p - terminal, 0.0)
    for _ in range(n):
        values = a * values[:-1] + b * values[1:]
    return float(values[0])


@dataclass(frozen=True)
class KernelSpec:
    """A named pricing kernel plus its parameters, buildable into a callable.

    ``name`` is one of ``bs``, ``mc``, ``mc-screened``, ``bt``. The built
    callable takes a fully populated contract and returns its price; Monte
    Carlo kernels reseed per call so a given contract always prices the same.
    """

    name: str
    mc_iterations: int = 500_000
    mc_seed: int = 0
    bt_levels: int = 1000

    KNOWN = ("bs", "mc", "mc-screened", "bt")

    def __post_init__(self):
        if self.name not in self.KNOWN:
            raise ValueError(f"unknown kernel {self.name!r}; expected one of {self.KNOWN}")

    def describe(self) -> str:
        if self.name in ("mc", "mc-screened"):
            return f"{self.name}(iterations={self.mc_iterations},seed={self.mc_seed})"
        if self.name == "bt":
            return f"bt(levels={self.bt_levels})"
        return "bs"

    def build(self):
        if self.name == "bs":
            return bs_price
        if self.name == "mc":
            params = McParams(iterations=self.mc_iterations, seed=self.mc_seed)
            return lambda contract: mc_price(contract, params)
        if self.name == "mc-screened":
            params = McParams(iterations=self.mc_iterations, seed=self.mc_seed)
            return lambda contract: mc_price_screened(contract, params).price
        params = BtParams(levels=self.bt_levels)
        return lambda contract: bt_price(contract, params)
