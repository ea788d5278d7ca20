"""Analytic convergence rates, the ``S(i, k)`` double sum and log-log rate fits.

A rate ``n^p log^q n`` is a :class:`RateSpec`.  Case selection (for example
``zeta == 1``) is decided on the parameters with tolerance ``1e-12``; every
logarithm is natural.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Sequence

import numpy as np
from scipy import special, stats

from .errors import DataError, ParameterError

TOL = 1e-12


def _eq(a: float, b: float) -> bool:
    return abs(a - b) <= TOL


def _format_exponent(x: float) -> str:
    """Integers plain, halves and thirds as fractions, anything else in decimal."""
    if _eq(x, round(x)):
        return str(int(round(x)))
    for den in (2, 3):
        num = x * den
        if _eq(num, round(num)):
            return str(Fraction(int(round(num)), den))
    return f"{x:.10g}"


@dataclass(frozen=True)
class RateSpec:
    """The rate ``n^power * (log n)^log_power``.

    Ordering: ``a > b`` means ``a`` decays more slowly (dominates), compared
    on ``power`` first and on ``log_power`` for equal powers.
    """

    power: float
    log_power: float = 0.0
    ratio_form: bool = field(default=False, compare=False)  # print as (n log^{-1} n)^{power}; needs log_power == -power

    @property
    def _key(self):
        return (round(self.power, 12), round(self.log_power, 12))

    def __lt__(self, other: "RateSpec") -> bool:
        return self._key < other._key

    def __le__(self, other: "RateSpec") -> bool:
        return self._key <= other._key

    def __gt__(self, other: "RateSpec") -> bool:
        return self._key > other._key

    def __ge__(self, other: "RateSpec") -> bool:
        return self._key >= other._key

    def dominates(self, other: "RateSpec") -> bool:
        return self > other

    @property
    def description(self) -> str:
        p, q = self.power, self.log_power
        if self.ratio_form and _eq(q, -p):
            return f"(n log^{{-1}} n)^{{{_format_exponent(p)}}}"
        parts = []
        if not _eq(p, 0.0):
            parts.append(f"n^{{{_format_exponent(p)}}}")
        if _eq(q, 1.0):
            parts.append("log n")
        elif not _eq(q, 0.0):
            parts.append(f"log^{{{_format_exponent(q)}}} n")
        return " ".join(parts) if parts else "1"

    def __str__(self) -> str:
        return self.description

    def evaluate(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return n ** self.power * np.log(n) ** self.log_power


def dominant(a: RateSpec, b: RateSpec) -> RateSpec:
    return a if a >= b else b


# --------------------------------------------------------------------------
# bound models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLaw:
    """``C k^{-exponent}`` for ``k >= 1`` and ``C`` at ``k = 0``."""

    constant: float
    exponent: float

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        safe = np.where(k > 0, k, 1.0)
        return np.where(k > 0, self.constant * safe ** (-self.exponent), self.constant)

    def tail_sum(self, K: int) -> float:
        """``sum_{k > K} C k^{-exponent}`` (infinite when the exponent is <= 1)."""
        if self.constant == 0.0:
            return 0.0
        if self.exponent <= 1.0:
            return math.inf
        return float(self.constant * special.zeta(self.exponent, K + 1))


@dataclass(frozen=True)
class BoundModel:
    """Decay of correlations ``eta``, mixing ``alpha``, AMS exponent and ``delta``."""

    eta: PowerLaw
    alpha: PowerLaw
    zeta: float = 2.0
    delta: float = 0.1

    def __post_init__(self):
        _require(self.eta.exponent > 1.0, "psi must exceed 1")
        _require(self.alpha.exponent > 0.0, "gamma must be positive")
        _require(self.zeta > 0.0, "zeta must be positive")
        _require(self.delta > 0.0, "delta must be positive")

    @classmethod
    def polynomial(cls, psi: float, gamma: float, zeta: float = 2.0, delta: float = 0.1,
                   c_eta: float = 1.0, c_alpha: float = 1.0) -> "BoundModel":
        return cls(PowerLaw(c_eta, psi), PowerLaw(c_alpha, gamma), zeta, delta)

    @property
    def psi(self) -> float:
        return self.eta.exponent

    @property
    def gamma(self) -> float:
        return self.alpha.exponent


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ParameterError(message)


# --------------------------------------------------------------------------
# rate tables
# --------------------------------------------------------------------------

def h_zeta(zeta: float, n: float) -> float:
    _require(zeta > 0, "zeta must be positive")
    _require(n >= 2, "h_zeta needs n >= 2")
    if _eq(zeta, 1.0):
        return math.log(n) / n
    if zeta > 1.0:
        return 1.0 / n
    return n ** (-zeta)


def h_zeta_rate(zeta: float) -> RateSpec:
    _require(zeta > 0, "zeta must be positive")
    if _eq(zeta, 1.0):
        return RateSpec(-1.0, 1.0)
    return RateSpec(-1.0) if zeta > 1.0 else RateSpec(-zeta)


def gal_koksma_rate(beta: float, delta: float) -> RateSpec:
    """Almost-sure rate of ``(1/n) sum v_k`` when ``|E[v_i v_k]| <= C (k-i)^-beta``."""
    _require(beta > 0, "beta must be positive")
    _require(delta > 0, "delta must be positive")
    if _eq(beta, 1.0):
        return RateSpec(-0.5 + delta, 0.0)
    if beta > 1.0:
        return RateSpec(-0.5, 1.5 + delta)
    return RateSpec(-beta / 2.0, 1.5 + delta)


def variance_mean_gap_rate(psi: float) -> RateSpec:
    _require(psi > 1, "psi must exceed 1")
    if _eq(psi, 2.0):
        return RateSpec(-1.0, 1.0)
    return RateSpec(-1.0) if psi > 2.0 else RateSpec(1.0 - psi)


def variance_mean_gap_bound(psi: float, n: float) -> float:
    """Unnormalised bound (constant 1) on ``|sigma_n^2 - (1/n) sum v_i|``."""
    _require(n >= 2, "need n >= 2")
    return float(variance_mean_gap_rate(psi).evaluate(n))


def fluctuation_rate(psi: float, gamma: float, delta: float) -> RateSpec:
    """Almost-sure rate of ``|sigma_n^2 - E sigma_n^2|``."""
    _require(psi > 1, "psi must exceed 1")
    _require(gamma > 0, "gamma must be positive")
    return gal_koksma_rate(min(psi - 1.0, gamma), delta)


def mean_convergence_rate(psi: float, zeta: float) -> RateSpec:
    """Rate of ``|E sigma_n^2 - sigma^2|``."""
    _require(psi > 1, "psi must exceed 1")
    _require(zeta > 0, "zeta must be positive")
    if _eq(zeta, 1.0):
        p = 1.0 / psi - 1.0
        return RateSpec(p, -p, ratio_form=True)
    if zeta > 1.0:
        return RateSpec(1.0 / psi - 1.0)
    return RateSpec(zeta / psi - zeta)


def main_rate_terms(psi: float, gamma: float, zeta: float, delta: float) -> tuple:
    """The summands of the rate of ``|sigma_n^2(omega) - sigma^2|``."""
    fl = fluctuation_rate(psi, gamma, delta)
    _require(zeta > 0, "zeta must be positive")
    if zeta > 1.0 or _eq(zeta, 1.0):
        return (fl,)
    return (RateSpec(zeta / psi - zeta), fl)


def main_rate(psi: float, gamma: float, zeta: float, delta: float) -> RateSpec:
    """Dominant term of :func:`main_rate_terms`."""
    _require(delta > 0, "delta must be positive")
    terms = main_rate_terms(psi, gamma, zeta, delta)
    out = terms[0]
    for t in terms[1:]:
        out = dominant(out, t)
    return out


def choose_truncation_K(n: int, psi: float, zeta: float) -> int:
    """Truncation ``K`` balancing the series tail against the AMS error."""
    _require(n >= 2, "need n >= 2")
    _require(psi > 1, "psi must exceed 1")
    _require(zeta > 0, "zeta must be positive")
    if _eq(zeta, 1.0):
        raw = (n / math.log(n)) ** (1.0 / psi)
    elif zeta > 1.0:
        raw = n ** (1.0 / psi)
    else:
        raw = n ** (zeta / psi)
    return int(min(max(1, math.floor(raw + 0.5)), n))


# --------------------------------------------------------------------------
# the S(i, k) double sum
# --------------------------------------------------------------------------

def _inner_sums(model: BoundModel, m_max: int) -> np.ndarray:
    """``G(s) = sum_{d<s} min_{0<=t<=s} {eta(s-t) + alpha(t) eta(d)}`` for ``s = 0..m_max``.

    For power laws ``t -> eta(s-t) + alpha(t) y`` is convex on ``1 <= t <= s-1``,
    so the interior minimum is found by bisection on the forward difference,
    for all ``d`` at once.  The endpoints ``t = 0`` and ``t = s`` (where the
    ``0^{-psi} = 1`` convention applies) are compared separately.
    """
    ks = np.arange(m_max + 1)
    eta = model.eta(ks)
    alpha = model.alpha(ks)
    G = np.zeros(m_max + 1)
    for s in range(1, m_max + 1):
        y = eta[:s]
        best = np.minimum(eta[s] + alpha[0] * y, eta[0] + alpha[s] * y)
        if s >= 2:
            lo = np.ones(s, dtype=np.int64)
            hi = np.full(s, s - 1, dtype=np.int64)
            while True:
                active = lo < hi
                if not active.any():
                    break
                mid = (lo + hi) // 2
                up = (eta[s - mid - 1] + alpha[mid + 1] * y) >= (eta[s - mid] + alpha[mid] * y)
                hi = np.where(active & up, mid, hi)
                lo = np.where(active & ~up, mid + 1, lo)
            best = np.minimum(best, eta[s - lo] + alpha[lo] * y)
        G[s] = float(best.sum())
    return G


def _inner_sums_bruteforce(model: BoundModel, m_max: int) -> np.ndarray:
    eta = model.eta(np.arange(m_max + 1))
    alpha = model.alpha(np.arange(m_max + 1))
    G = np.zeros(m_max + 1)
    for s in range(1, m_max + 1):
        t = np.arange(s + 1)
        vals = eta[s - t][:, None] + alpha[t][:, None] * eta[:s][None, :]
        G[s] = vals.min(axis=0).sum()
    return G


def S_table(model: BoundModel, m_max: int, bruteforce: bool = False) -> np.ndarray:
    """``S(0, m)`` for ``m = 0..m_max``; ``S(i, k) = S(0, k - i)``."""
    if m_max < 0:
        raise ParameterError("m_max must be non-negative")
    G = (_inner_sums_bruteforce if bruteforce else _inner_sums)(model, m_max)
    eta = model.eta(np.arange(m_max + 1))
    out = np.zeros(m_max + 1)
    for m in range(1, m_max + 1):
        s = np.arange(1, m + 1)
        out[m] = float(np.dot(eta[m - s], G[s]))
    return out


def S_sum(i: int, k: int, model: BoundModel) -> float:
    """``S(i,k) = sum_{j=i}^{k-1} eta(j-i) sum_{l=k}^{2k-j-1} min_{j<=r<=k} {eta(k-r) + alpha(r-j) eta(l-k)}``."""
    if i > k:
        raise ParameterError("S(i, k) needs i <= k")
    if i == k:
        return 0.0
    return float(S_table(model, k - i)[k - i])


def S_sum_direct(i: int, k: int, model: BoundModel) -> float:
    """Literal triple loop over ``j, l, r``; a slow reference for small ``k - i``."""
    if i > k:
        raise ParameterError("S(i, k) needs i <= k")
    eta = lambda x: float(model.eta(x))
    alpha = lambda x: float(model.alpha(x))
    total = 0.0
    for j in range(i, k):
        inner = 0.0
        for l in range(k, 2 * k - j):
            inner += min(eta(k - r) + alpha(r - j) * eta(l - k) for r in range(j, k + 1))
        total += eta(j - i) * inner
    return total


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    n_points: int

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0


def fit_rate(n: Sequence[float], values: Sequence[float], level: float = 0.95) -> RateFit:
    """Least-squares slope of ``log value`` against ``log n`` with a t-based CI.

    Logarithmic factors are not modelled; they show up in the slope and its
    interval.
    """
    x = np.log(np.asarray(n, dtype=float))
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or len(x) < 3:
        raise DataError("need at least 3 (n, value) pairs of equal length")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise DataError("values must be positive and finite for a log-log fit")
    y = np.log(y)
    res = stats.linregress(x, y)
    t = stats.t.ppf(0.5 + level / 2.0, len(x) - 2)
    half = t * res.stderr
    return RateFit(float(res.slope), float(res.intercept), float(res.slope - half),
                   float(res.slope + half), len(x))


@dataclass(frozen=True)
class SandwichAudit:
    psi: float
    gamma: float
    m: np.ndarray
    S: np.ndarray
    target_slope: float
    fit: RateFit
    tail_slope: float                 # local slope over the last octave
    c1_printed: float                 # (1/2) eta(0)^2 + (1/2) eta(0)
    c1_best: float                    # largest C1 making the lower bound hold
    c2_best: float                    # smallest C2 making the upper bound hold
    lower_bound_holds: bool
    slope_ok: bool

    @property
    def passed(self) -> bool:
        return self.lower_bound_holds and self.slope_ok


def sandwich_audit(model: BoundModel, m_values: Sequence[int], slope_tol: float = 0.1
                   ) -> SandwichAudit:
    """Check ``C1 {m eta(m) + alpha(m)} <= S(0, m) <= C2 {m eta(m//4) + alpha(m//4)}``.

    Also fits ``log S`` against ``log m``; the expected slope is
    ``-min(psi - 1, gamma)``.
    """
    m = np.array(sorted(set(int(v) for v in m_values)))
    if len(m) < 8:
        raise DataError("need at least 8 values of m")
    if m[0] < 1:
        raise DataError("m must be positive")
    table = S_table(model, int(m[-1]))
    S = table[m]
    lower = m * model.eta(m) + model.alpha(m)
    upper = m * model.eta(m // 4) + model.alpha(m // 4)
    eta0 = float(model.eta(0))
    c1_printed = 0.5 * eta0 ** 2 + 0.5 * eta0
    target = -min(model.psi - 1.0, model.gamma)
    fit = fit_rate(m, S)
    tail = float(np.log(S[-1] / S[-2]) / np.log(m[-1] / m[-2]))
    return SandwichAudit(
        model.psi, model.gamma, m, S, target, fit, tail, c1_printed,
        float(np.min(S / lower)), float(np.max(S / upper)),
        bool(np.all(c1_printed * lower <= S * (1 + 1e-12))),
        bool(abs(fit.slope - target) <= slope_tol))


# --------------------------------------------------------------------------
# golden tables
# --------------------------------------------------------------------------

RATE_FUNCTIONS = {
    "h_zeta": lambda p: h_zeta(p["zeta"], p["n"]),
    "variance_mean_gap_bound": lambda p: (variance_mean_gap_rate(p["psi"]).description
                                          if "n" not in p else variance_mean_gap_bound(p["psi"], p["n"])),
    "gal_koksma_rate": lambda p: gal_koksma_rate(p["beta"], p["delta"]).description,
    "fluctuation_rate": lambda p: fluctuation_rate(p["psi"], p["gamma"], p["delta"]).description,
    "mean_convergence_rate": lambda p: mean_convergence_rate(p["psi"], p["zeta"]).description,
    "main_rate": lambda p: main_rate(p["psi"], p["gamma"], p["zeta"], p["delta"]).description,
}


@dataclass(frozen=True)
class GoldenRow:
    function: str
    params: dict
    expected: str

    def actual(self):
        return RATE_FUNCTIONS[self.function](self.params)

    def matches(self) -> bool:
        got = self.actual()
        if isinstance(got, str):
            return got == self.expected
        return abs(got - float(self.expected)) <= 1e-12 * max(1.0, abs(got))


def load_golden(name: str = "golden_rates.csv") -> list:
    """Rows of a golden table shipped in ``quenched_clt/data``."""
    text = resources.files("quenched_clt").joinpath("data").joinpath(name).read_text()
    rows = []
    for rec in csv.DictReader(line for line in text.splitlines() if not line.startswith("#")):
        params = {}
        for item in rec["params"].split(";"):
            key, val = item.split("=")
            params[key.strip()] = float(val)
        rows.append(GoldenRow(rec["function"], params, rec["expected"]))
    return rows
