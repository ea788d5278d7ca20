"""Fiberwise statistics for a fixed driving sequence, and their averages over it.

For a fixed ``omega`` write ``f_i = f o phi(i, omega)`` and ``S_n = f_0 + ... +
f_{n-1}``.  Every mean ``mu(.)`` below is taken against the discrete ensemble
measure itself, so identities such as

    Var_mu(S_n) = sum_{i,j < n} (mu(f_i f_j) - mu(f_i) mu(f_j))

hold to rounding error rather than up to quadrature error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, DataError
from .maps import Ensemble, MapSystem, OmegaSequence, orbit
from .observables import Observable
from .rates import PowerLaw, RateFit, fit_rate
from .rng import map_ordered
from .selection import SelectionProcess, sample_omega

BLOCK = 256


def _block_rows(size: int) -> int:
    # keep a block of observable values near 16 MB
    return max(1, min(BLOCK, (1 << 21) // max(size, 1)))


def observable_matrix(system: MapSystem, omega: OmegaSequence, observable: Observable,
                      ensemble: Ensemble, n: int) -> np.ndarray:
    """Values ``f_i(x)`` for ``i < n``; shape ``(n, M)`` or ``(n, M, d)``."""
    if n < 1:
        raise ContractError("need n >= 1")
    pts = np.stack(list(orbit(system, omega, ensemble, n)))
    return np.asarray(observable(pts), dtype=float)


def birkhoff_sums(system: MapSystem, omega: OmegaSequence, observable: Observable,
                  ensemble: Ensemble, n: int) -> np.ndarray:
    """Running sums ``S_0, ..., S_n`` per ensemble point; row ``m`` is ``S_m``."""
    if n == 0:
        return np.zeros((1, len(ensemble)) + ((observable.dimension,) if observable.dimension > 1 else ()))
    vals = observable_matrix(system, omega, observable, ensemble, n)
    out = np.zeros((n + 1,) + vals.shape[1:])
    np.cumsum(vals, axis=0, out=out[1:])
    return out


def _centered(vals: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return vals - (vals @ weights)[:, None]


def correlation_table(system: MapSystem, omega: OmegaSequence, observable: Observable,
                      ensemble: Ensemble, n: int) -> np.ndarray:
    """Matrix ``c_ij = mu(f_i f_j) - mu(f_i) mu(f_j)`` for ``i, j < n`` (scalar ``f``).

    Only the upper triangle is computed; the lower one is its mirror, so the
    table is symmetric bit for bit.
    """
    vals = observable_matrix(system, omega, observable, ensemble, n)
    if vals.ndim != 2:
        raise ContractError("correlation_table needs a scalar observable")
    c = _centered(vals, ensemble.weights)
    table = (c * ensemble.weights) @ c.T
    upper = np.triu(table)
    return upper + np.triu(table, 1).T


def fiber_correlation(system: MapSystem, omega: OmegaSequence, observable: Observable,
                      ensemble: Ensemble, i: int, j: int) -> float:
    """``mu(f_i f_j) - mu(f_i) mu(f_j)``, evaluated in the order ``(min, max)``."""
    if i < 0 or j < 0:
        raise ContractError("indices must be non-negative")
    a, b = (i, j) if i <= j else (j, i)
    vals = observable_matrix(system, omega, observable, ensemble, b + 1)
    w = ensemble.weights
    fa, fb = vals[a], vals[b]
    return float(np.dot(w, fa * fb) - np.dot(w, fa) * np.dot(w, fb))


def lag_correlations(system: MapSystem, omega: OmegaSequence, observable: Observable,
                     ensemble: Ensemble, i: int, k_max: int) -> np.ndarray:
    """``c_{i, i+k}`` for ``k = 0..k_max``."""
    vals = observable_matrix(system, omega, observable, ensemble, i + k_max + 1)
    w = ensemble.weights
    m = vals @ w
    return (vals[i:] * vals[i]) @ w - m[i] * m[i:]


def _variance(values: np.ndarray, weights: np.ndarray) -> float:
    mean = float(np.dot(weights, values))
    return max(float(np.dot(weights, (values - mean) ** 2)), 0.0)


def quenched_variance(system: MapSystem, omega: OmegaSequence, observable: Observable,
                      ensemble: Ensemble, n: int) -> float:
    """``sigma_n^2(omega) = Var_mu(S_n / sqrt(n))``."""
    if n < 1:
        raise ContractError("need n >= 1")
    s = birkhoff_sums(system, omega, observable, ensemble, n)[n]
    if s.ndim != 1:
        raise ContractError("quenched_variance needs a scalar observable")
    return _variance(s, ensemble.weights) / n


# --------------------------------------------------------------------------
# streaming variance paths
# --------------------------------------------------------------------------

def sigma_path(system: MapSystem, omega: OmegaSequence, observable: Observable,
               ensemble: Ensemble, schedule: Sequence[int], window: Optional[int] = None
               ) -> np.ndarray:
    """``sigma_n^2(omega)`` at every ``n`` of ``schedule`` in one pass.

    With ``window=None`` this is ``Var_mu(S_n)/n``.  With ``window=K`` the lag
    window estimator

        (1/n) [ sum_{i<n} c_ii + 2 sum_{0 < j-i <= K, j<n} c_ij ]

    is returned instead.  It drops the far off-diagonal correlations, which
    for a finite sample are pure noise of size ``M^{-1/2}`` each and would
    otherwise add up to a floor that does not decay in ``n``.
    """
    sched = sorted(set(int(s) for s in schedule))
    if not sched or sched[0] < 1:
        raise ContractError("schedule must contain positive horizons")
    n_max = sched[-1]
    w = ensemble.weights
    M = len(ensemble)
    want = {n: k for k, n in enumerate(sched)}
    out = np.empty(len(sched))
    K = 0 if window is None else int(window)
    if K < 0:
        raise ContractError("window must be non-negative")
    rows = _block_rows(M)
    S = np.zeros(M)
    prev = np.zeros((K, M))       # last K rows of f values (zero padding before time 0)
    acc = 0.0                     # running windowed double sum
    t0 = 0
    buf = []
    for pts in orbit(system, omega, ensemble, n_max):
        buf.append(pts)
        if len(buf) < rows and t0 + len(buf) < n_max:
            continue
        vals = np.asarray(observable(np.stack(buf)), dtype=float)
        if vals.ndim != 2:
            raise ContractError("sigma_path needs a scalar observable")
        B = vals.shape[0]
        buf = []
        if window is None:
            csum = np.cumsum(vals, axis=0)
            for r in range(B):
                n = t0 + r + 1
                if n in want:
                    out[want[n]] = _variance(S + csum[r], w) / n
            S = S + csum[-1]
        else:
            ext = np.concatenate([prev, vals]) if K else vals
            means = ext @ w
            contrib = (vals * vals) @ w - means[K:] ** 2
            for lag in range(1, K + 1):
                lagged = ext[K - lag:K - lag + B]
                contrib += 2.0 * ((vals * lagged) @ w - means[K:] * means[K - lag:K - lag + B])
            run = acc + np.cumsum(contrib)
            for r in range(B):
                n = t0 + r + 1
                if n in want:
                    out[want[n]] = run[r] / n
            acc = float(run[-1])
            if K:
                prev = ext[-K:].copy()
        t0 += B
    return out


# --------------------------------------------------------------------------
# truncated v_i
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedV:
    i: int
    K: int
    value: float
    terms: np.ndarray                 # (2 - delta_{k0}) c_{i,i+k}, k = 0..K
    tail_bound: Optional[float]       # 2 sum_{k>K} eta(k), when a model is given
    flagged_lags: tuple               # lags where |c_{i,i+k}| exceeds eta(k)


def v_truncated(system: MapSystem, omega: OmegaSequence, observable: Observable,
                ensemble: Ensemble, i: int, K: int, eta: Optional[PowerLaw] = None,
                slack: float = 0.0) -> TruncatedV:
    """``v_i^{(K)} = sum_{j=i}^{i+K} (2 - delta_ij) c_ij`` with an optional tail bound."""
    if K < 0 or i < 0:
        raise ContractError("i and K must be non-negative")
    c = lag_correlations(system, omega, observable, ensemble, i, K)
    terms = c.copy()
    terms[1:] *= 2.0
    tail = None
    flagged = ()
    if eta is not None:
        tail = 2.0 * eta.tail_sum(K)
        bound = eta(np.arange(K + 1))
        flagged = tuple(int(k) for k in np.nonzero(np.abs(c) > bound + slack)[0])
    return TruncatedV(i, K, float(terms.sum()), terms, tail, flagged)


# --------------------------------------------------------------------------
# decay-of-correlation fit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EtaFit:
    lags: np.ndarray
    magnitudes: np.ndarray
    exp_constant: Optional[float]     # C with |c(k)| ~ C lambda^k
    exp_rate: Optional[float]         # lambda
    model: Optional[PowerLaw]         # conservative polynomial envelope C k^-psi

    def envelope_holds(self) -> bool:
        if self.exp_rate is None:
            return True
        env = self.exp_constant * self.exp_rate ** self.lags
        return bool(np.all(self.magnitudes <= env * (1 + 1e-12)))


def fit_eta(lags: Sequence[int], magnitudes: Sequence[float], floor: float = 0.0) -> EtaFit:
    """Fit ``|c(k)| <= C lambda^k`` and convert it to ``C' k^{-psi}``.

    Only lags with magnitude above ``floor`` enter the regression.  The
    exponential fit is shifted upward until it dominates every point, and the
    polynomial exponent is the most conservative one over the window:
    ``lambda^{k-1} = k^{-psi_k}`` is weakest at ``k = 2``, giving
    ``psi = -log(lambda) / log 2``.  With fewer than two lags above the floor
    the correlations are indistinguishable from zero and no model is fitted.
    """
    k = np.asarray(lags, dtype=float)
    a = np.abs(np.asarray(magnitudes, dtype=float))
    if k.shape != a.shape:
        raise DataError("lags and magnitudes must have equal length")
    use = (a > floor) & (k >= 1)
    if use.sum() < 2:
        return EtaFit(k, a, None, None, None)
    slope, _ = np.polyfit(k[use], np.log(a[use]), 1)
    lam = float(min(math.exp(slope), 1.0 - 1e-12))
    C = float(np.max(a / lam ** k))
    psi = -math.log(lam) / math.log(2.0)
    pos = k >= 1
    C_poly = float(max(np.max(a[pos] * k[pos] ** psi) if pos.any() else 0.0,
                       np.max(a[~pos]) if (~pos).any() else 0.0, 1e-300))
    return EtaFit(k, a, C, lam, PowerLaw(C_poly, psi))


# --------------------------------------------------------------------------
# averages over omega
# --------------------------------------------------------------------------

def _quantiles(x: np.ndarray, qs=(0.1, 0.5, 0.9)) -> tuple:
    return tuple(float(v) for v in np.quantile(x, qs))


def _exact_mean(values: np.ndarray) -> float:
    # identical inputs must give a bit-identical mean (zero spread)
    if values.size and np.all(values == values[0]):
        return float(values[0])
    return float(math.fsum(values) / values.size)


def _sigma_task(args):
    system, process, observable, ensemble, schedule, seed, r, window = args
    omega = sample_omega(process, max(schedule), seed, r)
    return sigma_path(system, omega, observable, ensemble, schedule, window)


@dataclass(frozen=True)
class MeanVariance:
    n: int
    mean: float
    standard_error: float             # nan when there is a single realization
    values: np.ndarray                # sigma_n^2 per realization, in realization order
    spread_quantiles: tuple           # q10, q50, q90 of |sigma_n^2 - mean|

    @property
    def se_defined(self) -> bool:
        return not math.isnan(self.standard_error)


def mean_quenched_variance(system: MapSystem, process: SelectionProcess, observable: Observable,
                           ensemble: Ensemble, n: int, n_realizations: int, seed: int,
                           workers: int = 1) -> MeanVariance:
    """Monte Carlo ``E sigma_n^2`` over independent draws of ``omega``."""
    if n_realizations < 1:
        raise ContractError("need at least one realization")
    tasks = [(system, process, observable, ensemble, [n], seed, r, None) for r in range(n_realizations)]
    vals = np.array([v[0] for v in map_ordered(_sigma_task, tasks, workers)])
    mean = _exact_mean(vals)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")
    return MeanVariance(n, mean, se, vals, _quantiles(np.abs(vals - mean)))


@dataclass(frozen=True)
class VarianceIdentity:
    n: int
    total_variance: float             # Var_{P x mu} W_n
    centering_variance: float         # Var_P mu(W_n)
    mean_quenched: float              # E sigma_n^2
    residual: float


def _w_task(args):
    system, process, observable, ensemble, n, seed, r = args
    omega = sample_omega(process, n, seed, r)
    return birkhoff_sums(system, omega, observable, ensemble, n)[n] / math.sqrt(n)


def variance_identity_report(system: MapSystem, process: SelectionProcess, observable: Observable,
                             ensemble: Ensemble, n: int, n_realizations: int, seed: int,
                             workers: int = 1) -> VarianceIdentity:
    """The three variances of ``W_n = S_n / sqrt(n)`` on one shared set of draws."""
    tasks = [(system, process, observable, ensemble, n, seed, r) for r in range(n_realizations)]
    W = np.stack(map_ordered(_w_task, tasks, workers))          # (R, M)
    w = ensemble.weights
    fiber_means = W @ w
    fiber_vars = np.array([_variance(row, w) for row in W])
    total = float(np.mean((W - fiber_means.mean()) ** 2 @ w))
    centering = float(np.mean((fiber_means - fiber_means.mean()) ** 2))
    mean_q = float(fiber_vars.mean())
    return VarianceIdentity(n, total, centering, mean_q, total - centering - mean_q)


@dataclass(frozen=True)
class FluctuationDecay:
    schedule: np.ndarray
    sigma_sq: np.ndarray              # (R, len(schedule))
    mean: np.ndarray                  # E-hat sigma_n^2 per n
    median: np.ndarray                # median |sigma_n^2 - mean|
    q10: np.ndarray
    q90: np.ndarray
    fit: Optional[RateFit]            # None when the medians are not all positive
    estimator: str
    window: Optional[int] = field(default=None)

    def rows(self):
        return [(int(n), float(m), float(a), float(b))
                for n, m, a, b in zip(self.schedule, self.median, self.q10, self.q90)]


def fluctuation_decay(system: MapSystem, process: SelectionProcess, observable: Observable,
                      ensemble: Ensemble, schedule: Sequence[int], n_realizations: int,
                      seed: int, estimator: str = "windowed", window: int = 8,
                      workers: int = 1) -> FluctuationDecay:
    """Quantiles of ``|sigma_n^2(omega) - E-hat sigma_n^2|`` along ``schedule`` and their decay fit."""
    sched = np.array(sorted(set(int(s) for s in schedule)))
    if len(sched) < 3:
        raise DataError("need at least 3 schedule points to fit a decay exponent")
    if estimator not in ("windowed", "full"):
        raise ContractError("estimator must be 'windowed' or 'full'")
    K = window if estimator == "windowed" else None
    tasks = [(system, process, observable, ensemble, list(sched), seed, r, K)
             for r in range(n_realizations)]
    table = np.stack(map_ordered(_sigma_task, tasks, workers))
    mean = np.array([_exact_mean(table[:, c]) for c in range(len(sched))])
    dev = np.abs(table - mean)
    q10, med, q90 = (np.quantile(dev, q, axis=0) for q in (0.1, 0.5, 0.9))
    fit = fit_rate(sched, med) if np.all(med > 0) else None
    return FluctuationDecay(sched, table, mean, med, q10, q90, fit, estimator, K)


# --------------------------------------------------------------------------
# report bundle
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuenchedReport:
    omega_provenance: tuple
    horizon: int
    correlation_table: np.ndarray
    sigma_n_sq: dict
    v_values: dict
    wbar_samples: np.ndarray


def quenched_report(system: MapSystem, omega: OmegaSequence, observable: Observable,
                    ensemble: Ensemble, schedule: Sequence[int], K: int = 8,
                    table_size: int = 16) -> QuenchedReport:
    """Collect the per-``omega`` statistics used by the runner."""
    sched = sorted(set(int(s) for s in schedule))
    n = sched[-1]
    size = min(table_size, n)
    table = correlation_table(system, omega, observable, ensemble, size)
    sig = dict(zip(sched, sigma_path(system, omega, observable, ensemble, sched)))
    v = {i: v_truncated(system, omega, observable, ensemble, i, K).value
         for i in range(0, max(n - K, 0), max(1, (n - K) // 4)) if i + K < n}
    s = birkhoff_sums(system, omega, observable, ensemble, n)[n] / math.sqrt(n)
    wbar = s - float(np.dot(ensemble.weights, s))
    return QuenchedReport(omega.provenance, n, table, sig, v, wbar)
