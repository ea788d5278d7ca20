"""Estimates of the limit variance ``sigma^2`` and positivity diagnostics.

Three routes are implemented:

``vk-series``
    ``sum_{k<=K} V_k`` with ``V_k = (2 - delta_{k0}) E-bar c_{r, r+k}`` read off
    after a burn-in ``r``.
``doubled-green-kubo``
    One half of the weighted autocovariance sum of the antisymmetric
    observable ``F(x, y) = f(x) - f(y)`` along pairs driven by the same maps.
``classical-gk-split``
    The difference of the joint series (fluctuations in ``omega`` and ``x``)
    and the centering series (fluctuations of the fiber means).

The stationary average ``E-bar`` is realised by starting the driving chain at
its stationary law; for non-stationary drivers the burn-in stands in for the
limit ``r -> infinity``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .clt import two_sample_kolmogorov
from .errors import ContractError, DataError, UnsupportedError
from .maps import Ensemble, MapSystem, OmegaSequence, past_pushforward
from .observables import Observable
from .quenched import _sigma_task, observable_matrix
from .rates import PowerLaw, choose_truncation_K, fit_rate
from .rng import map_ordered
from .selection import SelectionProcess, sample_omega

ROUTES = ("vk-series", "doubled-green-kubo", "classical-gk-split")


@dataclass(frozen=True)
class LimitVarianceEstimate:
    route: str
    sigma_sq: float
    per_k_terms: np.ndarray
    per_k_se: np.ndarray
    truncation_K: int
    burn_in_i: int
    standard_error: float
    sigma_sq_half_burn_in: Optional[float] = None
    tail_bound: Optional[float] = None
    bound_violations: tuple = ()       # lags with |V_k| > 2 eta(k) + 3 se
    mean_F: Optional[float] = None     # doubled route: integral of F after burn-in
    mean_F_se: Optional[float] = None

    def rows(self):
        return [(k, float(v), float(s)) for k, (v, s) in enumerate(zip(self.per_k_terms, self.per_k_se))]


def _se(samples: np.ndarray) -> np.ndarray:
    if samples.shape[0] < 2:
        return np.full(samples.shape[1:], math.nan)
    return samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])


def _weights_2(K: int) -> np.ndarray:
    w = np.full(K + 1, 2.0)
    w[0] = 1.0
    return w


# --------------------------------------------------------------------------
# V_k series
# --------------------------------------------------------------------------

def _lag_rows(vals: np.ndarray, w: np.ndarray, r: int, K: int) -> np.ndarray:
    m = vals @ w
    return (vals[r:r + K + 1] * vals[r]) @ w - m[r] * m[r:r + K + 1]


def _vk_task(args):
    system, process, observable, ensemble, K, burn_in, seed, r = args
    omega = sample_omega(process, burn_in + K + 1, seed, r)
    vals = observable_matrix(system, omega, observable, ensemble, burn_in + K + 1)
    w = ensemble.weights
    return np.stack([_lag_rows(vals, w, burn_in, K), _lag_rows(vals, w, burn_in // 2, K)])


def _vk_samples(system, process, observable, ensemble, K, burn_in, n_realizations, seed, workers):
    if n_realizations < 1:
        raise ContractError("need at least one realization")
    tasks = [(system, process, observable, ensemble, K, burn_in, seed, r) for r in range(n_realizations)]
    return np.stack(map_ordered(_vk_task, tasks, workers))          # (R, 2, K+1)


@dataclass(frozen=True)
class VkEstimate:
    k: int
    value: float
    standard_error: float
    value_half_burn_in: float
    burn_in_i: int


def estimate_Vk(system: MapSystem, process: SelectionProcess, observable: Observable,
                ensemble: Ensemble, k: int, burn_in_i: int, n_realizations: int, seed: int,
                workers: int = 1) -> VkEstimate:
    """``V_k = (2 - delta_{k0}) E-bar c_{r, r+k}`` at ``r = burn_in_i`` (and at ``r/2``)."""
    if k < 0 or burn_in_i < 0:
        raise ContractError("k and burn_in_i must be non-negative")
    samples = _vk_samples(system, process, observable, ensemble, k, burn_in_i,
                          n_realizations, seed, workers)[:, :, k] * (1.0 if k == 0 else 2.0)
    se = _se(samples[:, 0])
    return VkEstimate(k, float(samples[:, 0].mean()), float(se),
                      float(samples[:, 1].mean()), burn_in_i)


def sigma_sq_series(system: MapSystem, process: SelectionProcess, observable: Observable,
                    ensemble: Ensemble, n_realizations: int, seed: int,
                    n_for_K: Optional[int] = None, psi: float = 2.0, zeta: float = 2.0,
                    K: Optional[int] = None, burn_in_i: Optional[int] = None,
                    eta: Optional[PowerLaw] = None, workers: int = 1) -> LimitVarianceEstimate:
    """``sum_{k<=K} V_k`` with ``K`` from :func:`choose_truncation_K` unless given.

    The burn-in defaults to ``2K``.  With an ``eta`` model the tail
    ``sum_{k>K} 2 eta(k)`` is attached and every term is checked against
    ``2 eta(k) + 3 se``.
    """
    if K is None:
        if n_for_K is None:
            raise ContractError("give either K or n_for_K")
        K = choose_truncation_K(n_for_K, psi, zeta)
    r = 2 * K if burn_in_i is None else burn_in_i
    samples = _vk_samples(system, process, observable, ensemble, K, r, n_realizations, seed, workers)
    terms = samples * _weights_2(K)
    per_k = terms[:, 0].mean(axis=0)
    per_k_se = _se(terms[:, 0])
    totals = terms[:, 0].sum(axis=1)
    tail = viol = None
    if eta is not None:
        tail = 2.0 * eta.tail_sum(K)
        lim = 2.0 * eta(np.arange(K + 1)) + 3.0 * np.nan_to_num(per_k_se)
        viol = tuple(int(k) for k in np.nonzero(np.abs(per_k) > lim)[0])
    return LimitVarianceEstimate(
        "vk-series", float(totals.mean()), per_k, per_k_se, K, r,
        float(_se(totals[:, None])[0]), float(terms[:, 1].sum(axis=1).mean()), tail, viol or ())


# --------------------------------------------------------------------------
# doubled system
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DoubledEnsemble:
    """Pairs ``(x_j, y_j)`` with weights standing in for ``mu x mu``.

    ``provenance`` is ``"product"`` (all pairs of one base ensemble, weights
    multiplied) or ``"coupled"`` (independent samples zipped together).
    """

    xs: Ensemble
    ys: Ensemble
    provenance: str
    base: Optional[Ensemble] = None

    def __post_init__(self):
        if self.provenance not in ("product", "coupled"):
            raise ContractError("provenance must be 'product' or 'coupled'")
        if len(self.xs) != len(self.ys) or not np.array_equal(self.xs.weights, self.ys.weights):
            raise ContractError("pair coordinates must share length and weights")

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def weights(self) -> np.ndarray:
        return self.xs.weights

    @classmethod
    def product(cls, base: Ensemble) -> "DoubledEnsemble":
        M = len(base)
        ix = np.repeat(np.arange(M), M)
        iy = np.tile(np.arange(M), M)
        w = np.outer(base.weights, base.weights).ravel()
        w = w / w.sum()

        def pick(idx):
            res = None if base.residues is None else base.residues[idx]
            return Ensemble(base.points[idx], w, base.mode, res, base.depth,
                            base.resolution or M)

        return cls(pick(ix), pick(iy), "product", base)

    @classmethod
    def coupled(cls, first: Ensemble, second: Ensemble) -> "DoubledEnsemble":
        if len(first) != len(second):
            raise ContractError("coupled ensembles must have equal size")
        w = np.sqrt(first.weights * second.weights)
        w = w / w.sum()
        return cls(Ensemble(first.points, w, first.mode, first.residues, first.depth, first.resolution),
                   Ensemble(second.points, w, second.mode, second.residues, second.depth,
                            second.resolution),
                   "coupled")

    def swapped(self) -> "DoubledEnsemble":
        return DoubledEnsemble(self.ys, self.xs, self.provenance, self.base)


def _F_rows(system, omega, observable, paired: DoubledEnsemble, n):
    fx = observable_matrix(system, omega, observable, paired.xs, n)
    fy = observable_matrix(system, omega, observable, paired.ys, n)
    return fx - fy


def _gk_task(args):
    system, process, observable, paired, K, burn_in, seed, r = args
    omega = sample_omega(process, burn_in + K + 1, seed, r)
    F = _F_rows(system, omega, observable, paired, burn_in + K + 1)
    w = paired.weights
    half = burn_in // 2
    cov = (F[burn_in:burn_in + K + 1] * F[burn_in]) @ w
    cov_half = (F[half:half + K + 1] * F[half]) @ w
    return np.concatenate([cov, cov_half, [float(F[burn_in] @ w)]])


def green_kubo_doubled(system: MapSystem, process: SelectionProcess, observable: Observable,
                       paired: DoubledEnsemble, K: int, burn_in_i: int, n_realizations: int,
                       seed: int, eta: Optional[PowerLaw] = None,
                       workers: int = 1) -> LimitVarianceEstimate:
    """``(1/2) sum_{k<=K} (2 - delta_{k0}) int F . F o Phi2^k`` after ``burn_in_i`` steps.

    ``per_k_terms`` holds the halved, weighted covariances; their sum is the
    estimate.  ``mean_F`` is the integral of ``F`` at the burn-in depth, which
    should vanish.
    """
    if K < 0 or burn_in_i < 0:
        raise ContractError("K and burn_in_i must be non-negative")
    tasks = [(system, process, observable, paired, K, burn_in_i, seed, r) for r in range(n_realizations)]
    raw = np.stack(map_ordered(_gk_task, tasks, workers))
    wk = 0.5 * _weights_2(K)
    terms = raw[:, :K + 1] * wk
    half_terms = raw[:, K + 1:2 * K + 2] * wk
    totals = terms.sum(axis=1)
    per_k, per_k_se = terms.mean(axis=0), _se(terms)
    viol = ()
    tail = None
    if eta is not None:
        # |int F . F o Phi2^k| <= 2 eta(k), so each halved term is bounded by (2 - delta) eta(k)
        tail = 2.0 * eta.tail_sum(K)
        lim = _weights_2(K) * eta(np.arange(K + 1)) + 3.0 * np.nan_to_num(per_k_se)
        viol = tuple(int(k) for k in np.nonzero(np.abs(per_k) > lim)[0])
    return LimitVarianceEstimate(
        "doubled-green-kubo", float(totals.mean()), per_k, per_k_se, K, burn_in_i,
        float(_se(totals[:, None])[0]), float(half_terms.sum(axis=1).mean()), tail, viol,
        float(raw[:, -1].mean()), float(_se(raw[:, -1:])[0]))


def z_variance(system: MapSystem, omega: OmegaSequence, observable: Observable,
               paired: DoubledEnsemble, n: int) -> float:
    """``int Z_n^2 d(mu x mu)`` with ``Z_n(x, y) = S_n(x) - S_n(y)``."""
    if paired.provenance != "product":
        raise ContractError("z_variance needs a product paired ensemble")
    if n < 1:
        raise ContractError("need n >= 1")
    Z = _F_rows(system, omega, observable, paired, n).sum(axis=0)
    return float(np.dot(paired.weights, Z * Z))


# --------------------------------------------------------------------------
# classical split
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalSplit:
    K: int
    burn_in_i: int
    joint: float              # limit of Var_{P x mu} W_n
    centering: float          # limit of Var_P mu(W_n)
    difference: float
    joint_se: float
    centering_se: float
    difference_se: float
    joint_terms: np.ndarray
    centering_terms: np.ndarray

    def as_estimate(self) -> LimitVarianceEstimate:
        terms = self.joint_terms - self.centering_terms
        return LimitVarianceEstimate("classical-gk-split", self.difference, terms,
                                     np.full(len(terms), math.nan), self.K, self.burn_in_i,
                                     self.difference_se)


def _split_task(args):
    system, process, observable, ensemble, K, burn_in, seed, r = args
    omega = sample_omega(process, burn_in + K + 1, seed, r)
    vals = observable_matrix(system, omega, observable, ensemble, burn_in + K + 1)
    w = ensemble.weights
    rows = vals[burn_in:burn_in + K + 1]
    prod = (rows * rows[0]) @ w                         # mu(f_r f_{r+k})
    means = rows @ w                                    # mu(f_{r+k})
    return np.concatenate([prod, means])


def _split_statistics(samples: np.ndarray, K: int) -> tuple:
    prod, means = samples[:, :K + 1], samples[:, K + 1:]
    Em = means.mean(axis=0)
    base = Em[0] * Em
    wk = _weights_2(K)
    joint_terms = wk * (prod.mean(axis=0) - base)
    cent_terms = wk * ((means * means[:, :1]).mean(axis=0) - base)
    return joint_terms, cent_terms


def classical_green_kubo_split(system: MapSystem, process: SelectionProcess, observable: Observable,
                               ensemble: Ensemble, K: int, burn_in_i: int, n_realizations: int,
                               seed: int, workers: int = 1) -> ClassicalSplit:
    """Joint and centering series for a stationary driver; jackknife errors."""
    if not process.is_stationary or process.kind == "ams-markov":
        raise UnsupportedError("the classical split needs a stationary driving process")
    if n_realizations < 2:
        raise ContractError("need at least two realizations")
    tasks = [(system, process, observable, ensemble, K, burn_in_i, seed, r) for r in range(n_realizations)]
    samples = np.stack(map_ordered(_split_task, tasks, workers))
    jt, ct = _split_statistics(samples, K)
    R = samples.shape[0]
    loo = np.array([[t.sum() for t in _split_statistics(np.delete(samples, i, axis=0), K)]
                    for i in range(R)])
    loo = np.column_stack([loo, loo[:, 0] - loo[:, 1]])
    jk = np.sqrt((R - 1) / R * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return ClassicalSplit(K, burn_in_i, float(jt.sum()), float(ct.sum()),
                          float(jt.sum() - ct.sum()), float(jk[0]), float(jk[1]), float(jk[2]), jt, ct)


@dataclass(frozen=True)
class RouteComparison:
    pairs: tuple              # (route_a, route_b, difference, joint_se, consistent)

    @property
    def consistent(self) -> bool:
        return all(p[4] for p in self.pairs)


def compare_routes(estimates: Sequence[LimitVarianceEstimate], n_se: float = 2.0,
                   atol: float = 1e-9) -> RouteComparison:
    """Pairwise agreement within ``n_se`` joint standard errors (plus ``atol``)."""
    out = []
    for i in range(len(estimates)):
        for j in range(i + 1, len(estimates)):
            a, b = estimates[i], estimates[j]
            se = math.sqrt(np.nan_to_num(a.standard_error) ** 2 + np.nan_to_num(b.standard_error) ** 2)
            d = a.sigma_sq - b.sigma_sq
            out.append((a.route, b.route, d, se, abs(d) <= n_se * se + atol))
    return RouteComparison(tuple(out))


# --------------------------------------------------------------------------
# positivity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthData:
    n: np.ndarray
    mean_var_sn: np.ndarray           # E-hat Var_mu(S_n)
    standard_error: np.ndarray


def growth_data(system: MapSystem, process: SelectionProcess, observable: Observable,
                ensemble: Ensemble, schedule: Sequence[int], n_realizations: int, seed: int,
                workers: int = 1) -> GrowthData:
    sched = np.array(sorted(set(int(s) for s in schedule)))
    tasks = [(system, process, observable, ensemble, list(sched), seed, r, None)
             for r in range(n_realizations)]
    table = np.stack(map_ordered(_sigma_task, tasks, workers)) * sched
    return GrowthData(sched, table.mean(axis=0), _se(table))


@dataclass(frozen=True)
class PositivityVerdict:
    verdict: str                      # positive | degenerate | inconclusive
    exponent: Optional[float]
    c: float                          # least-squares slope of Var(S_n) against n
    c_se: float
    reason: str


def positivity_check(n: Sequence[int], mean_var_sn: Sequence[float], psi: float,
                     slack: float = 0.1, atol: float = 1e-12) -> PositivityVerdict:
    """Classify the growth of ``E Var_mu(S_n)``.

    Linear growth with a significant slope means ``sigma^2 > 0``; growth no
    faster than ``n^{1/psi}`` is what a vanishing limit variance allows.
    """
    n = np.asarray(n, dtype=float)
    v = np.asarray(mean_var_sn, dtype=float)
    if len(n) < 4:
        raise DataError("need at least 4 schedule points")
    if psi <= 1:
        raise DataError("psi must exceed 1")
    c = float(np.dot(n, v) / np.dot(n, n))
    resid = v - c * n
    c_se = float(math.sqrt(np.dot(resid, resid) / (len(n) - 1) / np.dot(n, n)))
    if np.max(np.abs(v)) <= atol * np.max(n):
        return PositivityVerdict("degenerate", None, c, c_se, "variances vanish")
    if np.any(v <= 0):
        return PositivityVerdict("inconclusive", None, c, c_se, "non-positive variance values")
    exponent = fit_rate(n, v).slope
    if exponent >= 1.0 - slack and c > 3.0 * c_se:
        return PositivityVerdict("positive", exponent, c, c_se, "linear growth")
    if exponent <= 1.0 / psi + slack:
        return PositivityVerdict("degenerate", exponent, c, c_se, "growth at most n^{1/psi}")
    return PositivityVerdict("inconclusive", exponent, c, c_se, "growth between the two regimes")


# --------------------------------------------------------------------------
# pushforwards of the past
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PastDiagnostic:
    n: np.ndarray
    consecutive_distance: np.ndarray  # sup |F_{n_k} - F_{n_{k-1}}|, first entry nan


def past_pushforward_diagnostic(system: MapSystem, history: OmegaSequence, ensemble: Ensemble,
                                n_values: Sequence[int]) -> PastDiagnostic:
    """Empirical CDF distance between successive approximants of ``mu_{omega^-}``."""
    ns = np.array(sorted(set(int(v) for v in n_values)))
    dist = np.full(len(ns), math.nan)
    prev = None
    for idx, n in enumerate(ns):
        cur = past_pushforward(system, history, ensemble, int(n))
        if prev is not None:
            dist[idx] = two_sample_kolmogorov(prev.points, prev.weights, cur.points, cur.weights)
        prev = cur
    return PastDiagnostic(ns, dist)


def uniformity_distance(ensemble: Ensemble) -> float:
    """``sup_x |F(x) - x|`` for the weighted empirical CDF of the ensemble points."""
    order = np.argsort(ensemble.points, kind="stable")
    x = ensemble.points[order]
    cdf = np.cumsum(ensemble.weights[order])
    return float(max(np.max(np.abs(cdf - x)), np.max(np.abs(cdf - ensemble.weights[order] - x))))

