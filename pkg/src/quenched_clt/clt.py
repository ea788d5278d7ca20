"""Normal approximation of ``W-bar_n``: distances, the triangle split and covariances.

Distances are computed exactly for weighted empirical laws: the Kolmogorov
distance by evaluating the target CDF at every atom, the Wasserstein-1
distance by integrating ``|F^{-1}(u) - sigma Phi^{-1}(u)|`` in closed form on
each quantile step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from .errors import ContractError, DataError
from .maps import Ensemble, MapSystem, OmegaSequence, orbit
from .observables import Observable, Projection
from .quenched import _block_rows, quenched_variance, sigma_path
from .rates import RateFit, fit_rate
from .rng import map_ordered
from .selection import SelectionProcess, sample_omega

# standard deviation of the limiting Kolmogorov statistic sqrt(M) D_M
KOLMOGOROV_SD = 0.2603


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Atoms sorted ascending (ties merged) with weights summing to one."""

    values: np.ndarray
    weights: np.ndarray
    sample_size: int

    @classmethod
    def from_samples(cls, values, weights=None) -> "EmpiricalDistribution":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            raise DataError("empty sample")
        w = np.full(v.size, 1.0 / v.size) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != v.shape or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ContractError("weights must be a probability vector matching the values")
        uniq, inv = np.unique(v, return_inverse=True)
        merged = np.bincount(inv, weights=w, minlength=uniq.size)
        return cls(uniq, merged / merged.sum(), int(v.size))

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.weights)

    @property
    def effective_size(self) -> float:
        return 1.0 / float(np.dot(self.weights, self.weights)) if self.sample_size > 1 else 1.0

    def mean(self) -> float:
        return float(np.dot(self.weights, self.values))


def _centered_w(S: np.ndarray, n: int, weights: np.ndarray) -> np.ndarray:
    W = S / math.sqrt(n)
    if np.all(W == W[0]):
        return np.zeros_like(W)       # a weighted mean of equal values may not round back to them
    return W - float(np.dot(weights, W))


def wbar_distribution(system: MapSystem, omega: OmegaSequence, observable: Observable,
                      ensemble: Ensemble, n: int) -> EmpiricalDistribution:
    """Law of ``W-bar_n = (S_n - mu(S_n)) / sqrt(n)`` under the ensemble measure."""
    return wbar_path(system, omega, observable, ensemble, [n])[n]


def wbar_path(system: MapSystem, omega: OmegaSequence, observable: Observable,
              ensemble: Ensemble, schedule: Sequence[int]) -> dict:
    """``{n: law of W-bar_n}`` for every ``n`` in ``schedule`` from a single orbit pass."""
    sched = sorted(set(int(s) for s in schedule))
    if not sched or sched[0] < 1:
        raise ContractError("schedule must contain positive horizons")
    w = ensemble.weights
    rows = _block_rows(len(ensemble))
    S = np.zeros(len(ensemble))
    out = {}
    t0, buf = 0, []
    for pts in orbit(system, omega, ensemble, sched[-1]):
        buf.append(pts)
        if len(buf) < rows and t0 + len(buf) < sched[-1]:
            continue
        vals = np.asarray(observable(np.stack(buf)), dtype=float)
        if vals.ndim != 2:
            raise ContractError("wbar needs a scalar observable")
        buf = []
        for r in range(vals.shape[0]):
            S += vals[r]
            n = t0 + r + 1
            if n in sched:
                out[n] = EmpiricalDistribution.from_samples(_centered_w(S, n, w), w)
        t0 += vals.shape[0]
    return out


# --------------------------------------------------------------------------
# distances
# --------------------------------------------------------------------------

def kolmogorov_distance(dist: EmpiricalDistribution, sigma: float) -> float:
    """``sup_x |F(x) - Phi(x / sigma)|``; ``sigma = 0`` means the point mass at 0."""
    if sigma < 0:
        raise ContractError("sigma must be non-negative")
    cdf = dist.cdf
    below = cdf - dist.weights
    if sigma == 0:
        # target is the step at 0: sup = max(F(0-), 1 - F(0))
        f_minus = float(dist.weights[dist.values < 0].sum())
        f_at = float(dist.weights[dist.values <= 0].sum())
        return max(f_minus, 1.0 - f_at)
    target = special.ndtr(dist.values / sigma)
    return float(min(1.0, max(np.max(cdf - target), np.max(target - below), 0.0)))


def two_sample_kolmogorov(x, wx, y, wy) -> float:
    """Sup distance between two weighted empirical CDFs."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    wx, wy = np.asarray(wx, float), np.asarray(wy, float)
    grid = np.union1d(x, y)

    def ecdf(v, w):
        order = np.argsort(v, kind="stable")
        c = np.cumsum(w[order])
        idx = np.searchsorted(v[order], grid, side="right")
        return np.where(idx > 0, c[np.maximum(idx - 1, 0)], 0.0)

    return float(np.max(np.abs(ecdf(x, wx) - ecdf(y, wy))))


def weighted_kolmogorov(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    return two_sample_kolmogorov(a.values, a.weights, b.values, b.weights)


def wasserstein_distance(dist: EmpiricalDistribution, sigma: float) -> float:
    """``int_0^1 |F^{-1}(u) - sigma Phi^{-1}(u)| du`` evaluated exactly."""
    if sigma < 0:
        raise ContractError("sigma must be non-negative")
    x, w = dist.values, dist.weights
    if sigma == 0:
        return float(np.dot(w, np.abs(x)))
    hi = np.minimum(np.cumsum(w), 1.0)
    lo = np.concatenate([[0.0], hi[:-1]])

    def G(u):
        # antiderivative of sigma Phi^{-1}(u); vanishes at 0 and 1
        q = special.ndtri(np.clip(u, 0.0, 1.0))
        return np.where((u <= 0) | (u >= 1), 0.0, -sigma * stats.norm.pdf(q))

    ustar = np.clip(special.ndtr(x / sigma), lo, hi)
    Gl, Gs, Gh = G(lo), G(ustar), G(hi)
    val = x * (ustar - lo) - (Gs - Gl) + (Gh - Gs) - x * (hi - ustar)
    return float(np.sum(val))


@dataclass(frozen=True)
class ScaleDistance:
    a: float
    b: float
    distance: float
    crossing: Optional[float]         # x* where the two CDFs are furthest apart
    lipschitz_ratio: Optional[float]  # distance / |a - b|


def gaussian_scale_distance(a: float, b: float) -> ScaleDistance:
    """Exact Kolmogorov distance between ``N(0, a^2)`` and ``N(0, b^2)``."""
    if a <= 0 or b <= 0:
        raise ContractError("scales must be positive")
    if a == b:
        return ScaleDistance(a, b, 0.0, None, None)
    lo, hi = min(a, b), max(a, b)
    x = math.sqrt(2.0 * math.log(hi / lo) * lo * lo * hi * hi / (hi * hi - lo * lo))
    d = float(special.ndtr(x / lo) - special.ndtr(x / hi))
    return ScaleDistance(a, b, d, x, d / abs(a - b))


# --------------------------------------------------------------------------
# triangle decomposition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TriangleRow:
    n: int
    sigma_n: float
    sigma: float
    d_fiber: float                    # d(W-bar_n, sigma_n Z)
    d_scale: float                    # d(sigma_n Z, sigma Z)
    d_total: float                    # d(W-bar_n, sigma Z)
    d_wasserstein: float              # W1(W-bar_n, sigma Z)
    noise_se: float                   # approximate sd of d_total from finite sampling

    @property
    def residual(self) -> float:
        return self.d_fiber + self.d_scale - self.d_total


@dataclass(frozen=True)
class TriangleReport:
    rows: tuple
    degenerate: bool
    fit: Optional[RateFit]

    @property
    def min_residual(self) -> float:
        return min((r.residual for r in self.rows), default=0.0)

    def monotone_within(self, n_se: float = 1.0) -> bool:
        """``d_total`` never rises by more than ``n_se`` joint standard errors."""
        for a, b in zip(self.rows, self.rows[1:]):
            if b.d_total > a.d_total + n_se * math.hypot(a.noise_se, b.noise_se):
                return False
        return True

    def csv_rows(self):
        return [(r.n, r.d_total, r.d_wasserstein, r.sigma_n, r.sigma) for r in self.rows]


def triangle_report(system: MapSystem, process: SelectionProcess, observable: Observable,
                    ensemble: Ensemble, schedule: Sequence[int], sigma_sq_estimate: float,
                    seed: int, realization: int = 0) -> TriangleReport:
    """``d(W-bar_n, sigma Z) <= d(W-bar_n, sigma_n Z) + d(sigma_n Z, sigma Z)`` along ``schedule``.

    Uses one driving sequence; a non-positive ``sigma_sq_estimate`` returns a
    report flagged degenerate with no rows.
    """
    if sigma_sq_estimate <= 0:
        return TriangleReport((), True, None)
    sigma = math.sqrt(sigma_sq_estimate)
    sched = sorted(set(int(s) for s in schedule))
    omega = sample_omega(process, sched[-1], seed, realization)
    laws = wbar_path(system, omega, observable, ensemble, sched)
    rows = []
    for n in sched:
        law = laws[n]
        var = float(np.dot(law.weights, law.values ** 2))
        if var <= 0:
            return TriangleReport(tuple(rows), True, None)
        sn = math.sqrt(var)
        rows.append(TriangleRow(
            n, sn, sigma, kolmogorov_distance(law, sn), gaussian_scale_distance(sn, sigma).distance,
            kolmogorov_distance(law, sigma), wasserstein_distance(law, sigma),
            KOLMOGOROV_SD / math.sqrt(law.effective_size)))
    totals = np.array([r.d_total for r in rows])
    fit = fit_rate(sched, totals) if len(rows) >= 3 and np.all(totals > 0) else None
    return TriangleReport(tuple(rows), False, fit)


# --------------------------------------------------------------------------
# vector observables
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CovarianceEstimate:
    matrix: np.ndarray
    entry_se: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.array_equal(m, m.T):
            raise ContractError("covariance matrix must be square and exactly symmetric")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def is_psd(self, atol: float = 1e-12) -> bool:
        floor = -3.0 * float(np.max(self.entry_se)) - atol
        return bool(np.min(np.linalg.eigvalsh(self.matrix)) >= floor)


def _unit(d: int, *idx) -> tuple:
    v = np.zeros(d)
    for i in idx:
        v[i] += 1.0
    return tuple(v)


def _polarize(ell: dict, d: int) -> np.ndarray:
    out = np.empty((d, d))
    for a in range(d):
        out[a, a] = ell[(a, a)]
        for b in range(a + 1, d):
            out[a, b] = out[b, a] = 0.5 * (ell[(a, b)] - ell[(a, a)] - ell[(b, b)])
    return out


def _directions(d: int) -> dict:
    dirs = {(a, a): _unit(d, a) for a in range(d)}
    dirs.update({(a, b): _unit(d, a, b) for a in range(d) for b in range(a + 1, d)})
    return dirs


def covariance_by_polarization(system: MapSystem, omega: OmegaSequence, observable: Observable,
                               ensemble: Ensemble, n: int) -> CovarianceEstimate:
    """``(sigma_n^2)_{ab} = (ell(e_a + e_b) - ell(e_a) - ell(e_b)) / 2`` from scalar variances."""
    d = observable.dimension
    if d == 1:
        v = quenched_variance(system, omega, observable, ensemble, n)
        return CovarianceEstimate(np.array([[v]]), np.zeros((1, 1)))
    ell = {k: quenched_variance(system, omega, Projection(observable, v), ensemble, n)
           for k, v in _directions(d).items()}
    return CovarianceEstimate(_polarize(ell, d), np.zeros((d, d)))


def direct_covariance(system: MapSystem, omega: OmegaSequence, observable: Observable,
                      ensemble: Ensemble, n: int) -> np.ndarray:
    """Ensemble covariance of the vector ``W-bar_n``."""
    pts = np.stack(list(orbit(system, omega, ensemble, n)))
    vals = np.asarray(observable(pts), dtype=float)
    if vals.ndim == 2:
        vals = vals[..., None]
    S = vals.sum(axis=0) / math.sqrt(n)              # (M, d)
    w = ensemble.weights
    c = S - w @ S
    out = (c * w[:, None]).T @ c
    return np.triu(out) + np.triu(out, 1).T


@dataclass(frozen=True)
class PolarizationRateCheck:
    schedule: np.ndarray
    matrix_error: np.ndarray          # median max-norm |sigma_n^2(omega) - mean|
    pair_errors: dict                 # (a, b) -> median |ell_n(omega) - mean|
    matrix_exponent: float            # decay exponent kappa (positive = decaying)
    pair_exponents: dict
    tolerance: float

    @property
    def slowest_pair_exponent(self) -> float:
        return min(self.pair_exponents.values())

    @property
    def passed(self) -> bool:
        return abs(self.matrix_exponent - self.slowest_pair_exponent) <= self.tolerance


def _ell_task(args):
    system, process, observable, ensemble, schedule, seed, r, window, dirs = args
    omega = sample_omega(process, max(schedule), seed, r)
    return np.stack([sigma_path(system, omega, Projection(observable, v), ensemble, schedule, window)
                     for v in dirs])


def polarization_rate_check(system: MapSystem, process: SelectionProcess, observable: Observable,
                            ensemble: Ensemble, schedule: Sequence[int], n_realizations: int,
                            seed: int, window: Optional[int] = 8, tolerance: float = 0.15,
                            workers: int = 1) -> PolarizationRateCheck:
    """Compare the decay of the matrix fluctuation with that of its polarization directions."""
    d = observable.dimension
    sched = np.array(sorted(set(int(s) for s in schedule)))
    keys = list(_directions(d))
    dirs = [_directions(d)[k] for k in keys]
    tasks = [(system, process, observable, ensemble, list(sched), seed, r, window, dirs)
             for r in range(n_realizations)]
    ell = np.stack(map_ordered(_ell_task, tasks, workers))      # (R, n_dirs, n_sched)
    mean_ell = ell.mean(axis=0)
    pair_err = {k: np.median(np.abs(ell[:, i] - mean_ell[i]), axis=0) for i, k in enumerate(keys)}
    mats = np.array([[_polarize({k: ell[r, i, t] for i, k in enumerate(keys)}, d)
                      for t in range(len(sched))] for r in range(n_realizations)])
    mean_mat = mats.mean(axis=0)
    mat_err = np.median(np.max(np.abs(mats - mean_mat), axis=(2, 3)), axis=0)
    pair_exp = {k: -fit_rate(sched, v).slope for k, v in pair_err.items()}
    return PolarizationRateCheck(sched, mat_err, pair_err, -fit_rate(sched, mat_err).slope,
                                 pair_exp, tolerance)
