"""Driving processes for the letters ``omega_i`` and their mixing structure.

Three kinds of process are supported: i.i.d. (finite alphabet or a continuous
slope range), stationary Markov chains and asymptotically mean stationary
(AMS) Markov chains started away from equilibrium.  For finite alphabets the
strong-mixing coefficient is computed exactly from the chain law, by
maximising ``|P(AB) - P(A)P(B)|`` over unions of cylinders of bounded depth.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, UnsupportedError
from .maps import OmegaSequence
from .rng import STREAM_MONTE_CARLO, STREAM_OMEGA, keyed_generator

KINDS = ("iid", "markov", "ams-markov")


def stationary_distribution(transition: np.ndarray) -> np.ndarray:
    """Left Perron vector of a row-stochastic matrix."""
    P = np.asarray(transition, dtype=float)
    n = P.shape[0]
    # solve pi (P - I) = 0 with sum(pi) = 1 as a least-squares system
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


@dataclass(frozen=True)
class SelectionProcess:
    """Law of the driving sequence.

    For ``kind="iid"`` with a finite alphabet ``transition`` is the matrix
    whose rows all equal the letter probabilities; this lets every finite
    process share the Markov code paths.  A continuous i.i.d. alphabet is
    declared with ``parameter_range`` (uniform slopes) and no matrix.
    """

    kind: str
    transition: Optional[np.ndarray] = None
    initial_distribution: Optional[np.ndarray] = None
    parameter_range: Optional[tuple] = None
    stationary: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown process kind {self.kind!r}")
        if self.transition is None:
            if self.kind != "iid" or self.parameter_range is None:
                raise ContractError("finite processes need a transition matrix")
            return
        P = np.array(self.transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ContractError("transition matrix must be square")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ContractError("transition rows must be non-negative and sum to 1 within 1e-12")
        P.setflags(write=False)
        pi = stationary_distribution(P)
        if np.max(np.abs(pi @ P - pi)) > 1e-10:
            raise ContractError("could not find a stationary distribution (pi P = pi)")
        pi.setflags(write=False)
        init = pi.copy() if self.initial_distribution is None else np.array(self.initial_distribution, float)
        if init.shape != (P.shape[0],) or np.any(init < 0) or abs(init.sum() - 1.0) > 1e-12:
            raise ContractError("initial distribution must be a probability vector")
        init.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial_distribution", init)
        object.__setattr__(self, "stationary", pi)

    # -- constructors -------------------------------------------------------
    @classmethod
    def iid(cls, probabilities: Sequence[float]) -> "SelectionProcess":
        p = np.asarray(probabilities, dtype=float)
        return cls("iid", np.tile(p, (len(p), 1)), p)

    @classmethod
    def iid_continuous(cls, lo: float, hi: float) -> "SelectionProcess":
        return cls("iid", None, None, (float(lo), float(hi)))

    @classmethod
    def constant(cls, n_letters: int = 1, letter: int = 0) -> "SelectionProcess":
        p = np.zeros(n_letters)
        p[letter] = 1.0
        return cls.iid(p)

    @classmethod
    def markov(cls, transition, initial=None) -> "SelectionProcess":
        return cls("markov", np.asarray(transition, float), initial)

    @classmethod
    def ams_markov(cls, transition, initial) -> "SelectionProcess":
        return cls("ams-markov", np.asarray(transition, float), initial)

    # -- queries ------------------------------------------------------------
    @property
    def is_finite(self) -> bool:
        return self.transition is not None

    @property
    def n_letters(self) -> int:
        if not self.is_finite:
            raise UnsupportedError("continuous alphabet has no finite letter count")
        return self.transition.shape[0]

    @property
    def is_stationary(self) -> bool:
        if not self.is_finite:
            return True
        return bool(np.max(np.abs(self.initial_distribution - self.stationary)) <= 1e-12)

    def marginal(self, t: int) -> np.ndarray:
        """Law of ``omega_t`` (coordinates start at 1)."""
        if t < 1:
            raise ContractError("coordinates start at 1")
        return self.initial_distribution @ np.linalg.matrix_power(self.transition, t - 1)

    def second_eigenvalue(self) -> float:
        ev = np.sort(np.abs(np.linalg.eigvals(self.transition)))[::-1]
        return float(ev[1]) if len(ev) > 1 else 0.0


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

def _sample_paths(process: SelectionProcess, length: int, count: int,
                  rng: np.random.Generator) -> np.ndarray:
    """``count`` independent paths of ``length`` letters, shape ``(count, length)``."""
    if not process.is_finite:
        lo, hi = process.parameter_range
        return lo + (hi - lo) * rng.random((count, length))
    u = rng.random((count, length))
    out = np.empty((count, length), dtype=np.int64)
    cum_init = np.cumsum(process.initial_distribution)
    cum_rows = np.cumsum(process.transition, axis=1)
    k = process.n_letters - 1
    state = np.minimum(np.searchsorted(cum_init, u[:, 0], side="right"), k)
    out[:, 0] = state
    for t in range(1, length):
        rows = cum_rows[state]
        state = np.minimum((u[:, t, None] >= rows).sum(axis=1), k)
        out[:, t] = state
    return out


def _sample_single(process: SelectionProcess, length: int, rng: np.random.Generator) -> np.ndarray:
    if not process.is_finite:
        return _sample_paths(process, length, 1, rng)[0]
    u = rng.random(length)
    k = process.n_letters - 1
    cum_rows = np.cumsum(process.transition, axis=1).tolist()
    state = min(int(np.searchsorted(np.cumsum(process.initial_distribution), u[0], side="right")), k)
    out = np.empty(length, dtype=np.int64)
    out[0] = state
    for t in range(1, length):
        row = cum_rows[state]
        ut = u[t]
        s = 0
        while s < k and ut >= row[s]:
            s += 1
        state = s
        out[t] = s
    return out


def sample_omega(process: SelectionProcess, length: int, seed: int,
                 realization_index: int = 0) -> OmegaSequence:
    """Draw ``(omega_1, ..., omega_length)``; a pure function of ``(seed, realization_index)``."""
    if length < 1:
        raise ContractError("length must be >= 1")
    rng = keyed_generator(seed, realization_index, STREAM_OMEGA)
    letters = _sample_single(process, length, rng)
    return OmegaSequence(letters, (process.kind, seed, realization_index, 0))


def shift(omega: OmegaSequence, m: int) -> OmegaSequence:
    """``tau^m omega = (omega_{m+1}, ...)``."""
    return omega.shift(m)


# --------------------------------------------------------------------------
# exact block laws
# --------------------------------------------------------------------------

def _chain_law_block(process: SelectionProcess, start: int, depth: int) -> np.ndarray:
    P = process.transition
    law = process.marginal(start)
    for _ in range(depth - 1):
        law = np.einsum("...a,ab->...ab", law, P)
    return law


def _forward_block(process: SelectionProcess, depth: int) -> np.ndarray:
    """Conditional law of a depth-``d`` block given its first letter, shape (k,)*d."""
    k = process.n_letters
    law = np.eye(k)
    for _ in range(depth - 1):
        law = np.einsum("...a,ab->...ab", law, process.transition)
    return law


def _dependence_matrix(process: SelectionProcess, i: int, gap: int, depth_a: int,
                       depth_b: int) -> np.ndarray:
    """``D[a, b] = P(A_a B_b) - P(A_a) P(B_b)`` for single cylinders.

    Rows index tuples on coordinates ``i-depth_a+1 .. i``, columns tuples on
    ``i+gap .. i+gap+depth_b-1``.
    """
    k = process.n_letters
    da = min(depth_a, i)
    past = _chain_law_block(process, i - da + 1, da).reshape(-1)           # (k**da,)
    last = np.tile(np.arange(k), k ** (da - 1))                           # last letter of each row tuple
    Pn = np.linalg.matrix_power(process.transition, gap)
    fwd = _forward_block(process, depth_b).reshape(k, -1)                 # (k, k**db)
    cond = Pn @ fwd                                                       # law of future block given omega_i
    joint = past[:, None] * cond[last]
    marg_b = _chain_law_block(process, i + gap, depth_b).reshape(-1)
    return joint - past[:, None] * marg_b[None, :]


def _max_over_unions(D: np.ndarray) -> float:
    """``max_{A,B} |sum_{a in A, b in B} D[a,b]|`` over all subsets, exactly.

    Enumerates subsets of the smaller side; for each, the optimal other side
    collects all positive (or all negative) column sums.
    """
    if D.shape[0] > D.shape[1]:
        D = D.T
    rows = D.shape[0]
    if rows > 20:
        raise UnsupportedError("cylinder event space too large for exhaustive maximisation")
    best = 0.0
    for mask in range(1, 1 << rows):
        sel = [(mask >> r) & 1 for r in range(rows)]
        colsum = np.asarray(sel, dtype=float) @ D
        best = max(best, colsum[colsum > 0].sum(), -colsum[colsum < 0].sum())
    return float(best)


def estimate_alpha(process: SelectionProcess, n: int, horizon_i: Optional[int] = None,
                   depth_a: int = 2, depth_b: int = 2) -> float:
    """Bounded-depth strong-mixing coefficient ``alpha_hat(n)``.

    Returns ``max_{1 <= i <= horizon_i} max_{A,B} |P(AB) - P(A)P(B)|`` where
    ``A`` ranges over unions of cylinders on the last ``depth_a`` coordinates
    up to ``i`` and ``B`` over unions of cylinders on ``depth_b`` coordinates
    from ``i+n``.  Probabilities are exact.  For stationary chains the value
    does not depend on ``i`` once ``i >= depth_a``.

    For a Markov chain the dependence between past and future passes through
    ``(omega_i, omega_{i+n})`` only, so depth one already attains the full
    supremum over the past and future sigma-algebras.
    """
    if not process.is_finite:
        raise UnsupportedError("alpha estimation needs a finite alphabet")
    if n < 1:
        raise ContractError("gap n must be >= 1")
    if horizon_i is None:
        horizon_i = depth_a if process.is_stationary else depth_a + 32
    best = 0.0
    for i in range(1, horizon_i + 1):
        best = max(best, _max_over_unions(_dependence_matrix(process, i, n, depth_a, depth_b)))
    return best


@dataclass(frozen=True)
class MixingProfile:
    gaps: np.ndarray
    alpha_values: np.ndarray          # raw bounded-depth estimates
    alpha_regularized: np.ndarray     # running minimum (enforced monotone)
    log_rate: Optional[float]         # fitted log(alpha(n+1)/alpha(n)); None when alpha == 0
    exp_constant: Optional[float]
    poly_constant: Optional[float]    # C_alpha with alpha(n) <= C n^-gamma on the range
    gamma: Optional[float]

    def fitted_bound(self) -> np.ndarray:
        if self.gamma is None:
            return np.zeros_like(self.alpha_values)
        return self.poly_constant * self.gaps.astype(float) ** (-self.gamma)

    def rows(self):
        return [(int(n), float(a), float(b)) for n, a, b in
                zip(self.gaps, self.alpha_regularized, self.fitted_bound())]


def mixing_profile(process: SelectionProcess, n_max: int, depth_a: int = 2,
                   depth_b: int = 2, floor: float = 1e-300) -> MixingProfile:
    """``alpha_hat(1..n_max)`` with exponential and polynomial upper-bound fits."""
    gaps = np.arange(1, n_max + 1)
    raw = np.array([estimate_alpha(process, int(n), None, depth_a, depth_b) for n in gaps])
    reg = np.minimum.accumulate(raw)
    pos = reg > floor
    if pos.sum() < 2:
        return MixingProfile(gaps, raw, reg, None, None, None, None)
    g, lv = gaps[pos].astype(float), np.log(reg[pos])
    slope, icpt = np.polyfit(g, lv, 1)
    pslope, _ = np.polyfit(np.log(g), lv, 1)
    gamma = max(-pslope, 1e-12)
    c_poly = float(np.max(reg[pos] * g ** gamma))
    return MixingProfile(gaps, raw, reg, float(slope), float(math.exp(icpt)), c_poly, float(gamma))


# --------------------------------------------------------------------------
# strong-mixing inequality
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderFunction:
    """Bounded function of finitely many letters.

    ``coords`` are absolute coordinates (starting at 1); ``table`` has one
    axis per coordinate, indexed by letter.
    """

    coords: tuple
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != len(self.coords):
            raise ContractError("table must have one axis per coordinate")
        if any(c < 1 for c in self.coords) or len(set(self.coords)) != len(self.coords):
            raise ContractError("coordinates must be distinct and >= 1")
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        object.__setattr__(self, "table", t)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.table)))

    def __call__(self, paths: np.ndarray) -> np.ndarray:
        idx = tuple(paths[:, c - 1] for c in self.coords)
        return self.table[idx]

    @classmethod
    def indicator(cls, coord: int, letter: int, n_letters: int) -> "CylinderFunction":
        t = np.zeros(n_letters)
        t[letter] = 1.0
        return cls((coord,), t)


def _exact_expectation(process: SelectionProcess, funcs: Sequence[CylinderFunction]) -> float:
    """``E[prod funcs]`` by enumeration over the covered coordinate range."""
    lo = min(min(f.coords) for f in funcs)
    hi = max(max(f.coords) for f in funcs)
    law = _chain_law_block(process, lo, hi - lo + 1)
    k = process.n_letters
    total = 0.0
    for tup in itertools.product(range(k), repeat=hi - lo + 1):
        p = law[tup]
        if p == 0.0:
            continue
        val = 1.0
        for f in funcs:
            val *= f.table[tuple(tup[c - lo] for c in f.coords)]
        total += p * val
    return total


@dataclass(frozen=True)
class MixingCheck:
    estimate: float          # Monte Carlo |E[uv] - Eu Ev|
    standard_error: float
    exact: float             # |Cov(u, v)| from the chain law
    alpha: float
    bound: float             # 4 |u|_inf |v|_inf alpha(n)
    passed: bool


def check_strong_mixing_inequality(process: SelectionProcess, u: CylinderFunction,
                                   v: CylinderFunction, gap: int, samples: int = 20000,
                                   seed: int = 0, depth: int = 2) -> MixingCheck:
    """Compare ``|E[uv] - Eu Ev|`` with ``4 |u| |v| alpha(gap)``.

    ``u`` must depend on coordinates ``<= i`` and ``v`` on coordinates
    ``>= i + gap`` where ``i = max(u.coords)``.
    """
    if not process.is_finite:
        raise UnsupportedError("needs a finite alphabet")
    i = max(u.coords)
    if min(v.coords) < i + gap:
        raise ContractError(f"v must depend on coordinates >= {i + gap} (u ends at {i}, gap {gap})")
    if samples < 2:
        raise ContractError("need at least two samples")
    length = max(v.coords)
    rng = keyed_generator(seed, 0, STREAM_MONTE_CARLO)
    paths = _sample_paths(process, length, samples, rng)
    uu, vv = u(paths), v(paths)
    prod = (uu - uu.mean()) * (vv - vv.mean())
    est = abs(prod.mean())
    se = float(prod.std(ddof=1) / math.sqrt(samples))
    exact = abs(_exact_expectation(process, [u, v])
                - _exact_expectation(process, [u]) * _exact_expectation(process, [v]))
    # the sup over i matters for non-stationary chains; take enough starting points
    alpha = estimate_alpha(process, gap, horizon_i=max(i, depth), depth_a=depth, depth_b=depth)
    bound = 4.0 * u.sup_norm * v.sup_norm * alpha
    return MixingCheck(est, se, exact, alpha, bound, bool(est <= bound + 3.0 * se))


# --------------------------------------------------------------------------
# AMS averages
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AmsAverage:
    n: int
    average: float           # (1/n) sum_{i<n} E[g o tau^i]
    stationary_value: float  # E-bar g under the stationary law
    difference: float


def ams_average_weights(process: SelectionProcess, g: CylinderFunction, n: int) -> AmsAverage:
    """Exact Cesaro average of ``E[g o tau^i]`` and its stationary limit.

    ``g.coords`` are read relative to the start of the shifted sequence, so
    ``g o tau^i`` looks at coordinates ``c + i``.
    """
    if not process.is_finite:
        raise UnsupportedError("needs a finite alphabet")
    if n < 1:
        raise ContractError("n must be >= 1")
    lo, hi = min(g.coords), max(g.coords)
    depth = hi - lo + 1
    k = process.n_letters
    fwd = _forward_block(process, depth).reshape(k, -1)
    # value of g on each block tuple, flattened in the same order as fwd
    vals = np.empty(k ** depth)
    for flat, tup in enumerate(itertools.product(range(k), repeat=depth)):
        vals[flat] = g.table[tuple(tup[c - lo] for c in g.coords)]
    per_start = fwd @ vals                          # E[g | first block letter]
    m = process.marginal(lo)
    acc = 0.0
    for _ in range(n):
        acc += float(m @ per_start)
        m = m @ process.transition
    avg = acc / n
    stat = float(process.stationary @ per_start)
    return AmsAverage(n, avg, stat, avg - stat)
