"""Interval map families, ensembles and the random cocycle.

A :class:`MapSystem` assigns to every letter of an alphabet a self-map of the
half-open unit interval.  A driving sequence (:class:`OmegaSequence`) selects
the map applied at each step, and the cocycle ``phi(n, omega)`` is the
composition ``T_{omega_n} o ... o T_{omega_1}``.

Two arithmetic back ends are used:

* floating point, valid for every family;
* exact residues modulo the prime ``p = 2305843009213693421`` (just below
  ``2**61``) for families whose branches all have integer slope (doubling,
  tent, integer beta).  A point is stored as an integer ``a`` representing
  ``a / p``.  ``x -> b*x mod 1`` is then the bijection ``a -> b*a mod p``,
  which neither collapses orbits onto 0 (the fate of ``2x mod 1`` in binary
  floating point after ~53 steps) nor loses resolution over long horizons.
  The prime is chosen so that 2 and 3 are primitive roots: ``p - 1 = 20 q``
  with ``q`` prime, so every multiplier has orbit period dividing 20 or at
  least ``q ~ 1.15e17``.  (The Mersenne prime ``2**61 - 1`` would be a poor
  choice: ``2**61 = 1 mod p`` makes every doubling orbit 61-periodic.)

Sample ensembles carry residues; grid ensembles are exact dyadic floats and
are subject to the resolution cap of :func:`horizon_cap`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError, InsufficientRandomnessError, PrecisionError
from .rng import STREAM_ENSEMBLE, keyed_generator

MODULUS = 2305843009213693421
_SMALL_ORDER = 20  # p - 1 = 20 * prime
_P = np.uint64(MODULUS)
_INV_P = 1.0 / MODULUS
_BELOW_ONE = np.nextafter(1.0, 0.0)

FAMILIES = ("beta", "doubling", "tent", "table")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# map families
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """Affine branch sending ``[x0, x1)`` onto the segment from ``y0`` to ``y1``."""

    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def slope(self) -> float:
        return (self.y1 - self.y0) / (self.x1 - self.x0)


@dataclass(frozen=True)
class MapSystem:
    """A parametrised family ``{T_letter}`` of maps ``[0,1) -> [0,1)``.

    Parameters
    ----------
    family : {"beta", "doubling", "tent", "table"}
        ``beta``: ``x -> beta*x mod 1`` with ``beta = parameter_of(letter)``.
        ``doubling``: every letter acts as ``2x mod 1``.
        ``tent``: every letter acts as ``min(2x, 2-2x) mod 1`` (the single
        point ``x = 1/2`` is sent to 0 to stay inside ``[0,1)``).
        ``table``: per-letter piecewise-linear branches, images taken mod 1.
    parameters : sequence, optional
        Per-letter parameters for a finite alphabet: slopes for ``beta``,
        tuples of :class:`Branch` for ``table``.  ``None`` together with
        ``parameter_range`` declares a continuous alphabet whose letters are
        the slopes themselves (``beta`` only).
    parameter_range : (lo, hi), optional
        Slope range of a continuous alphabet.
    """

    family: str
    parameters: Optional[tuple] = None
    parameter_range: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractError(f"unknown map family {self.family!r}; expected one of {FAMILIES}")
        if self.parameters is not None:
            object.__setattr__(self, "parameters", tuple(self.parameters))
        if self.family == "beta":
            if self.parameters is None:
                if self.parameter_range is None:
                    raise ContractError("beta family needs parameters or a parameter_range")
                lo, hi = self.parameter_range
                if not 1.0 <= lo <= hi:
                    raise ContractError("beta slopes must satisfy 1 <= lo <= hi")
            elif any(float(b) < 1.0 for b in self.parameters):
                raise ContractError("beta slopes must be >= 1")
        if self.family == "table":
            if not self.parameters:
                raise ContractError("table family needs per-letter branch tables")
            tables = tuple(tuple(Branch(*b) if not isinstance(b, Branch) else b for b in t)
                           for t in self.parameters)
            for t in tables:
                _check_table(t)
            object.__setattr__(self, "parameters", tables)

    # -- convenience constructors ------------------------------------------
    @classmethod
    def beta(cls, slopes: Sequence[float]) -> "MapSystem":
        return cls("beta", tuple(float(b) for b in slopes))

    @classmethod
    def beta_continuous(cls, lo: float, hi: float) -> "MapSystem":
        return cls("beta", None, (float(lo), float(hi)))

    @classmethod
    def doubling(cls, n_letters: int = 1) -> "MapSystem":
        return cls("doubling", tuple(2.0 for _ in range(n_letters)))

    @classmethod
    def tent(cls, n_letters: int = 1) -> "MapSystem":
        return cls("tent", tuple(2.0 for _ in range(n_letters)))

    @classmethod
    def table(cls, tables) -> "MapSystem":
        return cls("table", tuple(tables))

    # -- structural queries -------------------------------------------------
    @property
    def is_continuous(self) -> bool:
        return self.parameters is None

    @property
    def n_letters(self) -> Optional[int]:
        return None if self.parameters is None else len(self.parameters)

    def parameter_of(self, letter):
        if self.parameters is None:
            return float(letter)
        return self.parameters[int(letter)]

    def slope_of(self, letter) -> float:
        if self.family in ("doubling", "tent"):
            return 2.0
        if self.family == "beta":
            return float(self.parameter_of(letter))
        return max(abs(b.slope) for b in self.parameter_of(letter))

    @property
    def max_slope(self) -> float:
        if self.family in ("doubling", "tent"):
            return 2.0
        if self.parameters is None:
            return float(self.parameter_range[1])
        return max(self.slope_of(i) for i in range(len(self.parameters)))

    @property
    def integer_slopes(self) -> bool:
        """True when the exact residue back end applies to every letter."""
        if self.family in ("doubling", "tent"):
            return True
        if self.family != "beta" or self.parameters is None:
            return False
        return all(_residue_multiplier_ok(float(b)) for b in self.parameters)

    # -- evaluation ---------------------------------------------------------
    def map_float(self, letter, x: np.ndarray) -> np.ndarray:
        if self.family == "doubling":
            return np.mod(2.0 * x, 1.0)
        if self.family == "tent":
            return np.mod(np.minimum(2.0 * x, 2.0 - 2.0 * x), 1.0)
        if self.family == "beta":
            return np.mod(float(self.parameter_of(letter)) * x, 1.0)
        return _apply_table(self.parameter_of(letter), x)

    def map_residue(self, letter, a: np.ndarray) -> np.ndarray:
        if self.family == "tent":
            y = a * np.uint64(2)
            return np.where(y < _P, y, np.uint64(2) * _P - y)
        b = 2 if self.family == "doubling" else int(self.parameter_of(letter))
        return (a * np.uint64(b)) % _P


def _residue_multiplier_ok(b: float) -> bool:
    """Integer multiplier that fits in 64 bits and has a long orbit mod ``p``."""
    if not b.is_integer() or b * MODULUS >= 2.0 ** 64:
        return False
    return pow(int(b), _SMALL_ORDER, MODULUS) != 1


def _check_table(branches) -> None:
    for br in branches:
        if not 0.0 <= br.x0 < br.x1 <= 1.0:
            raise ContractError(f"branch domain [{br.x0}, {br.x1}) not inside [0,1]")
        if not (0.0 <= min(br.y0, br.y1) and max(br.y0, br.y1) <= 1.0):
            raise ContractError(f"branch image [{br.y0}, {br.y1}] not inside [0,1]")
    xs = sorted((br.x0, br.x1) for br in branches)
    if xs[0][0] != 0.0 or xs[-1][1] != 1.0 or any(a[1] != b[0] for a, b in zip(xs, xs[1:])):
        raise ContractError("branch domains must tile [0,1) without gaps or overlaps")


def _apply_table(branches, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for br in branches:
        sel = (x >= br.x0) & (x < br.x1)
        out[sel] = br.y0 + (x[sel] - br.x0) * br.slope
    return np.mod(out, 1.0)


def _check_domain(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all((arr >= 0.0) & (arr < 1.0)):
        raise DomainError("points must lie in the half-open unit interval [0, 1)")
    return arr


# --------------------------------------------------------------------------
# driving sequences
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OmegaSequence:
    """A finite stretch ``(omega_1, ..., omega_N)`` of a driving sequence.

    ``letters`` holds integer letter indices for finite alphabets and slope
    values for continuous ones.  ``provenance`` is ``(process_kind, seed,
    realization)`` plus the offset already removed by :meth:`shift`.
    """

    letters: np.ndarray
    provenance: tuple = ("manual", None, None, 0)

    def __post_init__(self):
        object.__setattr__(self, "letters", _frozen(np.asarray(self.letters)))

    def __len__(self) -> int:
        return int(self.letters.shape[0])

    def shift(self, m: int) -> "OmegaSequence":
        """Return ``tau^m omega``."""
        if m < 0:
            raise ContractError("shift must be non-negative")
        if m > len(self):
            raise InsufficientRandomnessError(f"cannot shift a length-{len(self)} sequence by {m}")
        kind, seed, idx, off = (tuple(self.provenance) + (None, None, None, 0))[:4]
        return OmegaSequence(self.letters[m:], (kind, seed, idx, (off or 0) + m))


def _require_length(omega: OmegaSequence, n: int) -> None:
    if n < 0:
        raise ContractError("horizon must be non-negative")
    if n > len(omega):
        raise InsufficientRandomnessError(
            f"horizon {n} exceeds driving sequence length {len(omega)}")


# --------------------------------------------------------------------------
# ensembles
# --------------------------------------------------------------------------

ENSEMBLE_MODES = ("iid-sample", "stratified-grid")


@dataclass(frozen=True)
class Ensemble:
    """Weighted point cloud standing in for the initial measure ``mu``.

    ``residues`` (optional) gives the exact representation ``points = residues / p``
    used by the integer-slope back end.
    """

    points: np.ndarray
    weights: np.ndarray
    mode: str = "iid-sample"
    residues: Optional[np.ndarray] = None
    depth: int = 0  # number of map applications already performed
    resolution: Optional[int] = None  # grid spacing 1/resolution when points repeat a base grid

    def __post_init__(self):
        pts = _check_domain(self.points)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or w.shape != pts.shape:
            raise ContractError("points and weights must be 1-d arrays of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ContractError("weights must be non-negative and sum to 1 within 1e-12")
        if self.mode not in ENSEMBLE_MODES:
            raise ContractError(f"unknown ensemble mode {self.mode!r}")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))
        if self.residues is not None:
            r = np.asarray(self.residues, dtype=np.uint64)
            if r.shape != pts.shape:
                raise ContractError("residues must match points")
            object.__setattr__(self, "residues", _frozen(r))

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def effective_size(self) -> float:
        return 1.0 / float(np.dot(self.weights, self.weights))

    @classmethod
    def grid(cls, size: int, density: Optional[Callable] = None) -> "Ensemble":
        """Left-endpoint grid ``k/size`` with weights proportional to ``density``.

        For ``size`` a power of two the points are exact binary fractions, so
        integer-slope maps act on them without rounding until :func:`horizon_cap`.
        """
        if size < 1:
            raise ContractError("grid size must be positive")
        pts = np.arange(size, dtype=float) / size
        if density is None:
            w = np.full(size, 1.0 / size)
        else:
            w = np.asarray(density(pts), dtype=float)
            if np.any(w < 0) or w.sum() <= 0:
                raise ContractError("density must be non-negative with positive mass")
            w = w / w.sum()
        return cls(pts, w, "stratified-grid")

    @classmethod
    def sample(cls, size: int, seed: int, realization: int = 0,
               inverse_cdf: Optional[Callable] = None) -> "Ensemble":
        """I.i.d. sample of ``size`` points with equal weights.

        Uniform samples are drawn directly as residues modulo ``p``; with
        ``inverse_cdf`` the uniform draw is transformed first and then rounded
        down to the residue grid.
        """
        if size < 1:
            raise ContractError("sample size must be positive")
        rng = keyed_generator(seed, realization, STREAM_ENSEMBLE)
        if inverse_cdf is None:
            res = rng.integers(0, MODULUS, size=size, dtype=np.uint64)
        else:
            u = rng.random(size)
            x = np.clip(np.asarray(inverse_cdf(u), dtype=float), 0.0, np.nextafter(1.0, 0.0))
            res = np.minimum(np.floor(x * MODULUS), MODULUS - 1).astype(np.uint64)
        pts = np.minimum(res * _INV_P, _BELOW_ONE)
        return cls(pts, np.full(size, 1.0 / size), "iid-sample", res)

    def with_points(self, points, residues=None, depth=None) -> "Ensemble":
        return Ensemble(points, self.weights, self.mode, residues,
                        self.depth if depth is None else depth, self.resolution)


def horizon_cap(system: MapSystem, ensemble: Ensemble) -> Optional[int]:
    """Largest number of map applications allowed on a grid ensemble.

    Returns ``floor(log(size)/log(max_slope)) - 2`` for grids (``size`` is the
    grid resolution) and ``None``
    (unlimited) for sample ensembles.
    """
    if ensemble.mode != "stratified-grid":
        return None
    slope = system.max_slope
    if slope <= 1.0:
        return None
    size = ensemble.resolution or len(ensemble)
    return int(math.floor(math.log(size) / math.log(slope) + 1e-12)) - 2


def check_horizon(system: MapSystem, ensemble: Ensemble, applications: int) -> None:
    cap = horizon_cap(system, ensemble)
    if cap is not None and ensemble.depth + applications > cap:
        raise PrecisionError(
            f"grid ensemble of resolution {ensemble.resolution or len(ensemble)} supports at most {cap} map applications "
            f"(max slope {system.max_slope:g}); requested {ensemble.depth + applications}",
            cap=cap)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def apply_map(system: MapSystem, letter, x):
    """Evaluate ``T_letter(x)`` for a point or array of points in ``[0,1)``."""
    arr = _check_domain(x)
    out = system.map_float(letter, np.atleast_1d(arr).astype(float))
    if np.any(np.isnan(out)) or np.any((out < 0.0) | (out >= 1.0)):
        raise DomainError("map produced a value outside [0, 1)")
    return float(out[0]) if np.ndim(x) == 0 else out


def cocycle_apply(system: MapSystem, omega: OmegaSequence, n: int, x):
    """Return ``phi(n, omega) x``; ``phi(0, omega)`` is the identity."""
    _require_length(omega, n)
    arr = np.atleast_1d(_check_domain(x)).astype(float)
    for letter in omega.letters[:n]:
        arr = system.map_float(letter, arr)
    return float(arr[0]) if np.ndim(x) == 0 else arr


def doubled_cocycle_apply(system: MapSystem, omega: OmegaSequence, n: int, x, y):
    """Return ``phi2(n, omega)(x, y) = (phi(n, omega) x, phi(n, omega) y)``."""
    return cocycle_apply(system, omega, n, x), cocycle_apply(system, omega, n, y)


class _Stepper:
    """Mutable orbit state for one ensemble under one driving sequence."""

    def __init__(self, system: MapSystem, ensemble: Ensemble):
        self.system = system
        self.exact = ensemble.residues is not None and system.integer_slopes
        self.res = ensemble.residues.copy() if self.exact else None
        self.x = ensemble.points.copy()

    def points(self) -> np.ndarray:
        if self.exact:
            # (p-1)/p rounds to 1.0 in double precision
            return np.minimum(self.res * _INV_P, _BELOW_ONE)
        return self.x

    def step(self, letter) -> None:
        if self.exact:
            self.res = self.system.map_residue(letter, self.res)
        else:
            self.x = self.system.map_float(letter, self.x)

    def ensemble(self, template: Ensemble, applied: int) -> Ensemble:
        if self.exact:
            return template.with_points(self.points(), self.res, template.depth + applied)
        return template.with_points(self.x, None, template.depth + applied)


def orbit(system: MapSystem, omega: OmegaSequence, ensemble: Ensemble, n: int):
    """Yield ``phi(i, omega)`` applied to the ensemble points for ``i = 0..n-1``.

    Only ``n - 1`` map applications are performed, so the grid cap is checked
    against ``n - 1``.
    """
    _require_length(omega, max(n - 1, 0))
    check_horizon(system, ensemble, max(n - 1, 0))
    st = _Stepper(system, ensemble)
    for i in range(n):
        yield st.points()
        if i + 1 < n:
            st.step(omega.letters[i])


def push_ensemble(system: MapSystem, omega: OmegaSequence, n: int, ensemble: Ensemble) -> Ensemble:
    """Push every ensemble point forward by ``phi(n, omega)``; weights unchanged."""
    _require_length(omega, n)
    check_horizon(system, ensemble, n)
    st = _Stepper(system, ensemble)
    for letter in omega.letters[:n]:
        st.step(letter)
    return st.ensemble(ensemble, n)


def past_pushforward(system: MapSystem, history: OmegaSequence, ensemble: Ensemble,
                     n: int) -> Ensemble:
    """Push the ensemble along the last ``n`` letters of a history.

    ``history`` lists ``(omega_{-N+1}, ..., omega_0)`` oldest first; the result
    is the image under ``T_{omega_0} o ... o T_{omega_{-n+1}}``.
    """
    _require_length(history, n)
    tail = OmegaSequence(history.letters[len(history) - n:], history.provenance)
    return push_ensemble(system, tail, n, ensemble)
