"""Bounded observables ``f: [0,1) -> R^d``.

All observables are frozen dataclasses so they pickle cleanly into worker
processes.  ``__call__`` returns shape ``(M,)`` for scalar observables and
``(M, d)`` for vector ones.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError
from .maps import MapSystem

TWO_PI = 2.0 * np.pi


class Observable:
    dimension: int = 1

    @property
    def sup_bound(self) -> float:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return False


@dataclass(frozen=True)
class Cosine(Observable):
    """``amplitude * cos(2 pi frequency x)``."""

    frequency: int = 1
    amplitude: float = 1.0

    @property
    def sup_bound(self) -> float:
        return abs(self.amplitude)

    def __call__(self, x):
        return self.amplitude * np.cos(TWO_PI * self.frequency * x)


@dataclass(frozen=True)
class Sine(Observable):
    frequency: int = 1
    amplitude: float = 1.0

    @property
    def sup_bound(self) -> float:
        return abs(self.amplitude)

    def __call__(self, x):
        return self.amplitude * np.sin(TWO_PI * self.frequency * x)


@dataclass(frozen=True)
class Constant(Observable):
    value: float = 1.0

    @property
    def sup_bound(self) -> float:
        return abs(self.value)

    @property
    def is_constant(self) -> bool:
        return True

    def __call__(self, x):
        return np.full(np.shape(x), float(self.value))


@dataclass(frozen=True)
class PiecewiseLinear(Observable):
    """Linear interpolation through ``(knots[k], values[k])`` on ``[0, 1]``."""

    knots: tuple
    values: tuple

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or len(k) != len(self.values) or len(k) < 2:
            raise ContractError("knots and values must be equal-length sequences of length >= 2")
        if k[0] != 0.0 or k[-1] != 1.0 or np.any(np.diff(k) <= 0):
            raise ContractError("knots must increase strictly from 0 to 1")
        object.__setattr__(self, "knots", tuple(float(v) for v in k))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def sup_bound(self) -> float:
        return max(abs(v) for v in self.values)

    def __call__(self, x):
        return np.interp(x, self.knots, self.values)


@dataclass(frozen=True)
class Coboundary(Observable):
    """``g - g o T`` for the fixed map ``T = T_letter`` of ``system``.

    Along the constant driving sequence ``letter, letter, ...`` the Birkhoff
    sums telescope to ``g - g o T^n``, so the limit variance is zero.
    """

    g: Observable
    system: MapSystem
    letter: int = 0

    @property
    def sup_bound(self) -> float:
        return 2.0 * self.g.sup_bound

    def __call__(self, x):
        return self.g(x) - self.g(self.system.map_float(self.letter, np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class Stacked(Observable):
    """Vector observable ``(f_1, ..., f_d)`` from scalar components."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components or any(c.dimension != 1 for c in self.components):
            raise ContractError("Stacked needs one or more scalar components")

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def sup_bound(self) -> float:
        return max(c.sup_bound for c in self.components)

    def __call__(self, x):
        return np.stack([c(x) for c in self.components], axis=-1)


@dataclass(frozen=True)
class Projection(Observable):
    """Scalar observable ``v^T f`` for a vector observable ``f``."""

    base: Observable
    direction: tuple

    def __post_init__(self):
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))
        if len(self.direction) != self.base.dimension:
            raise ContractError("direction length must equal the observable dimension")

    @property
    def sup_bound(self) -> float:
        return float(np.abs(self.direction).sum()) * self.base.sup_bound

    def __call__(self, x):
        return self.base(x) @ np.asarray(self.direction)


def evaluate(observable: Observable, x: np.ndarray) -> np.ndarray:
    """Evaluate and check the sup-norm bound on the sampled points."""
    values = np.asarray(observable(x), dtype=float)
    if values.size and np.max(np.abs(values)) > observable.sup_bound * (1 + 1e-12) + 1e-15:
        raise ContractError("observable exceeds its declared sup bound")
    return values


def cos2pi() -> Cosine:
    return Cosine(1)


def sin2pi() -> Sine:
    return Sine(1)


def basis_directions(d: int) -> Sequence[np.ndarray]:
    return [np.eye(d)[a] for a in range(d)]
