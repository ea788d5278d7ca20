"""Experiment configuration: a sectioned ``key = value`` text file.

Example::

    [run]
    seed = 12345
    workers = 1
    output_dir = out

    [map]
    family = beta
    slopes = 2, 3

    [process]
    kind = markov
    transition = 0.9, 0.1; 0.1, 0.9

    [observable]
    kind = cos2pi

    [ensemble]
    mode = sample
    size = 4096

    [schedule]
    n = 16, 64, 256
    k_max = 4
    realizations = 20

    [bounds]
    mode = fit

Every parse error is a :class:`ConfigError` whose ``field`` is the dotted path
of the offending key (``schedule.n``).
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError
from .maps import Branch, Ensemble, MapSystem
from .observables import Coboundary, Constant, Cosine, Observable, PiecewiseLinear, Sine, Stacked
from .rates import BoundModel
from .selection import SelectionProcess

# keys that do not influence results and are left out of the config hash
_UNHASHED = {("run", "workers"), ("run", "output_dir")}


class _Section:
    def __init__(self, parser: configparser.ConfigParser, name: str, required: bool = True):
        if not parser.has_section(name):
            if required:
                raise ConfigError(name, "missing section")
            self.data = {}
        else:
            self.data = dict(parser.items(name))
        self.name = name

    def path(self, key: str) -> str:
        return f"{self.name}.{key}"

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default=None, required: bool = False) -> Optional[str]:
        if key not in self.data:
            if required:
                raise ConfigError(self.path(key), "missing value")
            return default
        return self.data[key].strip()

    def text(self, key, default=None, required=False, choices=None):
        v = self.raw(key, default, required)
        if v is not None and choices is not None and v not in choices:
            raise ConfigError(self.path(key), f"expected one of {', '.join(choices)}, got {v!r}")
        return v

    def integer(self, key, default=None, required=False, minimum=None):
        v = self.raw(key, None, required)
        if v is None:
            return default
        try:
            out = int(v)
        except ValueError:
            raise ConfigError(self.path(key), f"expected an integer, got {v!r}") from None
        if minimum is not None and out < minimum:
            raise ConfigError(self.path(key), f"must be >= {minimum}")
        return out

    def number(self, key, default=None, required=False):
        v = self.raw(key, None, required)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(self.path(key), f"expected a number, got {v!r}") from None

    def numbers(self, key, default=None, required=False) -> Optional[tuple]:
        v = self.raw(key, None, required)
        if v is None:
            return default
        try:
            out = tuple(float(x) for x in v.split(",") if x.strip())
        except ValueError:
            raise ConfigError(self.path(key), f"expected comma-separated numbers, got {v!r}") from None
        if not out:
            raise ConfigError(self.path(key), "empty list")
        return out

    def integers(self, key, default=None, required=False) -> Optional[tuple]:
        vals = self.numbers(key, None, required)
        if vals is None:
            return default
        if any(not float(x).is_integer() for x in vals):
            raise ConfigError(self.path(key), "expected integers")
        return tuple(int(x) for x in vals)

    def matrix(self, key, default=None, required=False) -> Optional[tuple]:
        v = self.raw(key, None, required)
        if v is None:
            return default
        try:
            rows = tuple(tuple(float(x) for x in row.split(",")) for row in v.split(";"))
        except ValueError:
            raise ConfigError(self.path(key), "expected rows 'a, b; c, d'") from None
        if len({len(r) for r in rows}) != 1:
            raise ConfigError(self.path(key), "rows must have equal length")
        return rows


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    workers: int
    output_dir: str
    system: MapSystem
    process: SelectionProcess
    observable: Observable
    ensemble_mode: str
    ensemble_size: int
    schedule: tuple
    k_max: int
    realizations: int
    burn_in: Optional[int]
    window: int
    bounds: Optional[BoundModel]        # None means "fit from the run"
    zeta: float
    delta: float
    pair_size: int
    clt_size: int
    config_hash: str

    def ensemble(self, size: Optional[int] = None, realization: int = 0) -> Ensemble:
        size = self.ensemble_size if size is None else size
        if self.ensemble_mode == "grid":
            return Ensemble.grid(size)
        return Ensemble.sample(size, self.seed, realization)

    def with_workers(self, workers: int) -> "ExperimentConfig":
        from dataclasses import replace
        return replace(self, workers=workers)

    def with_output(self, output_dir: str) -> "ExperimentConfig":
        from dataclasses import replace
        return replace(self, output_dir=output_dir)


def _hash(parser: configparser.ConfigParser) -> str:
    canon = {s: {k: v.strip() for k, v in sorted(parser.items(s)) if (s, k) not in _UNHASHED}
             for s in sorted(parser.sections())}
    return hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()[:16]


def _parse_map(sec: _Section) -> MapSystem:
    family = sec.text("family", required=True, choices=("beta", "doubling", "tent", "table"))
    if family == "beta":
        if sec.has("slope_range"):
            lo, hi = (sec.numbers("slope_range") + (None,))[:2]
            if hi is None:
                raise ConfigError(sec.path("slope_range"), "expected 'lo, hi'")
            return _wrap(sec.path("slope_range"), MapSystem.beta_continuous, lo, hi)
        return _wrap(sec.path("slopes"), MapSystem.beta, sec.numbers("slopes", required=True))
    if family in ("doubling", "tent"):
        n = sec.integer("letters", 1, minimum=1)
        return MapSystem.doubling(n) if family == "doubling" else MapSystem.tent(n)
    tables = []
    letter = 0
    while sec.has(f"branches.{letter}"):
        key = f"branches.{letter}"
        rows = sec.matrix(key)
        if any(len(r) != 4 for r in rows):
            raise ConfigError(sec.path(key), "each branch needs 'x0, x1, y0, y1'")
        tables.append(tuple(Branch(*r) for r in rows))
        letter += 1
    if not tables:
        raise ConfigError(sec.path("branches.0"), "table family needs branches.0, branches.1, ...")
    return _wrap(sec.path("branches.0"), MapSystem.table, tables)


def _parse_process(sec: _Section, system: MapSystem) -> SelectionProcess:
    kind = sec.text("kind", required=True, choices=("iid", "markov", "ams-markov", "constant"))
    if kind == "constant":
        n = system.n_letters or 1
        return _wrap(sec.path("letter"), SelectionProcess.constant, n, sec.integer("letter", 0, minimum=0))
    if kind == "iid":
        if system.is_continuous:
            lo, hi = system.parameter_range
            return SelectionProcess.iid_continuous(lo, hi)
        probs = sec.numbers("probabilities")
        if probs is None:
            probs = tuple(1.0 / system.n_letters for _ in range(system.n_letters))
        if len(probs) != system.n_letters:
            raise ConfigError(sec.path("probabilities"), "length must equal the number of map letters")
        return _wrap(sec.path("probabilities"), SelectionProcess.iid, probs)
    P = sec.matrix("transition", required=True)
    if len(P) != system.n_letters:
        raise ConfigError(sec.path("transition"), "size must equal the number of map letters")
    init = sec.numbers("initial")
    if kind == "ams-markov" and init is None:
        raise ConfigError(sec.path("initial"), "ams-markov needs an initial distribution")
    ctor = SelectionProcess.markov if kind == "markov" else SelectionProcess.ams_markov
    return _wrap(sec.path("transition"), ctor, P, init)


_BUILTIN = {"cos2pi": lambda: Cosine(1), "sin2pi": lambda: Sine(1)}


def _parse_observable(sec: _Section, system: MapSystem) -> Observable:
    kind = sec.text("kind", required=True,
                    choices=("cos2pi", "sin2pi", "constant", "coboundary", "piecewise-linear", "vector"))
    if kind in _BUILTIN:
        return _BUILTIN[kind]()
    if kind == "constant":
        return Constant(sec.number("value", 1.0))
    if kind == "coboundary":
        g = sec.text("g", "cos2pi", choices=tuple(_BUILTIN))
        return Coboundary(_BUILTIN[g](), system, sec.integer("letter", 0, minimum=0))
    if kind == "vector":
        names = [c.strip() for c in sec.text("components", required=True).split(",")]
        for c in names:
            if c not in _BUILTIN:
                raise ConfigError(sec.path("components"), f"unknown component {c!r}")
        return Stacked(tuple(_BUILTIN[c]() for c in names))
    return _wrap(sec.path("knots"), PiecewiseLinear, sec.numbers("knots", required=True),
                 sec.numbers("values", required=True))


def _wrap(field, fn, *args):
    try:
        return fn(*args)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(field, str(exc)) from None


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    run = _Section(parser, "run")
    seed = run.integer("seed", required=True)
    workers = run.integer("workers", 1, minimum=1)
    system = _parse_map(_Section(parser, "map"))
    process = _parse_process(_Section(parser, "process"), system)
    observable = _parse_observable(_Section(parser, "observable"), system)
    ens = _Section(parser, "ensemble")
    sched = _Section(parser, "schedule")
    n = sched.integers("n", required=True)
    if any(v < 1 for v in n):
        raise ConfigError(sched.path("n"), "horizons must be positive")
    bounds = _Section(parser, "bounds", required=False)
    zeta = bounds.number("zeta", 2.0)
    delta = bounds.number("delta", 0.1)
    model = None
    if bounds.text("mode", "fit", choices=("fit", "given")) == "given":
        model = _wrap(bounds.path("psi"), BoundModel.polynomial, bounds.number("psi", required=True),
                      bounds.number("gamma", required=True), zeta, delta)
    lim = _Section(parser, "limit", required=False)
    clt = _Section(parser, "clt", required=False)
    size = ens.integer("size", required=True, minimum=1)
    return ExperimentConfig(
        seed=seed, workers=workers, output_dir=run.text("output_dir", "results"),
        system=system, process=process, observable=observable,
        ensemble_mode=ens.text("mode", "sample", choices=("grid", "sample")),
        ensemble_size=size, schedule=tuple(sorted(set(n))),
        k_max=sched.integer("k_max", 4, minimum=0),
        realizations=sched.integer("realizations", 8, minimum=1),
        burn_in=sched.integer("burn_in", None, minimum=0),
        window=sched.integer("window", 8, minimum=0),
        bounds=model, zeta=zeta, delta=delta,
        pair_size=lim.integer("pair_size", min(size, 256), minimum=2),
        clt_size=clt.integer("ensemble_size", size, minimum=2),
        config_hash=_hash(parser))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
