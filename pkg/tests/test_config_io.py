import json
import math

import numpy as np
import pytest

from quenched_clt.config import parse_config
from quenched_clt.errors import ConfigError
from quenched_clt.io import read_csv, write_csv, write_manifest

BASE = """
[run]
seed = 5
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
size = 256

[schedule]
n = 8, 4, 16
"""


def test_parse_minimal_config():
    cfg = parse_config(BASE)
    assert cfg.schedule == (4, 8, 16) and cfg.seed == 5 and cfg.bounds is None
    assert cfg.system.parameters == (2.0, 3.0) and cfg.process.kind == "markov"


def test_hash_ignores_workers_and_output():
    a = parse_config(BASE)
    b = parse_config(BASE.replace("workers = 1", "workers = 8").replace("output_dir = out", "output_dir = x"))
    c = parse_config(BASE.replace("seed = 5", "seed = 6"))
    assert a.config_hash == b.config_hash != c.config_hash


@pytest.mark.parametrize("edit,field", [
    (("seed = 5\n", ""), "run.seed"),
    (("workers = 1", "workers = 0"), "run.workers"),
    (("n = 8, 4, 16", "n = 8, x"), "schedule.n"),
    (("n = 8, 4, 16", "n = 0, 4"), "schedule.n"),
    (("family = beta", "family = logistic"), "map.family"),
    (("slopes = 2, 3", "slopes = 0.5, 3"), "map.slopes"),
    (("transition = 0.9, 0.1; 0.1, 0.9", "transition = 0.9, 0.2; 0.1, 0.9"), "process.transition"),
    (("kind = cos2pi", "kind = wavelet"), "observable.kind"),
    (("size = 256", "size = many"), "ensemble.size"),
])
def test_config_errors_name_the_field(edit, field):
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace(*edit))
    assert err.value.field == field and str(err.value).startswith(field)


def test_missing_section():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace("[schedule]\nn = 8, 4, 16\n", ""))
    assert err.value.field == "schedule"


def test_given_bounds_and_observable_kinds():
    text = BASE + "\n[bounds]\nmode = given\npsi = 3\ngamma = 2\nzeta = 0.5\n"
    cfg = parse_config(text)
    assert (cfg.bounds.psi, cfg.bounds.gamma, cfg.bounds.zeta) == (3.0, 2.0, 0.5)
    cob = parse_config(BASE.replace("kind = cos2pi", "kind = coboundary\ng = sin2pi\nletter = 1"))
    assert type(cob.observable).__name__ == "Coboundary"
    pl = parse_config(BASE.replace("kind = cos2pi", "kind = piecewise-linear\nknots = 0, 0.5, 1\nvalues = 0, 1, 0"))
    assert pl.observable(np.array([0.25]))[0] == 0.5


def test_csv_roundtrip_and_float_repr(tmp_path):
    path = tmp_path / "t.csv"
    vals = [(1, 0.1 + 0.2, True), (2, math.nan, False)]
    write_csv(str(path), ("n", "x", "ok"), vals, "abc123")
    h, cols, rows = read_csv(str(path))
    assert h == "abc123" and cols == ["n", "x", "ok"]
    assert float(rows[0][1]) == 0.1 + 0.2 and rows[1][1] == "nan" and rows[0][2] == "true"
    with pytest.raises(ValueError):
        write_csv(str(path), ("a",), [(1, 2)], "h")


def test_manifest_is_sorted_and_json_safe(tmp_path):
    p = write_manifest(str(tmp_path / "m.json"), {"b": math.inf, "a": np.float64(1.5), "c": np.arange(2)})
    text = open(p).read()
    assert json.loads(text) == {"a": 1.5, "b": "inf", "c": [0, 1]}
    assert text.index('"a"') < text.index('"b"')
