import filecmp
import json
import os

import pytest

from quenched_clt.cli import main

DOUBLING = """
[run]
seed = 2024
workers = 1
output_dir = {out}

[map]
family = doubling
letters = 2

[process]
kind = iid

[observable]
kind = cos2pi

[ensemble]
mode = grid
size = {size}

[schedule]
n = 2, 4, 8
k_max = 2
burn_in = 4
realizations = 4

[limit]
pair_size = 1024
"""


def write_config(tmp_path, size=65536, name="c.ini"):
    out = tmp_path / "out"
    path = tmp_path / name
    path.write_text(DOUBLING.format(out=out, size=size))
    return str(path), out


def test_rates_prints_main_rate(capsys):
    assert main(["rates", "--psi", "3", "--gamma", "2", "--zeta", "2", "--delta", "0.1"]) == 0
    assert capsys.readouterr().out.strip() == "n^{-1/2} log^{1.6} n"


def test_rates_parameter_error_exit_code(capsys):
    assert main(["rates", "--psi", "0.5", "--gamma", "2"]) == 2
    assert "psi" in capsys.readouterr().err


def test_run_writes_all_sections(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["run", "--config", cfg]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    for section in ("quenched", "limit-variance", "rate", "clt"):
        assert section in manifest["sections"]
    assert manifest["bound_model"]["source"] == "fit"
    for name in manifest["csv"]:
        first = (out / name).read_text().splitlines()[0]
        assert first == f"# config_hash={manifest['config_hash']}"
    est = manifest["sections"]["limit-variance"]["estimates"]
    assert all(abs(v - 0.5) < 1e-9 for v in est.values())


def test_byte_identical_across_worker_counts(tmp_path):
    cfg, out = write_config(tmp_path)
    assert main(["run", "--config", cfg, "--output", str(tmp_path / "w1")]) == 0
    assert main(["run", "--config", cfg, "--workers", "3", "--output", str(tmp_path / "w3")]) == 0
    names = sorted(n for n in os.listdir(tmp_path / "w1"))
    assert names == sorted(os.listdir(tmp_path / "w3"))
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "w1", tmp_path / "w3", names, shallow=False)
    assert not mismatch and not errors


def test_precision_cap_reported(tmp_path, capsys):
    cfg, _ = write_config(tmp_path, size=64)
    assert main(["simulate", "--config", cfg]) == 2
    assert "at most 4 map applications" in capsys.readouterr().err


def test_config_error_names_field(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(DOUBLING.format(out=tmp_path, size=64).replace("n = 2, 4, 8", "n = two"))
    assert main(["simulate", "--config", str(path)]) == 2
    assert "schedule.n" in capsys.readouterr().err


def test_limit_all_routes(tmp_path, capsys):
    cfg, _ = write_config(tmp_path)
    assert main(["limit", "--config", cfg, "--route", "all"]) == 0
    out = capsys.readouterr().out
    assert out.count("sigma^2 =") == 3 and "routes consistent" in out


def test_variance_and_positivity(tmp_path, capsys):
    cfg, _ = write_config(tmp_path)
    assert main(["variance", "--config", cfg]) == 0
    path = tmp_path / "p.ini"
    path.write_text(open(cfg).read().replace("n = 2, 4, 8", "n = 2, 4, 8, 12"))
    assert main(["positivity", "--config", str(path)]) == 0
    assert "verdict: positive" in capsys.readouterr().out


@pytest.mark.slow
def test_audit_passes(capsys):
    assert main(["audit"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 10
