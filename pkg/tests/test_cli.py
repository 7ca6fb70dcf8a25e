import json
import subprocess
import sys

import pytest

from rank_ucr.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

SMALL = dict(n=4, k=2, d=2, t=12, t0=3, runs=2, base_seed=1,
             policies=[{"kind": "ucr", "xi": 1.0}, {"kind": "gmle"}])


@pytest.fixture
def config(tmp_path):
    def write(**change):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({**SMALL, "output": str(tmp_path / "res" / "exp"), **change}))
        return p
    return write


def test_run_writes_both_files(config, tmp_path):
    assert main(["run", "--config", str(config()), "--threads", "1"]) == EXIT_OK
    assert (tmp_path / "res" / "exp_raw.csv").exists()
    assert (tmp_path / "res" / "exp_agg.csv").exists()


def test_output_override(config, tmp_path):
    out = tmp_path / "elsewhere" / "x"
    assert main(["run", "--config", str(config()), "--output", str(out), "--threads", "1"]) == EXIT_OK
    assert (tmp_path / "elsewhere" / "x_raw.csv").exists()


def test_validate_and_theory(config, capsys):
    assert main(["validate", "--config", str(config())]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["valid"] is True
    assert main(["theory", "--config", str(config())]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["theoretical_xi"] > 0 and rep["t0_lower_bound"] > 0


@pytest.mark.parametrize("change", [{"k": 9}, {"extra": True}, {"policies": [{"kind": "nope"}]}])
def test_bad_config_exit_code(config, change):
    assert main(["validate", "--config", str(config(**change))]) == EXIT_CONFIG


def test_missing_config_and_bad_usage(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main([]) == EXIT_CONFIG


def test_runtime_failure_exit_code(config):
    # without a covariance ridge the unseen items make UCR fail after init
    p = config(n=6, k=1, d=3, t0=1, cov_ridge=0.0, policies=[{"kind": "ucr", "xi": 1.0}])
    assert main(["run", "--config", str(p), "--threads", "1"]) == EXIT_RUNTIME


def test_unwritable_output_is_runtime_error(config, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--config", str(config(output=str(blocker / "sub" / "x"))), "--threads", "1"]) == EXIT_RUNTIME


def test_console_module_entry(config):
    r = subprocess.run([sys.executable, "-m", "rank_ucr.cli", "validate", "--config", str(config())],
                       capture_output=True, text=True)
    assert r.returncode == 0
