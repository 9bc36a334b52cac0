"""Command-line surface: exit codes, overrides, diagnostics."""

import pytest

from iaora.cli import main

GOOD = """experiment = mac-curve
K = 1
N = 50
p_list = 0.02, 0.04
slots = 1200
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(GOOD)
    return path


def test_validate_ok(config_file, capsys):
    assert main(["validate", "--config", str(config_file)]) == 0
    assert "config OK" in capsys.readouterr().out


def test_validate_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("experiment = mac-curve\nK = 0\nN = 5\n")
    assert main(["validate", "--config", str(path)]) == 2
    assert "K" in capsys.readouterr().err


def test_validate_missing_file(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "nope.cfg")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_run_writes_csv_and_summary(config_file, tmp_path, capsys):
    out = tmp_path / "res.csv"
    assert main(["run", "--config", str(config_file), "--output", str(out)]) == 0
    captured = capsys.readouterr().out
    assert out.exists()
    assert "results written" in captured
    assert "experiment: mac-curve" in captured


def test_run_seed_override_changes_rows(config_file, tmp_path):
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    out_c = tmp_path / "c.csv"
    main(["run", "--config", str(config_file), "--output", str(out_a), "--seed", "1"])
    main(["run", "--config", str(config_file), "--output", str(out_b), "--seed", "1"])
    main(["run", "--config", str(config_file), "--output", str(out_c), "--seed", "2"])
    assert out_a.read_text() == out_b.read_text()
    assert out_a.read_text() != out_c.read_text()


def test_run_unwritable_output(config_file, tmp_path, capsys):
    target = tmp_path / "missing-dir" / "res.csv"
    assert main(["run", "--config", str(config_file), "--output", str(target)]) == 3
    assert "error" in capsys.readouterr().err


def test_workers_flag_matches_serial(config_file, tmp_path):
    out1 = tmp_path / "w1.csv"
    out2 = tmp_path / "w2.csv"
    main(["run", "--config", str(config_file), "--output", str(out1), "--workers", "1"])
    main(["run", "--config", str(config_file), "--output", str(out2), "--workers", "2"])
    assert out1.read_text() == out2.read_text()
