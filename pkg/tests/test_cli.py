import io
import math
import subprocess
import sys

import pytest

from pcscs.channel import ChannelParams
from pcscs.cli import (CSV_HEADER, ConfigError, RunConfig, fmt, main, read_config_file,
                       read_sweep_csv, resolve_config, run, sweep_rows)
from pcscs.optimizer import optimize_point

FAST = ["--loss-grid", "0,30,60", "--n", "1e13,inf"]


def _run(argv):
    buf = io.StringIO()
    code = run(resolve_config(argv), buf)
    return code, buf.getvalue()


def _kv(text):
    out = {}
    for line in text.splitlines():
        k, _, v = line.partition(": ")
        out[k] = v
    return out


def test_defaults_are_reference_parameters():
    cfg = RunConfig()
    assert (cfg.det_eff, cfg.dark_rate, cfg.f_ec, cfg.e_mis, cfg.eps_total) == \
        (0.3, 5e-11, 1.1, 0.015, 1e-10)
    assert cfg.channel() == ChannelParams()


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0 ** -1074, 1.7976931348623157e308, 0.0, 1e13):
        assert float(fmt(x)) == x
    assert fmt(math.inf) == "inf"
    assert fmt(math.nan) == "nan"


def test_sweep_csv_round_trip(tmp_path):
    out = tmp_path / "curve.csv"
    code, msg = _run(["sweep", *FAST, "--out", str(out)])
    assert code == 0 and "6 rows" in msg
    raw = out.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").splitlines()[0] == ",".join(CSV_HEADER)
    rows = read_sweep_csv(out)
    assert len(rows) == 6
    cfg = resolve_config(["sweep", *FAST])
    expected = sweep_rows(cfg)
    for parsed, strings in zip(rows, expected):
        assert [parsed[k] for k in CSV_HEADER] == [float(s) for s in strings]
    assert math.isinf(rows[-1]["n_windows"])
    finite = rows[1]
    opt = optimize_point(ChannelParams(loss_db=30.0), 1e13)
    assert finite["key_rate"] == opt.rate
    assert finite["mu_opt"] == opt.mu
    assert finite["distance_km"] == 150.0


def test_sweep_empty_grid_is_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    assert main(["sweep", "--loss-min", "10", "--loss-max", "0", "--out", str(out)]) == 0
    assert out.read_text() == ",".join(CSV_HEADER) + "\n"
    assert read_sweep_csv(out) == []


def test_sweep_default_grid():
    cfg = resolve_config(["sweep"])
    grid = cfg.grid()
    assert grid[0] == 0.0 and grid[-1] == 80.0 and len(grid) == 41


def test_flags_override_file(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\nloss_db = 40\ne_mis = 0.02  # trailing\nseed = 3\n")
    cfg = resolve_config(["rate", "--config", str(conf), "--loss-db", "50"])
    assert cfg.loss_db == 50.0
    assert cfg.e_mis == 0.02
    assert cfg.seed == 3
    # a flag on the command line replaces the file's choice of loss or distance
    cfg = resolve_config(["rate", "--config", str(conf), "--distance-km", "100"])
    assert cfg.loss_db is None and cfg.resolved_loss() == pytest.approx(20.0)


def test_unknown_key_is_an_error(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("loss_db = 10\nlos_db = 20\n")
    assert main(["rate", "--config", str(conf)]) == 1
    assert "los_db" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        read_config_file(conf)


def test_unknown_flag_is_an_error():
    assert main(["rate", "--frobnicate", "1"]) == 1


@pytest.mark.parametrize("argv, key", [
    (["rate", "--mu", "abc"], "mu"),
    (["rate", "--eps-total", "1e-10x"], "eps_total"),
    (["sweep", "--n", "1e13,lots"], "n"),
    (["simulate", "--seed", "1.5"], "seed"),
])
def test_malformed_number_names_key(argv, key, capsys):
    assert main(argv) == 1
    assert repr(key) in capsys.readouterr().err


def test_malformed_file_value_names_key(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("dark_rate = five\n")
    assert main(["rate", "--config", str(conf)]) == 1
    assert "'dark_rate'" in capsys.readouterr().err


def test_loss_and_distance_are_exclusive(capsys):
    assert main(["rate", "--loss-db", "10", "--distance-km", "50"]) == 1


@pytest.mark.parametrize("argv", [["rate", "--e-mis", "0.6"], ["rate", "--p-est", "1"],
                                  ["rate", "--n", "0"], ["rate", "--eps-total", "2"]])
def test_invalid_physics_is_config_error(argv):
    assert main(argv) == 1


def test_rate_at_60db_positive_and_reproducible():
    code, a = _run(["rate", "--loss-db", "60"])
    _, b = _run(["rate", "--loss-db", "60"])
    assert code == 0 and a == b
    kv = _kv(a)
    assert float(kv["rate"]) > 0
    assert float(kv["distance_km"]) == 300.0


def test_rate_subprocess_bit_identical():
    cmd = [sys.executable, "-m", "pcscs", "rate", "--distance-km", "300"]
    a = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, text=True, check=True).stdout
    assert a == b and float(_kv(a)["rate"]) > 0


def test_rate_fixed_parameters():
    code, text = _run(["rate", "--loss-db", "20", "--mu", "0.002", "--p-est", "0.05", "--n", "1e12"])
    kv = _kv(text)
    assert code == 0 and float(kv["mu"]) == 0.002 and float(kv["p_est"]) == 0.05
    _, asy = _run(["rate", "--loss-db", "20", "--mu", "0.002", "--n", "inf"])
    kv2 = _kv(asy)
    assert kv2["mode"] == "asymptotic" and kv2["key_length"] == "inf"
    assert float(kv2["rate"]) > float(kv["rate"])


def test_simulate_prints_both_columns():
    code, text = _run(["simulate", "--loss-db", "10", "--n", "200000", "--seed", "1"])
    assert code == 0
    assert "analytic" in text and "simulated" in text
    assert any(line.startswith("n_ph_bar") for line in text.splitlines())


def test_simulate_rejects_fractional_windows():
    assert main(["simulate", "--n", "1e3.5"]) == 1
    assert main(["simulate", "--n", "inf"]) == 1


def test_validate_exit_codes(capsys):
    assert main(["validate", "--loss-db", "10", "--n", "300000", "--seed", "42"]) == 0
    assert "validation passed" in capsys.readouterr().out
    # an impossible tolerance must fail
    assert main(["validate", "--loss-db", "10", "--n", "300000", "--z-max", "1e-12"]) == 2
    assert "FAILED" in capsys.readouterr().out


@pytest.mark.slow
def test_validate_reference_run():
    assert main(["validate", "--seed", "42", "--n", "1e8", "--loss-db", "20", "--workers", "4"]) == 0
