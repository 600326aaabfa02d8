"""Config parsing, CLI exit discipline, determinism, export formats."""

import re
from pathlib import Path

import pytest

from wptrx.cli import main
from wptrx.config import parse_config, parse_config_text, parse_value
from wptrx.errors import ConfigSyntax, MissingKey, UnknownKey
from wptrx.params import validate

REPO = Path(__file__).resolve().parent.parent


def test_prefix_folding():
    assert parse_value("1000u", 1) == pytest.approx(1e-3, rel=1e-12)
    assert parse_value("3.63n", 1) == pytest.approx(3.63e-9, rel=1e-12)
    assert parse_value("200k", 1) == pytest.approx(2e5, rel=1e-12)
    assert parse_value("5m", 1) == pytest.approx(5e-3, rel=1e-12)
    assert parse_value("2M", 1) == pytest.approx(2e6, rel=1e-12)
    assert parse_value("1.5e-7", 1) == pytest.approx(1.5e-7, rel=1e-12)
    with pytest.raises(ConfigSyntax):
        parse_value("12 pF", 1)
    with pytest.raises(ConfigSyntax):
        parse_value("fast", 1)


def test_shipped_prototype_config_parses():
    rc = parse_config(REPO / "configs" / "table2.cfg")
    vp = validate(rc.params)
    assert vp.l_s == pytest.approx(172e-6, rel=1e-12)
    assert vp.c_s == pytest.approx(3.63e-9, rel=1e-12)
    assert vp.c_o == pytest.approx(1e-3, rel=1e-12)
    assert vp.f_s == pytest.approx(200e3, rel=1e-12)
    assert vp.c_sum == pytest.approx(9e-9, rel=1e-12)
    assert rc.v_ref == 24.0
    assert rc.duty == pytest.approx(0.532)
    assert vp.warnings == ()


def test_config_rejects_duplicates_and_unknowns():
    with pytest.raises(ConfigSyntax):
        parse_config_text("l_s = 1u\nl_s = 2u\n")
    with pytest.raises(UnknownKey):
        parse_config_text("coil = 172u\n")
    with pytest.raises(MissingKey):
        parse_config_text("l_s = 172u\n")
    with pytest.raises(ConfigSyntax):
        parse_config_text("l_s 172u\n")


def test_cli_validate_ok(capsys):
    assert main(["validate", "--config",
                 str(REPO / "configs" / "table2.cfg")]) == 0
    out = capsys.readouterr().out
    assert "c_sum" in out


def test_cli_exit_code_config_error(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("l_s = 172u\nl_s = 172u\n")
    assert main(["validate", "--config", str(bad)]) == 2
    zero = tmp_path / "zero.cfg"
    zero.write_text(
        "l_s = 172u\nc_s = 3.63n\nc_s1 = 4.5n\nc_d1 = 4.5n\nc_o = 1000u\n"
        "r_load = 38.09\nf_s = 200k\ni_ls_amp = 0\n")
    assert main(["validate", "--config", str(zero)]) == 2


def test_cli_exit_code_numerical_failure(tmp_path, capsys):
    # a heavy load pushes the exact commutation past reach: the node swing
    # cannot cover the output voltage
    cfg = tmp_path / "hard.cfg"
    cfg.write_text(
        "l_s = 172u\nc_s = 3.68n\nc_s1 = 4.5n\nc_d1 = 4.5n\nc_o = 100u\n"
        "r_load = 3000\nf_s = 200k\ni_ls_amp = 1\n")
    assert main(["steady", "--config", str(cfg), "--duty", "0.55",
                 "--exact"]) == 3


def test_cli_exit_code_unknown(capsys):
    assert main(["frobnicate"]) == 4
    assert main(["reproduce", "fig99"]) == 4


def test_cli_steady_and_bode_outputs(tmp_path, capsys):
    cfg = str(REPO / "configs" / "table2.cfg")
    out = tmp_path / "o1"
    assert main(["steady", "--config", cfg, "--sweep", "0.5:0.7:0.05",
                 "--out", str(out)]) == 0
    lines = (out / "steady.csv").read_text().splitlines()
    assert lines[0] == "duty,t_f,phase_delay_norm,v_o,regulable"
    assert len(lines) == 6
    assert main(["bode", "--config", cfg, "--out", str(out)]) == 0
    blines = (out / "bode.csv").read_text().splitlines()
    assert blines[0] == "f_hz,mag_db,phase_deg"
    assert len(blines) == 92


def test_cli_reproduce_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["reproduce", "fig9", "--out", str(out1)]) == 0
    assert main(["reproduce", "fig9", "--out", str(out2)]) == 0
    assert (out1 / "fig9.csv").read_bytes() == (out2 / "fig9.csv").read_bytes()
    header = (out1 / "fig9.csv").read_text().splitlines()[0]
    assert header == "f_hz,ol_mag_db,ol_phase_deg,cl_mag_db,cl_phase_deg"


def test_cli_reproduce_fig7_grid(tmp_path):
    out = tmp_path / "f7"
    assert main(["reproduce", "fig7", "--out", str(out)]) == 0
    for name in ("fig7_analytic.csv", "fig7_oracle.csv"):
        lines = (out / name).read_text().splitlines()
        assert lines[0] == "f_hz,mag_db,phase_deg"
        assert len(lines) == 92  # 30 points/decade over 3 decades
        first = float(lines[1].split(",")[0])
        last = float(lines[-1].split(",")[0])
        assert first == pytest.approx(10.0, rel=1e-9)
        assert last == pytest.approx(10e3, rel=1e-9)
    assert (out / "plot_tables.py").exists()


def test_cli_simulate_table_format(tmp_path):
    cfg = str(REPO / "configs" / "table2.cfg")
    out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--cycles", "3",
                 "--out", str(out)]) == 0
    raw = (out / "waveform.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "t,i_ls,v_cs1,v_cd1,v_o,gate,state"
    row = lines[2].split(",")
    assert re.fullmatch(r"-?\d\.\d{11}e[+-]\d+", row[1])
    assert row[5] in ("0", "1") and row[6] in "12345"
    elines = (out / "events.csv").read_text().splitlines()
    assert elines[0] == "t,event"
    names = {ln.split(",")[1] for ln in elines[1:]}
    assert names <= {"gate_on", "gate_off", "cs1_zero", "cd1_zero",
                     "ils_zero", "cycle_start", "hard_switch"}
