"""
[Purpose] Tests of the command-line entry point: exit codes, printed tables and written files
"""

from pathlib import Path

import pandas as pd
import pytest

from src.main import EXIT_INVALID, EXIT_OK, main
from src.models.schemas import RunConfig
from src.services.config_io import load_config, parse_config

CONFIG_DIR = Path(__file__).parent / "configs"


def test_print_defaults_parses_back(capsys):
    assert main(["print-defaults"]) == EXIT_OK
    assert parse_config(capsys.readouterr().out) == RunConfig()


def test_invalid_value_exits_with_two(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[devices.gfm]\ndroop_mp = -0.01\n")
    assert main(["simulate", "--config", str(path)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert err.startswith("config error:")
    assert "devices.gfm.droop_mp" in err


def test_unknown_key_exits_with_two(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[scenario]\nspeed = 3\n")
    assert main(["powerflow", "--config", str(path)]) == EXIT_INVALID
    assert "scenario.speed: unknown key" in capsys.readouterr().err


def test_tco_prints_one_row_per_option(capsys):
    assert main(["tco", "--distance", "40"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("| option |")
    assert len(lines) == 2 + 4


def test_tco_sweep_writes_report(tmp_path, capsys):
    assert main(["tco", "--sweep", "--out", str(tmp_path)]) == EXIT_OK
    costs = pd.read_csv(tmp_path / "tco_sweep.csv")
    assert costs.shape == (101, 5)
    assert (tmp_path / "tco_report.md").exists()
    assert "markdown:" in capsys.readouterr().out


def test_powerflow_prints_bus_table(capsys):
    assert main(["powerflow"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# Power flow (zero inertia")
    assert "| hub |" in out
    assert "| conv1 |" in out


def test_simulate_writes_trace_and_report(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[scenario]\nname = "s2-converter-trip"\nt_event = "0.1 s"\nt_end = "0.4 s"\n')
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == EXIT_OK
    trace = pd.read_csv(tmp_path / "s2-converter-trip_zero_phasor.csv")
    assert trace.columns[0] == "time_s"
    assert {"v_hub_pu", "f_offshore_hz", *(f"p_conv{k}_pu" for k in range(1, 6))} <= set(trace.columns)
    assert (tmp_path / "scenario_report.md").exists()


def _command_for(path):
    cfg = load_config(path)
    text = path.read_text()
    if "[tco]" in text and "[scenario]" not in text:
        return ["tco", "--sweep", "--config", str(path)]
    if cfg.scenario.mode == "both":
        return ["compare", "--config", str(path)]
    return ["simulate", "--config", str(path)]


@pytest.mark.slow
@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configuration_runs_end_to_end(path, tmp_path):
    assert main([*_command_for(path), "--out", str(tmp_path)]) == EXIT_OK
    assert any(tmp_path.glob("*.md"))
