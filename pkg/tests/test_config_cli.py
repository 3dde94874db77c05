import csv
import json
import subprocess
import sys

import pytest

from bilapeig.cli import main
from bilapeig.config import RunConfig, load_config
from bilapeig.errors import ConfigError


def write_config(path, text):
    path.write_text(text)
    return str(path)


def test_defaults_round_trip(tmp_path):
    path = write_config(tmp_path / "c.ini", RunConfig().to_ini())
    assert load_config(path) == RunConfig()


def test_defaults_command_writes_template(tmp_path):
    assert main(["defaults", "--out", str(tmp_path / "d.ini")]) == 0
    assert load_config(tmp_path / "d.ini") == RunConfig()


@pytest.mark.parametrize("key", ["r_max", "kmax", "lambda_bracket", "seed"])
def test_missing_key_exits_2_and_names_it(tmp_path, capsys, key):
    lines = [ln for ln in RunConfig().to_ini().splitlines() if not ln.startswith(f"{key} =")]
    path = write_config(tmp_path / "c.ini", "\n".join(lines))
    assert main(["potential", "--config", path, "--out", str(tmp_path)]) == 2
    assert repr(key) in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    path = write_config(tmp_path / "c.ini", RunConfig().to_ini() + "[extra]\nwobble = 3\n")
    assert main(["potential", "--config", path]) == 2
    assert "'wobble'" in capsys.readouterr().err


def test_key_in_wrong_section(tmp_path):
    text = RunConfig().to_ini().replace("kmax = 40\n", "").replace("[ode]\n", "[ode]\nkmax = 40\n")
    with pytest.raises(ConfigError, match="belongs in section"):
        load_config(write_config(tmp_path / "c.ini", text))


def test_radii_must_be_ordered():
    with pytest.raises(ConfigError):
        RunConfig(r2=2.6, r3=2.55)
    with pytest.raises(ConfigError):
        RunConfig(r_min=0.01)


def test_unparseable_value(tmp_path):
    text = RunConfig().to_ini().replace("seed = 0", "seed = zero")
    with pytest.raises(ConfigError, match="seed"):
        load_config(write_config(tmp_path / "c.ini", text))


def test_potential_artifacts(tmp_path):
    assert main(["potential", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "potential.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "u0", "theta"]
    meta = json.loads((tmp_path / "potential.json").read_text())
    assert meta["grid"]["nodes"] == len(rows) - 1
    manifest = json.loads((tmp_path / "manifest_potential.json").read_text())
    assert manifest["exit_status"] == 0
    assert manifest["artifacts"] == ["potential.csv", "potential.json"]


def test_eigen_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["eigen", "--out", str(a)]) == 0
    assert main(["eigen", "--out", str(b)]) == 0
    for name in ("eigen.json", "eigenfunction.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    obj = json.loads((a / "eigen.json").read_text())
    assert abs(obj["lambda0"] - 1.0) <= 1e-6


def test_bracket_without_eigenvalue_exits_3(tmp_path, capsys):
    text = RunConfig().to_ini().replace("lambda_bracket = 0.5, 2.0", "lambda_bracket = 1.5, 2.0")
    path = write_config(tmp_path / "c.ini", text)
    assert main(["eigen", "--config", path, "--out", str(tmp_path)]) == 3
    assert "EigenvalueNotFound" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "manifest_eigen.json").read_text())
    assert manifest["exit_status"] == 3


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "bilapeig.cli", "defaults"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "[simplicity]" in out.stdout
