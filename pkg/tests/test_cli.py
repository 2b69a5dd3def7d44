import json
import subprocess
import sys

import pytest

from rndirac import cli
from rndirac.operators import RECORD_FIELDS


def run(tmp_path, *args):
    return cli.main([*args[:1], "--out", str(tmp_path), *args[1:]])


def test_parse_config_text_and_errors(tmp_path):
    raw = cli.parse_config_text("# header\nQ = 0.3  # charge\n\nkl = 0.5:1, -0.5:2\n")
    cfg = cli.build_config(raw)
    assert cfg["Q"] == 0.3 and cfg["kl"] == ((0.5, 1), (-0.5, 2))
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text("Q 0.3")
    for bad in ({"Q": "1.0"}, {"m": "0.1", "omega": "0.1"}, {"k": "1.0"}, {"l": "0"}, {"nope": "1"}, {"tol": "0.1"}, {"Q": "x"}):
        with pytest.raises(cli.ConfigError):
            cli.build_config(bad)


@pytest.mark.parametrize(
    "args",
    [
        ("mode", "omega=0.1"),  # on the mass shell
        ("mode", "unknown=3"),
        ("mode", "Q=1.2", "omega=0.3"),
        ("spectrum", "--config", "/nonexistent/cfg"),
        ("mode", "--tol", "0.5", "omega=0.3"),
    ],
)
def test_config_errors_exit_2(tmp_path, args, capsys):
    assert run(tmp_path, *args) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_mode_outputs_and_manifest(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("omega = 0.3\nQ = 0.6\n")
    assert run(tmp_path, "mode", "--config", str(cfg)) == 0
    man = json.loads((tmp_path / "mode.manifest.json").read_text())
    assert man["outputs"] == ["mode.csv", "mode_trajectory.csv"]
    assert man["config"]["omega"] == 0.3 and len(man["config_hash"]) == 64
    assert set(man["versions"]) >= {"rndirac", "numpy", "scipy", "python"}
    assert man["tolerances"]["rtol"] == man["config"]["tol"]
    head, row = (tmp_path / "mode.csv").read_text().splitlines()
    assert head.split(",") == cli.MODE_COLUMNS
    assert abs(float(row.split(",")[12])) < 1e-6  # pseudo-norm residual
    traj = (tmp_path / "mode_trajectory.csv").read_text().splitlines()
    assert traj[0].split(",") == cli.TRAJECTORY_COLUMNS and len(traj) > 10


def test_rerun_is_byte_identical_and_resume_skips(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["mode", "--out", str(d), "omega=-0.25", "l=-1"]) == 0
    for name in ("mode.csv", "mode_trajectory.csv", "mode.manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    capsys.readouterr()
    assert cli.main(["mode", "--out", str(a), "--resume", "omega=-0.25", "l=-1"]) == 0
    assert json.loads(capsys.readouterr().out) == {"skipped": True}


def test_spectrum_resume_without_duplicates(tmp_path):
    args = ["spectrum", "--out", str(tmp_path), "omegas=-0.3,-0.05,0.2,0.35", "kl=0.5:1"]
    assert cli.main(args) == 0
    path = tmp_path / "spectrum.csv"
    full = path.read_text()
    lines = full.splitlines()
    path.write_text("\n".join(lines[:2]) + "\n")
    assert cli.main(args + ["--resume"]) == 0
    assert path.read_text() == full
    assert lines[0].split(",") == RECORD_FIELDS and len(lines) == 5


def test_empty_grid_warns(tmp_path, caplog):
    assert cli.main(["spectrum", "--out", str(tmp_path)]) == 0
    assert "empty grid" in caplog.text
    assert (tmp_path / "spectrum.csv").read_text().splitlines() == [",".join(RECORD_FIELDS)]
    assert json.loads((tmp_path / "spectrum.manifest.json").read_text())["summary"]["empty_grid"]


def test_numerical_failure_exits_3(tmp_path, capsys):
    # l = 40 lies outside the default angular window, so every record fails
    assert cli.main(["spectrum", "--out", str(tmp_path), "omegas=0.3", "kl=0.5:40"]) == cli.EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err
    assert "failed" in (tmp_path / "spectrum.csv").read_text()


def test_selftest_passes(tmp_path):
    assert cli.main(["selftest", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "selftest.csv").read_text().splitlines()[1:]
    assert rows and all(r.endswith("True") for r in rows)


def test_schema_ships_and_lists_outputs():
    text = cli.SCHEMA_PATH.read_text()
    for col in cli.MODE_COLUMNS + RECORD_FIELDS + cli.FIT_COLUMNS:
        assert col in text


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rndirac.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "rndirac" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "rndirac.cli", "mode", "--out", str(tmp_path), "omega=0.1"], capture_output=True, text=True)
    assert proc.returncode == 2


def test_omega_command_small_grid(tmp_path):
    assert cli.main(["omega", "--out", str(tmp_path), "omegas=0.05,0.3"]) == 0
    fits = (tmp_path / "omega_fit.csv").read_text().splitlines()
    kinds = [r.split(",")[4] for r in fits[1:]]
    assert kinds.count("diagonal_power") == 1 and kinds.count("flux_eigenvalue") == 2
    summary = json.loads((tmp_path / "omega.manifest.json").read_text())["summary"]
    assert summary["min_diagonal_power"] >= 0.95 and "flux_normalisation" in summary


def test_evolve_command_small_grid(tmp_path):
    args = ["u_min=20", "u_max=120", "u_count=801", "center=70", "half_width=30", "band_count=41", "tau_max=10", "tau_count=3"]
    assert cli.main(["evolve", "--out", str(tmp_path), *args]) == 0
    lines = (tmp_path / "evolve.csv").read_text().splitlines()
    assert len(lines) == 4
    summary = json.loads((tmp_path / "evolve.manifest.json").read_text())["summary"]
    # a coarse band; precision is covered by the evolution tests
    assert 0 <= summary["norm_drift"] < 1e-2 and "reconstruction_error" in summary


def test_evolve_aliasing_is_config_error(tmp_path):
    args = ["u_min=20", "u_max=120", "u_count=401", "center=70", "half_width=30", "band_count=6", "tau_max=500", "tau_count=2"]
    assert cli.main(["evolve", "--out", str(tmp_path), *args]) == cli.EXIT_CONFIG
