import json
import subprocess
import sys

from hawkeslab.cli import main


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "grid_oracle" in out and "embedding" in out


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.ini", "[experiment]\nkind = walk\n\n[params]\nh = -1\n")
    assert main(["run", cfg]) == 2
    assert "CONFIG_INVALID" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 2


def test_run_small_config(tmp_path, capsys):
    cfg = _write(tmp_path, "walk.ini",
                 "[experiment]\nkind = walk\nseed = 1\nreplications = 2\n\n"
                 "[params]\nn_steps = 256\nwalks = 5\n")
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out), "--seed", "2", "--workers", "1"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["walks"] == 10
    doc = json.loads((out / "summary.json").read_text())
    assert doc["metadata"]["config"]["seed"] == 2


def test_oracle_needs_grid_kind(tmp_path):
    cfg = _write(tmp_path, "walk.ini", "[experiment]\nkind = walk\n")
    assert main(["oracle", cfg]) == 2


def test_oracle_runs(tmp_path, capsys):
    cfg = _write(tmp_path, "grid.ini",
                 "[experiment]\nkind = grid_oracle\n\n[params]\ntarget = renewal\n"
                 "displacement = family=deterministic a=1\nh = 0.5\nx_max = 20\n")
    assert main(["oracle", cfg, "--out", str(tmp_path / "o")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["U"]["10"] == 11.0


def test_entry_point_subprocess():
    res = subprocess.run([sys.executable, "-m", "hawkeslab.cli", "list"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "kesten" in res.stdout
