import json
import os
import subprocess
import sys

import pytest

from bdris.cli import main, run
from bdris.results import ResultTable

SMALL = """[geometry]
m_x = 4
m_y = 4
[eval]
trials = 30
aber_trials = 10
aber_symbols_per_trial = 50
[ris]
architectures = active, dris, bd, bd:2:mirror
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return str(path)


def test_complexity_outputs(tmp_path, capsys):
    assert main(["complexity", "--out", str(tmp_path), "--quiet"]) == 0
    counts = ResultTable.read(tmp_path / "complexity_counts.csv")
    by_arch = dict(zip(counts.column("architecture"), counts.column("circuit_count")))
    assert by_arch["bd_full"] == 20100 and by_arch["active"] == 100
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["artifacts"]) >= {"complexity_counts.csv", "complexity_relative.csv"}
    assert capsys.readouterr().out == ""


def test_verify_propositions_pass(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[eval]\ntrials = 2000\n")
    assert main(["verify-propositions", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4 and "FAIL" not in out


def test_beampattern_gate(tmp_path, small_config):
    manifest = run("beampattern", small_config, str(tmp_path), quiet=True)
    assert manifest.gates == {"bd_equals_active_pattern": True}
    assert (tmp_path / "pattern_bd_g2_mirror_linear.csv").exists()


def test_rate_run_is_reproducible(tmp_path, small_config):
    a = run("rate", small_config, str(tmp_path / "a"), quiet=True)
    b = run("rate", small_config, str(tmp_path / "b"), quiet=True)
    assert a.artifacts == b.artifacts
    assert "scattering_bd_trial0.csv" in a.artifacts
    c = run("rate", small_config, str(tmp_path / "c"), seed_override=5, quiet=True)
    assert c.artifacts["rate.csv"] != a.artifacts["rate.csv"]


@pytest.mark.parametrize("experiment", ["aber", "sweep", "cav-surface"])
def test_other_experiments_write_tables(experiment, tmp_path, small_config):
    manifest = run(experiment, small_config, str(tmp_path), quiet=True)
    assert manifest.passed
    for name, digest in manifest.artifacts.items():
        assert os.path.exists(tmp_path / name) and len(digest) == 64


def test_exit_codes(tmp_path, capsys):
    assert main(["nonsense", "--out", str(tmp_path)]) == 2
    assert "error[usage]" in capsys.readouterr().err
    assert main(["complexity", "--config", str(tmp_path / "missing.ini")]) == 3
    assert "not found" in capsys.readouterr().err
    bad = tmp_path / "bad.ini"
    bad.write_text("[ris]\ngroup_count = 7\narchitectures = bd\n[link]\nmodulation_order = 3\n")
    assert main(["complexity", "--config", str(bad), "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "ris.group_count" in err and "link.modulation_order" in err
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["complexity", "--out", str(blocker / "sub")]) == 4
    assert "error[output]" in capsys.readouterr().err
    assert main(["complexity", "--seed", "-1", "--out", str(tmp_path)]) == 3
    with pytest.raises(SystemExit) as info:
        main(["complexity", "--threads", "many"])
    assert info.value.code == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bdris.cli", "complexity", "--out", str(tmp_path),
                           "--quiet"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
