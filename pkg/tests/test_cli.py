import json
import logging

import pytest

from app.apis.cli import build_parser, main, merged_values
from app.services.experiment_runner import summary_path
from app.utils.logger import ROOT


def test_bounds_json(capsys):
    assert main(["bounds", "--n", "40", "--epsilon", "0.5", "--json"]) == 0
    values = json.loads(capsys.readouterr().out)
    assert values["entropy_gap_bound"] == pytest.approx(0.02917, abs=1e-5)
    assert values["leak_bound"] == pytest.approx(0.292481, abs=1e-6)


def test_bounds_text_marks_undefined(capsys):
    assert main(["bounds", "--n", "11"]) == 0
    out = capsys.readouterr().out
    assert "entropy_gap_bound" in out
    assert "undefined" in out


def test_verify_entropy(capsys):
    assert main(["verify", "--scope", "entropy"]) == 0
    out = capsys.readouterr().out
    assert "info_set_size_full" in out
    assert "FAIL" not in out


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = main(["run", "--protocol", "p2", "--n", "2", "--trials", "4", "--seed", "3",
                 "--out", str(out), "--workers", "1"])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["trials"] == 4
    assert summary["master_seed"] == 3
    assert out.exists()
    assert summary_path(out).exists()


def test_odd_n_is_rejected():
    assert main(["run", "--n", "3", "--trials", "1"]) == 2


def test_unknown_attack_is_rejected():
    assert main(["run", "--n", "2", "--attack", "beam_splitter"]) == 2


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "experiment.env"
    path.write_text("n=4\ntrials=10\nattack=rotation_probe\ntheta=0.3\n", encoding="utf-8")
    args = build_parser().parse_args(["run", "--config", str(path), "--trials", "2", "--theta", "0.5"])
    values = merged_values(args)
    assert values["n"] == "4"
    assert values["trials"] == 2
    assert values["theta"] == 0.5
    assert values["attack"] == "rotation_probe"


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--n", "2", "--trials", "3", "--attack", "rotation_probe", "--p-ctrl", "1.0",
                 "--sweep", "theta", "--values", "0,0.5", "--out", str(out)])
    assert code == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["value"] for r in rows] == [0.0, 0.5]
    assert out.read_text(encoding="utf-8").startswith("value,")


def test_log_level_flag_sets_run_wide_level():
    root = logging.getLogger(ROOT)
    previous = root.level
    try:
        assert main(["--log-level", "ERROR", "bounds", "--n", "40"]) == 0
        assert root.level == logging.ERROR
    finally:
        root.setLevel(previous)
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--log-level", "LOUD", "bounds"])
