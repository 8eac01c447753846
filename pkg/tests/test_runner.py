"""Tests for the run/describe coordinator, driven through experiment files on disk."""

import json

from nbody_wegner.artifacts import read_summary
from nbody_wegner.runner import EXIT_OK, EXIT_VALIDATION, describe, run


def _write(tmp_path, text, name="run.nbw"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _options(config, out, **extra):
    options = {"config": config, "out": str(out), "trials": None, "seed": None, "workers": 1}
    options.update(extra)
    return options


IDS_CONFIG = """\
# title: small ids
experiment.kind -- ids
system.L -- 5
experiment.trials -- 3
experiment.energies -- 0:4:1
"""


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    status = run(_options(_write(tmp_path, IDS_CONFIG), out))
    assert status == EXIT_OK
    assert (out / "ids-raw.csv").exists()
    assert (out / "ids-aggregate.csv").exists()
    assert (out / "ids-report.txt").exists()
    summary = read_summary(str(out / "ids-summary.json"))
    assert summary["summary"]["monotone_aggregate"]
    assert "Wrote" in capsys.readouterr().out


def test_run_applies_trial_and_seed_overrides(tmp_path):
    out = tmp_path / "out"
    assert run(_options(_write(tmp_path, IDS_CONFIG), out, trials=2, seed=11)) == EXIT_OK
    lines = (out / "ids-raw.csv").read_text(encoding="utf-8").splitlines()
    # hash line, header, 2 trials x 5 energies
    assert len(lines) == 2 + 2 * 5


def test_rerun_gives_identical_aggregate(tmp_path):
    config = _write(tmp_path, IDS_CONFIG)
    out = tmp_path / "out"
    assert run(_options(config, out)) == EXIT_OK
    first = (out / "ids-aggregate.csv").read_bytes()
    assert run(_options(config, out)) == EXIT_OK
    assert (out / "ids-aggregate.csv").read_bytes() == first
    assert (out / "checkpoints").is_dir()


def test_output_dir_in_config_wins(tmp_path):
    target = tmp_path / "chosen"
    text = IDS_CONFIG + f"output.dir -- {target}\noutput.formats -- json\n"
    assert run(_options(_write(tmp_path, text), tmp_path / "ignored")) == EXIT_OK
    assert json.loads((target / "ids-summary.json").read_text(encoding="utf-8"))["kind"] == "ids"
    assert not (tmp_path / "ignored" / "ids-summary.json").exists()


def test_run_invalid_config_exits_with_validation_status(tmp_path, capsys):
    status = run(_options(_write(tmp_path, "system.d -- 4\n"), tmp_path / "out"))
    assert status == EXIT_VALIDATION
    assert "system.d" in capsys.readouterr().err


def test_run_missing_config(tmp_path, capsys):
    status = run(_options(str(tmp_path / "absent.nbw"), tmp_path / "out"))
    assert status == EXIT_VALIDATION
    assert "Cannot read config" in capsys.readouterr().err


def test_run_refuses_overlapping_wegner2_boxes(tmp_path, capsys):
    text = ("experiment.kind -- wegner2\nsystem.L -- 5\nexperiment.windows -- 0:3\n"
            "experiment.box_b_centers -- 1\nexperiment.separation_R -- 1\n"
            "experiment.epsilons -- 0.1\nexperiment.trials -- 1\n")
    assert run(_options(_write(tmp_path, text), tmp_path / "out")) == EXIT_VALIDATION
    assert "separated" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# describe
# ---------------------------------------------------------------------------

def test_describe_reports_matrix_dimension(tmp_path, capsys):
    text = "system.d -- 1\nsystem.n -- 2\nsystem.L -- 10\nsystem.p -- 2\nexperiment.kind -- ids\nexperiment.energies -- 0:1:0.5\n"
    assert describe(_options(_write(tmp_path, text), tmp_path / "out")) == EXIT_OK
    out = capsys.readouterr().out
    assert "L=10: matrix dimension 361 (dense)" in out
    assert "Kind: ids" in out
    assert not (tmp_path / "out").exists()


def test_describe_flags_dimension_cap(tmp_path, capsys):
    text = "system.L -- 10\nsystem.p -- 2\nsystem.dimension_cap -- 10\n"
    assert describe(_options(_write(tmp_path, text), tmp_path / "out")) == EXIT_OK
    assert "REFUSED" in capsys.readouterr().out


def test_describe_shows_separation_witness(tmp_path, capsys):
    text = ("experiment.kind -- wegner2\nsystem.L -- 5\nexperiment.windows -- 0:3\n"
            "experiment.box_b_centers -- 20\nexperiment.separation_R -- 1\n"
            "experiment.epsilons -- 0.1\n")
    assert describe(_options(_write(tmp_path, text), tmp_path / "out")) == EXIT_OK
    assert "witness J=[1] condition" in capsys.readouterr().out


def test_describe_wegner1_warns_about_threshold(tmp_path, capsys):
    text = "experiment.kind -- wegner1\nsystem.L -- 5\nexperiment.windows -- 0:1\n"
    assert describe(_options(_write(tmp_path, text), tmp_path / "out")) == EXIT_OK
    assert "warning: L=5 is below the Wegner volume threshold" in capsys.readouterr().out


def test_describe_invalid_config(tmp_path, capsys):
    text = "experiment.kind -- ucp\nexperiment.windows -- 5:6\nexperiment.e0 -- 4\n"
    assert describe(_options(_write(tmp_path, text), tmp_path / "out")) == EXIT_VALIDATION
    assert capsys.readouterr().err.startswith("Error:")
