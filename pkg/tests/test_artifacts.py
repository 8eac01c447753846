"""Unit tests for artifact rendering and writing."""

import json
import math
import os

import numpy as np
import pytest
from nbody_wegner.artifacts import (
    ArtifactError, build_summary, read_summary, render_csv, render_plot, render_report,
    write_artifacts,
)
from nbody_wegner.config import config_hash, parse_config
from nbody_wegner.experiments import ExperimentResult


def _result():
    return ExperimentResult(
        "ids",
        raw=[{"trial": 0, "E": 0.5, "count": 3}, {"trial": 1, "E": 0.5, "count": 4}],
        aggregate=[{"E": 0.5, "ids": 0.35, "ci_lo": 0.3, "ci_hi": 0.4}],
        summary={"monotone": True, "max_ids": np.float64(0.35), "ratio": {"first": 1.0}},
        plots={"ids": [(0.5, 0.35, 0.3, 0.4)]},
        warnings=["atomic coupling law"],
    )


def _cfg():
    return parse_config("# title: unit\nexperiment.kind -- ids\nexperiment.energies -- 0:1:0.5\n")


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def test_csv_starts_with_hash_line():
    text = render_csv([{"a": 1, "b": 0.1}], "abc")
    lines = text.splitlines()
    assert lines[0] == "# config_hash: abc"
    assert lines[1] == "a,b"
    assert lines[2] == "1,0.1"


def test_csv_of_no_rows_has_only_hash_line():
    assert render_csv([], "abc") == "# config_hash: abc\n"


def test_csv_renders_booleans_and_infinity():
    text = render_csv([{"ok": True, "ratio": math.inf}], "h")
    assert text.splitlines()[2] == "true,inf"


def test_csv_keeps_full_float_precision():
    text = render_csv([{"x": 1 / 3}], "h")
    assert repr(1 / 3) in text


def test_plot_has_header_and_columns():
    text = render_plot([(1.0, 2.0, 1.5, 2.5)], "ids", "h")
    lines = text.splitlines()
    assert lines[1] == "# series: ids"
    assert lines[2] == "x y ci_lo ci_hi"
    assert lines[3] == "1.0 2.0 1.5 2.5"


def test_summary_carries_config_and_hash():
    cfg = _cfg()
    summary = build_summary(_result(), cfg, "h")
    assert summary["config_hash"] == "h"
    assert summary["config"]["values"]["experiment.kind"] == "ids"
    assert summary["warnings"] == ["atomic coupling law"]


def test_report_lists_summary_and_warnings():
    text = render_report(_result(), _cfg(), "h")
    assert "Experiment: unit" in text
    assert "  ratio.first: 1" in text
    assert "  - atomic coupling law" in text
    assert "Aggregates" in text


# ---------------------------------------------------------------------------
# write_artifacts
# ---------------------------------------------------------------------------

def test_writes_every_format(tmp_path):
    cfg = _cfg()
    paths = write_artifacts(_result(), cfg, config_hash(cfg), str(tmp_path / "out"))
    names = sorted(os.path.basename(p) for p in paths)
    assert names == ["ids-aggregate.csv", "ids-ids.dat", "ids-raw.csv", "ids-report.txt",
                     "ids-summary.json"]


def test_format_subset(tmp_path):
    paths = write_artifacts(_result(), _cfg(), "h", str(tmp_path), formats=["json"])
    assert [os.path.basename(p) for p in paths] == ["ids-summary.json"]


def test_summary_json_is_readable(tmp_path):
    cfg = _cfg()
    write_artifacts(_result(), cfg, config_hash(cfg), str(tmp_path), formats=["json"])
    data = read_summary(str(tmp_path / "ids-summary.json"))
    assert data["summary"]["max_ids"] == 0.35
    assert data["config_hash"] == config_hash(cfg)


def test_identical_inputs_give_identical_bytes(tmp_path):
    cfg = _cfg()
    a = write_artifacts(_result(), cfg, "h", str(tmp_path / "a"))
    b = write_artifacts(_result(), cfg, "h", str(tmp_path / "b"))
    for pa, pb in zip(a, b):
        with open(pa, "rb") as fa, open(pb, "rb") as fb:
            assert fa.read() == fb.read()


def test_unwritable_directory_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ArtifactError, match="Cannot create output directory"):
        write_artifacts(_result(), _cfg(), "h", str(blocker / "sub"))


def test_read_summary_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ArtifactError, match="Cannot read summary"):
        read_summary(str(path))


def test_summary_is_plain_json(tmp_path):
    write_artifacts(_result(), _cfg(), "h", str(tmp_path), formats=["json"])
    with open(tmp_path / "ids-summary.json", encoding="utf-8") as f:
        assert json.load(f)["kind"] == "ids"
