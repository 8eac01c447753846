"""Unit tests for Delone set generation, verification, splitting and point-list files."""

import numpy as np
import pytest
from nbody_wegner.delone import (
    DeloneError, DeloneSet, cell_index, generate_delone, read_delone, split_delone, verify_delone,
    write_delone,
)
from nbody_wegner.geometry import Box1


def _integers(lo, hi):
    return np.arange(lo, hi + 1, dtype=float).reshape(-1, 1)


# ---------------------------------------------------------------------------
# verify_delone
# ---------------------------------------------------------------------------

def test_integer_lattice_is_delone():
    report = verify_delone(_integers(-10, 10), 1.0, 1.5, Box1((0.0,), 20))
    assert report
    assert report.violation is None


def test_close_pair_violates_spacing():
    points = np.array([[0.0], [0.5], [3.0]])
    report = verify_delone(points, 1.0, 4.0, Box1((0.0,), 20))
    assert not report
    assert report.violation == "spacing"
    assert report.cube.side == 1.0


def test_missing_lattice_point_violates_covering():
    points = np.array([[x] for x in range(-10, 11) if x != 0], dtype=float)
    report = verify_delone(points, 1.0, 1.5, Box1((0.0,), 20))
    assert not report
    assert report.violation == "covering"
    assert abs(report.cube.center[0]) <= 0.25


def test_planar_lattice_is_delone():
    points = np.array([[x, y] for x in range(-6, 7) for y in range(-6, 7)], dtype=float)
    assert verify_delone(points, 1.0, 1.0, Box1((0.0, 0.0), 12))


# ---------------------------------------------------------------------------
# generate_delone
# ---------------------------------------------------------------------------

def test_zero_jitter_gives_lattice():
    delone = generate_delone(1.0, 2.0, Box1((0.0,), 10), seed=0, jitter=0.0)
    assert delone.points[:, 0].tolist() == [-4.0, -2.0, 0.0, 2.0, 4.0]
    assert verify_delone(delone.points, 1.0, 2.0, delone.box)


def test_jittered_set_passes_verification():
    box = Box1((0.0, 0.0), 30)
    delone = generate_delone(1.0, 3.0, box, seed=11, jitter=0.5)
    assert len(delone) > 0
    assert verify_delone(delone.points, 1.0, 3.0, box)


def test_generation_is_reproducible():
    box = Box1((0.0, 0.0), 20)
    a = generate_delone(1.0, 3.0, box, seed=5)
    b = generate_delone(1.0, 3.0, box, seed=5)
    assert np.array_equal(a.points, b.points)


def test_generation_rejects_bad_scales():
    with pytest.raises(DeloneError, match="0 < m < M"):
        generate_delone(2.0, 2.0, Box1((0.0,), 10), seed=0)


def test_generation_rejects_small_box():
    with pytest.raises(DeloneError, match="at least 2M"):
        generate_delone(1.0, 3.0, Box1((0.0,), 5), seed=0)


# ---------------------------------------------------------------------------
# split_delone
# ---------------------------------------------------------------------------

def test_cell_index_rounds_to_nearest_multiple():
    assert cell_index([0.9, -1.1], 2.0) == (0, -1)


def test_split_of_lattice_has_empty_remainder():
    delone = generate_delone(1.0, 2.0, Box1((0.0,), 10), seed=0, jitter=0.0)
    split = split_delone(delone)
    assert sorted(split.primary) == [(-2,), (-1,), (0,), (1,), (2,)]
    assert split.secondary == {}
    assert split.secondary_points().shape == (0, 1)


def test_split_sends_extra_points_to_remainder():
    points = np.array([[-2.0], [0.0], [0.5], [2.0]])
    split = split_delone(DeloneSet(0.5, 2.0, points, Box1((0.0,), 8)))
    assert split.primary[(0,)].tolist() == [0.0]
    assert list(split.secondary) == [(0, 1)]
    assert split.secondary[(0, 1)].tolist() == [0.5]


# ---------------------------------------------------------------------------
# Point-list files
# ---------------------------------------------------------------------------

def test_point_list_file_keeps_points_and_box(tmp_path):
    delone = generate_delone(1.0, 3.0, Box1((0.0, 0.0), 12), seed=2)
    path = tmp_path / "points.txt"
    write_delone(delone, str(path))
    back = read_delone(str(path))
    assert np.array_equal(back.points, delone.points)
    assert back.box == delone.box
    assert (back.m, back.M) == (1.0, 3.0)


def test_read_without_box_line_infers_box(tmp_path):
    path = tmp_path / "points.txt"
    path.write_text("# delone m=1 M=2 d=1\n0\n2\n4\n", encoding="utf-8")
    back = read_delone(str(path))
    assert back.box.center == (2.0,)
    assert back.box.side == 6.0


def test_read_requires_header(tmp_path):
    path = tmp_path / "points.txt"
    path.write_text("0 0\n1 1\n", encoding="utf-8")
    with pytest.raises(DeloneError, match="header"):
        read_delone(str(path))


def test_read_rejects_non_numeric_coordinates(tmp_path):
    path = tmp_path / "points.txt"
    path.write_text("# delone m=1 M=2 d=1\n0\nabc\n", encoding="utf-8")
    with pytest.raises(DeloneError, match="Line 3"):
        read_delone(str(path))


def test_read_missing_file(tmp_path):
    with pytest.raises(DeloneError, match="Cannot read"):
        read_delone(str(tmp_path / "absent.txt"))
