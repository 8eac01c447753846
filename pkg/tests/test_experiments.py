"""Unit tests for the Monte Carlo drivers on small systems."""

import math

import numpy as np
import pytest
from nbody_wegner.config import parse_config
from nbody_wegner.experiments import (
    ExperimentError, convolve_ids, delone_check, geometric_sigma, ids_convolution_check,
    ids_estimate, ids_gap, ids_lipschitz_check, increments, min_pair_distance, s_sum,
    s_sum_closed, s_sum_constraint, step_eval, sumset_count, ucp_experiment, volume_warnings,
    wegner_one_volume, wegner_threshold, wegner_two_volume, windows_from_pairs,
)
from nbody_wegner.geometry import n_cube
from nbody_wegner.hamiltonian import kron_sum, laplacian_1d
from nbody_wegner.spectral import count_profile
from nbody_wegner.system import build_system, energy_grid


def _system(text=""):
    return build_system(parse_config(text))


# ---------------------------------------------------------------------------
# Annotations
# ---------------------------------------------------------------------------

def test_wegner_threshold():
    assert wegner_threshold(1, 1) == 72.0
    assert wegner_threshold(2, 2) == pytest.approx(144.0)


def test_volume_warnings_flag_small_and_even_sides():
    warnings = volume_warnings(_system(), [10, 201])
    assert any("below the Wegner volume threshold" in w for w in warnings)
    assert any("L=10 is not an odd integer" in w for w in warnings)
    assert not any("L=201" in w for w in warnings)


# ---------------------------------------------------------------------------
# Wegner estimates
# ---------------------------------------------------------------------------

def test_wegner_one_volume_shapes_and_inclusion():
    system = _system("system.L -- 5\n")
    windows = windows_from_pairs([(0.5, 1.5), (0.8, 1.2)], e0=4.0)
    result = wegner_one_volume(system, windows, [5, 7], trials=6)
    assert len(result.raw) == 6 * 2 * 2
    assert len(result.aggregate) == 4
    assert result.summary["inclusion_violations"] == 0
    assert all(0.0 <= row["p_hit"] <= 1.0 for row in result.aggregate)
    assert any("threshold" in w for w in result.warnings)


def test_wegner_one_volume_is_reproducible():
    system = _system("system.L -- 5\n")
    windows = windows_from_pairs([(0.0, 2.0)])
    a = wegner_one_volume(system, windows, [5], trials=3)
    b = wegner_one_volume(system, windows, [5], trials=3)
    assert a.raw == b.raw


def test_min_pair_distance():
    assert min_pair_distance([1.0, 3.0], [2.5]) == 0.5
    assert min_pair_distance([], [1.0]) == math.inf


def test_wegner_two_volume_on_separated_boxes():
    system = _system("system.L -- 5\n")
    rect_b = n_cube(1, 1, 5, centers=[(20,)])
    window = windows_from_pairs([(0.0, 3.0)])[0]
    result = wegner_two_volume(system, system.rect(), rect_b, 1.0, window, [0.05, 0.5, 5.0], trials=5)
    assert result.summary["witness"] == [1]
    p = [row["p_close"] for row in result.aggregate]
    assert p == sorted(p)
    assert result.summary["weyl_count_b"]["label"] == "empirical"


def test_wegner_two_volume_independent_policy():
    system = _system("system.L -- 5\n")
    rect_b = n_cube(1, 1, 5, centers=[(20,)])
    window = windows_from_pairs([(0.0, 3.0)])[0]
    result = wegner_two_volume(system, system.rect(), rect_b, 1.0, window, [0.5], trials=3,
                               policy="independent")
    assert result.summary["policy"] == "independent"
    assert len(result.raw) == 3


def test_wegner_two_volume_needs_R_covering_the_support():
    system = _system("system.L -- 5\n")
    rect_b = n_cube(1, 1, 5, centers=[(20,)])
    window = windows_from_pairs([(0.0, 3.0)])[0]
    with pytest.raises(ExperimentError, match="support radius"):
        wegner_two_volume(system, system.rect(), rect_b, 0.25, window, [0.5], trials=1)


def test_wegner_two_volume_refuses_overlap():
    system = _system("system.L -- 5\n")
    window = windows_from_pairs([(0.0, 3.0)])[0]
    with pytest.raises(ExperimentError, match="not 1-separated"):
        wegner_two_volume(system, system.rect(), system.rect(), 1.0, window, [0.5], trials=1)


# ---------------------------------------------------------------------------
# IDS
# ---------------------------------------------------------------------------

def test_ids_is_monotone_with_ordered_intervals():
    system = _system("system.L -- 5\n")
    result = ids_estimate(system, energy_grid([0.0, 8.0, 1.0]), [5], trials=4)
    assert result.summary["monotone_per_trial"]
    assert result.summary["monotone_aggregate"]
    for row in result.aggregate:
        assert row["ids_lo"] <= row["ids"] <= row["ids_hi"]


def test_ids_rejects_unsorted_grid():
    with pytest.raises(ExperimentError, match="sorted"):
        ids_estimate(_system(), [1.0, 0.0], [5], trials=1)


def test_step_eval_is_right_continuous():
    got = step_eval([0.0, 1.0, 2.0], [1.0, 2.0, 3.0], np.array([-0.5, 0.0, 0.5, 1.0, 2.5]))
    assert got.tolist() == [0.0, 1.0, 1.0, 2.0, 3.0]


def test_increments():
    assert increments([1.0, 3.0, 6.0]).tolist() == [1.0, 2.0, 3.0]


def test_convolution_with_unit_atom_at_zero_is_identity():
    grid = np.array([0.0, 1.0, 2.0])
    ids = np.array([0.2, 0.5, 0.9])
    assert convolve_ids(ids, [1.0, 0.0, 0.0], grid, 1) == pytest.approx(ids)


def test_sumset_count_matches_kron_sum():
    one = laplacian_1d(3, 1.0, "dirichlet")
    ev = np.linalg.eigvalsh(one.toarray())
    energies = [1.0, 3.0, 4.5, 7.0]
    assert sumset_count([ev, ev], energies).tolist() == [0, 3, 6, 9]
    assert count_profile(kron_sum([one, one]), energies).tolist() == [0, 3, 6, 9]


def test_convolution_check_single_particle_is_exact():
    system = _system("system.L -- 5\n")
    result = ids_convolution_check(system, energy_grid([0.0, 6.0, 0.5]), trials=3)
    assert result.summary["sup_shared"] == 0.0
    assert result.summary["sup_independent"] == 0.0


def test_convolution_check_two_particles_reports_both_policies():
    system = _system("system.n -- 2\nsystem.L -- 4\n")
    result = ids_convolution_check(system, energy_grid([0.0, 12.0, 0.5]), trials=2, tolerance=10.0)
    assert {"sup_shared", "sup_independent", "l1_shared", "l1_independent"} <= set(result.summary)
    assert result.summary["independent_within_tolerance"]


def test_convolution_check_refuses_interaction():
    system = _system("system.n -- 2\nsystem.L -- 4\npotential.interaction -- pair\n")
    with pytest.raises(ExperimentError, match="interaction"):
        ids_convolution_check(system, energy_grid([0.0, 4.0, 1.0]), trials=1)


def test_lipschitz_check_rows_per_volume():
    system = _system("system.L -- 5\n")
    result = ids_lipschitz_check(system, energy_grid([0.0, 6.0, 0.5]), [5, 7], trials=3)
    assert [row["L"] for row in result.aggregate] == [5, 7]
    assert all(row["max_slope"] >= 0 for row in result.aggregate)


def test_lipschitz_needs_two_energies():
    system = _system("system.L -- 5\n")
    with pytest.raises(ExperimentError, match="at least two grid energies"):
        ids_lipschitz_check(system, energy_grid([1.0, 1.0, 0.5]), [5], trials=1)


def test_lipschitz_warns_on_atomic_couplings():
    system = _system("system.L -- 5\ndisorder.kind -- atomic\n")
    result = ids_lipschitz_check(system, energy_grid([0.0, 6.0, 0.5]), [5], trials=2)
    assert any("no bounded density" in w for w in result.warnings)
    assert result.summary["density_sup"] == math.inf


def test_interaction_only_lowers_counts():
    system = _system("system.n -- 2\nsystem.L -- 3\npotential.interaction -- pair\n")
    result = ids_gap(system, energy_grid([0.0, 20.0, 2.0]), [3], trials=2)
    assert result.summary["order_violations"] == 0
    assert result.summary["label"] == "trend only"


def test_gap_without_interaction_is_zero():
    system = _system("system.n -- 2\nsystem.L -- 3\n")
    result = ids_gap(system, energy_grid([0.0, 20.0, 2.0]), [3], trials=1)
    assert result.aggregate[0]["sup_gap"] == 0.0
    assert any("no interaction" in w for w in result.warnings)


# ---------------------------------------------------------------------------
# Unique continuation
# ---------------------------------------------------------------------------

def test_ucp_ratios_bounded_and_cap_warned():
    system = _system("system.L -- 5\nsystem.p -- 4\n")
    windows = windows_from_pairs([(0.0, 3.0)], e0=4.0)
    result = ucp_experiment(system, windows, [5], trials=2, m_d=1.0, e0=4.0)
    row = result.aggregate[0]
    assert 0.0 <= row["min_ratio"] <= 1.0
    assert result.summary["gamma"] > 0
    assert any("reporting cap" in w for w in result.warnings)


def test_ucp_empty_window_counts_as_empty():
    system = _system("system.L -- 5\n")
    windows = windows_from_pairs([(-5.0, -4.0)])
    result = ucp_experiment(system, windows, [5], trials=2)
    row = result.aggregate[0]
    assert row["empty"] == 2
    assert row["min_ratio"] == math.inf


# ---------------------------------------------------------------------------
# Delone pipeline
# ---------------------------------------------------------------------------

def test_delone_check_passes_generated_sets():
    result = delone_check(1, 0.5, 1.5, 0.5, 12.0, seed=3, trials=3)
    assert result.summary["all_passed"]
    assert all(r["partition_ok"] for r in result.raw)


def test_delone_check_planar():
    result = delone_check(2, 1.0, 2.0, 0.5, 16.0, seed=1, trials=2)
    assert result.summary["all_passed"]


# ---------------------------------------------------------------------------
# S(m; sigma)
# ---------------------------------------------------------------------------

def test_s_sum_small_example():
    assert s_sum(2, geometric_sigma(2, 2)) == pytest.approx(0.375)


def test_s_sum_matches_closed_form_deep():
    assert s_sum(10, geometric_sigma(10, 10)) == pytest.approx(s_sum_closed(10, 10), rel=1e-12)


def test_s_sum_requires_unit_sigma_zero():
    with pytest.raises(ExperimentError, match="sigma_0"):
        s_sum(1, [2.0, 1.0])


def test_s_sum_requires_enough_terms():
    with pytest.raises(ExperimentError, match="need sigma_0"):
        s_sum(3, [1.0, 0.5])


def test_s_sum_constraint():
    assert s_sum_constraint(1, 2, 1)
    assert not s_sum_constraint(1, 8, 1)
