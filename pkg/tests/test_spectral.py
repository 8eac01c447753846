"""Unit tests for inertia counting, window eigensolves and the unique-continuation ratio."""

import math

import numpy as np
import pytest
import scipy.sparse as sp
from nbody_wegner.hamiltonian import laplacian_1d
from nbody_wegner.spectral import (
    SpectralError, SpectrumWindow, all_eigenvalues, comparison_constant_K, count_below,
    count_profile, eigen_window, eigen_windows, gamma_formula, negative_count, trace_projector,
    ucp_ratio, window_traces,
)


def _free(n):
    return laplacian_1d(n, 1.0, "dirichlet")


# ---------------------------------------------------------------------------
# SpectrumWindow
# ---------------------------------------------------------------------------

def test_window_center_and_width():
    w = SpectrumWindow.centered(1.0, 0.5)
    assert (w.lo, w.hi) == (0.75, 1.25)
    assert w.width == 0.5


def test_window_rejects_reversed_ends():
    with pytest.raises(SpectralError, match="exceeds"):
        SpectrumWindow(2.0, 1.0)


def test_window_rejects_reaching_above_e0():
    with pytest.raises(SpectralError, match="E0"):
        SpectrumWindow(0.0, 3.0, e0=2.0)


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------

def test_free_laplacian_count_below_two():
    assert count_below(_free(10), 2.0) == 5


def test_sparse_inertia_matches_eigenvalues():
    H = _free(500)
    evals = all_eigenvalues(H)
    assert count_below(H, 1.3) == int(np.sum(evals <= 1.3))
    assert count_below(H, 0.5) == int(np.sum(evals <= 0.5))


def test_ties_count_in_closed_not_strict():
    D = sp.diags([1.0, 2.0, 2.0, 3.0], format="csr")
    assert count_below(D, 2.0) == 3
    assert count_below(D, 2.0, strict=True) == 1


def test_two_by_two_pivot_counted():
    assert negative_count(np.array([[0.0, 1.0], [1.0, 0.0]])) == 1


def test_negative_count_of_empty_matrix():
    assert negative_count(np.zeros((0, 0))) == 0


def test_count_below_rejects_nonfinite_energy():
    with pytest.raises(SpectralError, match="finite"):
        count_below(_free(3), math.inf)


def test_trace_projector_counts_closed_window():
    D = sp.diags([0.0, 1.0, 1.5, 2.0, 5.0], format="csr")
    assert trace_projector(D, SpectrumWindow(1.0, 2.0)) == 3


def test_count_profile_dense_and_inertia_agree():
    H = _free(40)
    energies = np.linspace(0.0, 4.0, 9)
    dense = count_profile(H, energies)
    inertia = count_profile(H, energies, dense_max=0)
    assert dense.tolist() == inertia.tolist()
    assert list(dense) == sorted(dense)


def test_window_traces_match_trace_projector():
    H = _free(30)
    windows = [SpectrumWindow(0.0, 0.5), SpectrumWindow(0.5, 2.5), SpectrumWindow(3.9, 4.0)]
    assert window_traces(H, windows).tolist() == [trace_projector(H, w) for w in windows]


# ---------------------------------------------------------------------------
# Windowed eigensolves
# ---------------------------------------------------------------------------

def test_dense_window_three_nodes():
    s = eigen_window(_free(3), SpectrumWindow(0.0, 1.0))
    assert s.method == "dense"
    assert s.eigenvalues == pytest.approx([2 - np.sqrt(2)])
    assert s.residuals.max() < 1e-10


def test_empty_window():
    s = eigen_window(_free(3), SpectrumWindow(2.5, 3.0))
    assert len(s) == 0
    assert s.method == "empty"


def test_shift_invert_window_matches_dense():
    H = _free(500)
    window = SpectrumWindow(0.5, 0.52)
    s = eigen_window(H, window, dense_max=10)
    evals = all_eigenvalues(H)
    expected = evals[(evals >= 0.5) & (evals <= 0.52)]
    assert s.method == "shift-invert"
    assert np.sort(s.eigenvalues) == pytest.approx(expected, abs=1e-9)


def test_eigen_windows_slices_one_diagonalization():
    H = _free(20)
    windows = [SpectrumWindow(0.0, 0.9), SpectrumWindow(0.9, 3.0)]
    slices = eigen_windows(H, windows)
    assert [len(s) for s in slices] == [trace_projector(H, w) for w in windows]


# ---------------------------------------------------------------------------
# Unique continuation
# ---------------------------------------------------------------------------

def test_ucp_ratio_of_identity_weight_is_one():
    H = _free(20)
    assert ucp_ratio(H, SpectrumWindow(0.0, 0.9), np.ones(20)) == pytest.approx(1.0)


def test_ucp_ratio_of_zero_weight_is_zero():
    H = _free(20)
    assert ucp_ratio(H, SpectrumWindow(0.0, 0.9), np.zeros(20)) == 0.0


def test_ucp_ratio_empty_window_is_infinite():
    assert ucp_ratio(_free(3), SpectrumWindow(2.5, 3.0), np.ones(3)) == math.inf


def test_ucp_ratio_is_bounded_by_weight_max():
    H = _free(20)
    W = np.where(np.arange(20) % 2 == 0, 1.0, 0.0)
    ratio = ucp_ratio(H, SpectrumWindow(0.0, 0.5), W)
    assert 0.0 <= ratio <= 1.0


def test_ucp_ratio_rejects_wrong_length():
    with pytest.raises(SpectralError, match="entries"):
        ucp_ratio(_free(20), SpectrumWindow(0.0, 0.9), np.ones(5))


def test_gamma_formula_example():
    assert gamma_formula(1.0, 0.0, 0.5) ** 2 == pytest.approx(0.25)


def test_gamma_formula_rejects_wide_delta():
    with pytest.raises(SpectralError, match=r"\(0, 1/2\]"):
        gamma_formula(1.0, 1.0, 0.9)


def test_comparison_constant():
    assert comparison_constant_K(1.0, 2.0) == 4.0
