"""Eigenvalue counting by inertia, windowed eigensolves and the unique-continuation ratio."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

DENSE_MAX = 3000
INERTIA_DENSE_MAX = 400
TIE_TOL = 1e-12


class SpectralError(Exception):
    pass


@dataclass(frozen=True)
class SpectrumWindow:
    """Closed energy interval [lo, hi], optionally capped by e0."""
    lo: float
    hi: float
    e0: float = None

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise SpectralError(f"window endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise SpectralError(f"window lower end {self.lo} exceeds upper end {self.hi}")
        if self.e0 is not None and self.hi > self.e0:
            raise SpectralError(f"window [{self.lo}, {self.hi}] reaches above E0 = {self.e0}")

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def center(self):
        return (self.lo + self.hi) / 2.0

    @classmethod
    def centered(cls, center, width, e0=None):
        return cls(center - width / 2.0, center + width / 2.0, e0)


@dataclass(frozen=True, eq=False)
class SpectralSlice:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    method: str
    tolerance: float
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return self.eigenvalues.shape[0]


def _matrix(H):
    return H.matrix if hasattr(H, "matrix") else H


def _norm(A):
    if sp.issparse(A):
        return float(abs(A).sum(axis=1).max()) if A.shape[0] else 0.0
    A = np.asarray(A)
    return float(np.abs(A).sum(axis=1).max()) if A.shape[0] else 0.0


def tie_tolerance(H):
    """Endpoint shift 1e-12 ||H||_inf, used by every counting routine."""
    A = _matrix(H)
    norm = H.norm_estimate if hasattr(H, "norm_estimate") else _norm(A)
    return TIE_TOL * max(norm, 1.0)


# ---------------------------------------------------------------------------
# Inertia
# ---------------------------------------------------------------------------

def _dense_negatives(A):
    _, D, _ = scipy.linalg.ldl(A, lower=True, hermitian=True)
    n = D.shape[0]
    negatives, k = 0, 0
    while k < n:
        if k + 1 < n and D[k + 1, k] != 0.0:
            a, b, c = D[k, k], D[k + 1, k], D[k + 1, k + 1]
            det = a * c - b * b
            if det < 0:
                negatives += 1
            elif a + c < 0:
                negatives += 2
            k += 2
        else:
            negatives += int(D[k, k] < 0)
            k += 1
    return negatives


def _sparse_negatives(A):
    lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None
    return int(np.count_nonzero(lu.U.diagonal() < 0))


def negative_count(A, inertia_dense_max=INERTIA_DENSE_MAX):
    """Number of negative eigenvalues of the symmetric matrix A (Sylvester inertia)."""
    n = A.shape[0]
    if n == 0:
        return 0
    if n <= inertia_dense_max or not sp.issparse(A):
        dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        return _dense_negatives(dense)
    try:
        count = _sparse_negatives(A)
    except RuntimeError as e:
        raise SpectralError(f"sparse factorization failed: {e}") from None
    if count is None:
        logger.debug("symmetric LU pivoted off the diagonal; retrying dense LDL")
        return _dense_negatives(A.toarray())
    return count


def count_below(H, E, strict=False, inertia_dense_max=INERTIA_DENSE_MAX):
    """Eigenvalues <= E (or < E when strict), by the inertia of H - E'.

    E' = E + tol for the closed count and E - tol for the strict one, with
    tol = 1e-12 ||H||_inf; eigenvalues within tol of E count as equal to E.
    """
    if not math.isfinite(E):
        raise SpectralError(f"energy must be finite, got {E}")
    A = _matrix(H)
    tol = tie_tolerance(H)
    shift = E - tol if strict else E + tol
    if sp.issparse(A):
        shifted = (A - shift * sp.identity(A.shape[0], format="csr")).tocsr()
    else:
        shifted = np.asarray(A, dtype=float) - shift * np.eye(A.shape[0])
    return negative_count(shifted, inertia_dense_max)


def trace_projector(H, window, inertia_dense_max=INERTIA_DENSE_MAX):
    """Tr E(window) = #(eigenvalues <= hi) - #(eigenvalues < lo)."""
    return (count_below(H, window.hi, inertia_dense_max=inertia_dense_max)
            - count_below(H, window.lo, strict=True, inertia_dense_max=inertia_dense_max))


def all_eigenvalues(H):
    A = _matrix(H)
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    return scipy.linalg.eigvalsh(dense)


def count_profile(H, energies, dense_max=DENSE_MAX, strict=False):
    """count_below over a whole energy grid; one dense diagonalization when small."""
    energies = np.asarray(energies, dtype=float)
    A = _matrix(H)
    if A.shape[0] <= dense_max:
        evals = all_eigenvalues(H)
        tol = tie_tolerance(H)
        if strict:
            return np.searchsorted(evals, energies - tol, side="left")
        return np.searchsorted(evals, energies + tol, side="right")
    return np.array([count_below(H, E, strict=strict) for E in energies])


def window_traces(H, windows, dense_max=DENSE_MAX):
    """trace_projector for many windows of one matrix."""
    if _matrix(H).shape[0] <= dense_max:
        evals = all_eigenvalues(H)
        tol = tie_tolerance(H)
        return np.array([np.searchsorted(evals, w.hi + tol, side="right")
                         - np.searchsorted(evals, w.lo - tol, side="left") for w in windows])
    return np.array([trace_projector(H, w) for w in windows])


# ---------------------------------------------------------------------------
# Windowed eigensolves
# ---------------------------------------------------------------------------

def _residuals(A, values, vectors):
    if vectors.shape[1] == 0:
        return np.empty(0)
    R = A @ vectors - vectors * values
    return np.linalg.norm(R, axis=0)


def _orthonormality_defect(vectors):
    k = vectors.shape[1]
    if k == 0:
        return 0.0
    return float(np.max(np.abs(vectors.T @ vectors - np.eye(k))))


def _rayleigh_ritz(A, vectors):
    Q, _ = np.linalg.qr(vectors)
    small = Q.T @ (A @ Q)
    values, coeffs = scipy.linalg.eigh((small + small.T) / 2.0)
    return values, Q @ coeffs


def eigen_window(H, window, dense_max=DENSE_MAX, tol=1e-8):
    """All eigenpairs with eigenvalue in the window, certified against trace_projector."""
    A = _matrix(H)
    n = A.shape[0]
    t = tie_tolerance(H)
    norm = max(H.norm_estimate if hasattr(H, "norm_estimate") else _norm(A), 1.0)
    expected = trace_projector(H, window)
    if expected == 0:
        return SpectralSlice(np.empty(0), np.empty((n, 0)), "empty", tol)
    if n <= dense_max or expected >= n - 1:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        values, vectors = scipy.linalg.eigh(dense, subset_by_value=(window.lo - t, window.hi + t))
        method = "dense"
    else:
        sigma = window.center
        k = min(expected + 2, n - 2)
        try:
            values, vectors = spla.eigsh(A.tocsc(), k=k, sigma=sigma, which="LM", tol=tol * 1e-2)
        except spla.ArpackNoConvergence as e:
            raise SpectralError(f"shift-invert Lanczos did not converge near {sigma}: {e}") from None
        keep = (values >= window.lo - t) & (values <= window.hi + t)
        values, vectors = _rayleigh_ritz(A, vectors[:, keep])
        method = "shift-invert"
    if values.shape[0] != expected:
        raise SpectralError(
            f"{method} solve found {values.shape[0]} eigenvalues in [{window.lo}, {window.hi}] "
            f"but the inertia count is {expected}"
        )
    residuals = _residuals(A, values, vectors)
    if residuals.size and residuals.max() > tol * norm:
        raise SpectralError(f"eigenpair residual {residuals.max():.3e} exceeds {tol * norm:.3e}")
    if _orthonormality_defect(vectors) > 1e-10:
        raise SpectralError("window eigenvectors lost orthonormality")
    return SpectralSlice(values, vectors, method, tol, residuals)


def eigen_windows(H, windows, dense_max=DENSE_MAX, tol=1e-8):
    """eigen_window for several windows; small matrices are diagonalized once."""
    A = _matrix(H)
    if A.shape[0] > dense_max:
        return [eigen_window(H, w, dense_max, tol) for w in windows]
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    values, vectors = scipy.linalg.eigh(dense)
    t = tie_tolerance(H)
    slices = []
    for w in windows:
        keep = (values >= w.lo - t) & (values <= w.hi + t)
        slices.append(SpectralSlice(values[keep], vectors[:, keep], "dense", tol,
                                    _residuals(A, values[keep], vectors[:, keep])))
    return slices


# ---------------------------------------------------------------------------
# Unique continuation
# ---------------------------------------------------------------------------

def ucp_ratio(H, window, W, spectral_slice=None, dense_max=DENSE_MAX):
    """lambda_min of <v_a, W v_b> over an orthonormal basis of ran E(window).

    W is the comparison potential sampled on the mesh nodes. An empty
    window gives inf.
    """
    W = np.asarray(W, dtype=float)
    s = spectral_slice if spectral_slice is not None else eigen_window(H, window, dense_max)
    if len(s) == 0:
        return math.inf
    V = s.eigenvectors
    if W.shape[0] != V.shape[0]:
        raise SpectralError(f"W has {W.shape[0]} entries, the mesh has {V.shape[0]} nodes")
    if _orthonormality_defect(V) > 1e-10:
        raise SpectralError("slice basis is not orthonormal; refusing to form P W P")
    G = V.T @ (W[:, None] * V)
    lam = float(scipy.linalg.eigvalsh((G + G.T) / 2.0)[0])
    return min(max(lam, 0.0), float(W.max()) if W.size else 0.0)


def gamma_formula(M_D, K, delta):
    """gamma = sqrt(delta^{M_D (1 + K^{2/3})} / 2)."""
    if not 0 < delta <= 0.5:
        raise SpectralError(f"delta={delta} outside (0, 1/2]")
    if not M_D > 0:
        raise SpectralError(f"M_D must be positive, got {M_D}")
    if K < 0:
        raise SpectralError(f"K must be nonnegative, got {K}")
    return math.sqrt(0.5 * delta ** (M_D * (1.0 + K ** (2.0 / 3.0))))


def comparison_constant_K(v_sup, E0):
    """K(V, E0) = 2 ||V||_inf + E0."""
    return 2.0 * v_sup + E0
