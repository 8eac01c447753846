"""Finite-difference N-body Hamiltonians on rectangles.

H = -sum_i Delta_i + U + V_0 + sum_i V^(1)(x_i), discretized with the
(2 N d + 1)-point stencil at spacing h = 1/p.

Node conventions, per coordinate axis of a factor of side L:

    dirichlet   p L - 1 interior nodes at lower + k h, k = 1 .. p L - 1
    periodic    p L nodes at lower + k h, k = 0 .. p L - 1, wrapping around

so the matrix dimension is prod_i (p L_i - 1)^d or prod_i (p L_i)^d.
Axes are ordered particle by particle, coordinates within a particle, and
grid multi-indices are flattened row-major.
"""

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .potential import PotentialError, background_potential, interaction_potential, one_body_potential

logger = logging.getLogger(__name__)

DIMENSION_CAP = 200_000


class HamiltonianError(Exception):
    pass


@dataclass(frozen=True)
class Mesh:
    rect: object
    p: int
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.boundary not in ("dirichlet", "periodic"):
            raise HamiltonianError(f"unknown boundary condition {self.boundary!r}")
        if int(self.p) != self.p or self.p < 1:
            raise HamiltonianError(f"points per unit length must be a positive integer, got {self.p!r}")
        for box in self.rect.factors:
            nodes = self.p * box.side
            if abs(nodes - round(nodes)) > 1e-9:
                raise HamiltonianError(f"p * L = {nodes} is not an integer for side {box.side}")
            if self.boundary == "dirichlet" and round(nodes) < 2:
                raise HamiltonianError(f"side {box.side} has no interior node at p = {self.p}")

    @property
    def h(self):
        return 1.0 / self.p

    def _axis(self, lower, side):
        n = int(round(self.p * side))
        if self.boundary == "dirichlet":
            return lower + self.h * np.arange(1, n)
        return lower + self.h * np.arange(n)

    def factor_axes(self, i):
        box = self.rect.factors[i]
        return [self._axis(lo, box.side) for lo in box.lower()]

    @functools.cached_property
    def axes(self):
        return [ax for i in range(self.rect.n) for ax in self.factor_axes(i)]

    @property
    def shape(self):
        return tuple(len(ax) for ax in self.axes)

    @property
    def dimension(self):
        return math.prod(self.shape)

    def factor_shape(self, i):
        return tuple(len(ax) for ax in self.factor_axes(i))

    def factor_points(self, i):
        """Nodes of factor i as an (n_i, d) array, row-major."""
        grids = np.meshgrid(*self.factor_axes(i), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def index(self, multi):
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def multi_index(self, row):
        return tuple(int(k) for k in np.unravel_index(int(row), self.shape))

    def points(self):
        """All nodes as a (dimension, N d) array, row-major."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


def mesh_dimension(rect, p, boundary):
    """Matrix dimension from the node-count formula, without building the mesh."""
    extra = -1 if boundary == "dirichlet" else 0
    return math.prod((int(round(p * box.side)) + extra) ** box.d for box in rect.factors)


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    matrix: sp.csr_matrix
    mesh: Mesh
    spec: object = None
    field: object = None
    lower_bound: float = 0.0

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @functools.cached_property
    def norm_estimate(self):
        """Max absolute row sum, an upper bound on the spectral norm."""
        return float(abs(self.matrix).sum(axis=1).max()) if self.dimension else 0.0

    def to_dense(self):
        return self.matrix.toarray()


def laplacian_1d(n, h, boundary):
    """-d^2/dx^2 on n nodes: tridiagonal (2, -1) / h^2, with wrap-around entries when periodic."""
    rows, cols, vals = [], [], []
    for k in range(n):
        rows.append(k); cols.append(k); vals.append(2.0)
        for nb in (k - 1, k + 1):
            if 0 <= nb < n:
                rows.append(k); cols.append(nb); vals.append(-1.0)
            elif boundary == "periodic":
                rows.append(k); cols.append(nb % n); vals.append(-1.0)
    # duplicates sum, so n = 1 periodic is the zero matrix and n = 2 carries -2
    return sp.coo_matrix((np.array(vals) / (h * h), (rows, cols)), shape=(n, n)).tocsr()


def kron_sum(matrices):
    """sum_a I x .. x A_a x .. x I in the row-major axis order."""
    sizes = [m.shape[0] for m in matrices]
    total = sp.csr_matrix((math.prod(sizes), math.prod(sizes)))
    for a, m in enumerate(matrices):
        left = sp.identity(math.prod(sizes[:a]), format="csr")
        right = sp.identity(math.prod(sizes[a + 1:]), format="csr")
        total = total + sp.kron(sp.kron(left, m, format="csr"), right, format="csr")
    return total.tocsr()


def _broadcast_axis(values, position, shape):
    reshaped = [1] * len(shape)
    reshaped[position] = shape[position]
    return np.reshape(values, reshaped)


def required_sites(rect, spec):
    """Coupling keys whose bump reaches some factor box of the rectangle."""
    reach = spec.single_site.sup_half_width()
    keys = set()
    for box in rect.factors:
        keys.update(spec.layout.keys_near(box.lower(), box.upper(), reach))
    return sorted(keys)


def potential_diagonal(mesh, spec, field, include_interaction=True):
    """U + V_0 + V^(N) on every node, flattened row-major."""
    shape = mesh.shape
    d = mesh.rect.d
    diag = np.zeros(shape)
    for i in range(mesh.rect.n):
        try:
            v = one_body_potential(spec.layout, spec.single_site, field, mesh.factor_points(i))
        except PotentialError as e:
            raise HamiltonianError(f"particle {i + 1}: {e}") from None
        block = [1] * len(shape)
        block[i * d:(i + 1) * d] = mesh.factor_shape(i)
        diag = diag + np.reshape(v, block)
    if spec.background:
        for a, ax in enumerate(mesh.axes):
            diag = diag + _broadcast_axis(background_potential(spec.background, ax[:, None]), a, shape)
    diag = diag.ravel()
    if include_interaction and spec.interaction.kind != "none":
        diag = diag + interaction_potential(spec.interaction, mesh.points(), d)
    return diag


def assemble(mesh, spec, field, include_interaction=True, dimension_cap=DIMENSION_CAP):
    """Sparse symmetric H on the mesh; refuses grids above the dimension cap."""
    dim = mesh.dimension
    if dim > dimension_cap:
        raise HamiltonianError(
            f"matrix dimension {dim} (grid {'x'.join(map(str, mesh.shape))}) exceeds the cap of "
            f"{dimension_cap} rows; lower p or L, or raise system.dimension_cap"
        )
    lap = kron_sum([laplacian_1d(len(ax), mesh.h, mesh.boundary) for ax in mesh.axes])
    diag = potential_diagonal(mesh, spec, field, include_interaction)
    H = (lap + sp.diags(diag, format="csr")).tocsr()
    H.sum_duplicates()
    # the Laplacian part is nonnegative, so H >= min diag
    lower = max(0.0, -float(diag.min())) if dim else 0.0
    logger.debug("assembled H: dimension %d, %d stored entries", dim, H.nnz)
    return HamiltonianMatrix(H, mesh, spec, field, lower_bound=lower)


def apply(H, vector):
    v = np.asarray(vector, dtype=float)
    if v.shape[0] != H.dimension:
        raise HamiltonianError(f"vector length {v.shape[0]} does not match dimension {H.dimension}")
    return H.matrix @ v


def write_matrix_market(H, path):
    try:
        scipy.io.mmwrite(str(path), sp.tril(H.matrix, format="coo"), symmetry="symmetric",
                         comment=f"N={H.mesh.rect.n} d={H.mesh.rect.d} p={H.mesh.p} {H.mesh.boundary}")
    except OSError as e:
        raise HamiltonianError(f"Cannot write matrix to '{path}': {e}")
