"""N-particle rectangles, lattice skeletons, projections and R-separation."""

import itertools
import math
from dataclasses import dataclass

import numpy as np


class GeometryError(Exception):
    pass


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box1:
    """Closed axis-aligned cube in R^d: side `side`, centred at `center`."""
    center: tuple
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(self.center))
        if len(self.center) < 1:
            raise GeometryError("box center must have at least one coordinate")
        if not self.side > 0:
            raise GeometryError(f"box side must be positive, got {self.side!r}")

    @property
    def d(self):
        return len(self.center)

    def lower(self):
        return np.array(self.center, dtype=float) - self.side / 2.0

    def upper(self):
        return np.array(self.center, dtype=float) + self.side / 2.0

    def contains_box(self, other):
        return bool(np.all(self.lower() <= other.lower()) and np.all(other.upper() <= self.upper()))

    def volume(self):
        return float(self.side) ** self.d


@dataclass(frozen=True)
class NRectangle:
    """Product of N boxes in R^d, a region of R^{Nd}."""
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise GeometryError("an N-particle rectangle needs at least one factor")
        dims = {box.d for box in self.factors}
        if len(dims) != 1:
            raise GeometryError(f"factor boxes disagree on dimension: {sorted(dims)}")

    @property
    def n(self):
        return len(self.factors)

    @property
    def d(self):
        return self.factors[0].d

    @property
    def sides(self):
        return tuple(box.side for box in self.factors)

    def volume(self):
        return math.prod(box.volume() for box in self.factors)

    def is_cube(self):
        return len(set(self.sides)) == 1

    def contains(self, other):
        if other.n != self.n or other.d != self.d:
            return False
        return all(a.contains_box(b) for a, b in zip(self.factors, other.factors))


@dataclass(frozen=True)
class ProjectionSet:
    """Union of the factor boxes indexed by J (1-based particle labels)."""
    J: frozenset
    boxes: tuple

    def contains_point(self, point):
        p = np.asarray(point, dtype=float)
        return any(np.all(box.lower() <= p) and np.all(p <= box.upper()) for box in self.boxes)


@dataclass(frozen=True)
class Separation:
    separated: bool
    witness: frozenset = None
    condition: int = None

    def __bool__(self):
        return self.separated


def n_cube(n, d, side, centers=None):
    """N-particle cube with every factor of side `side`; centers default to the origin."""
    if centers is None:
        centers = [(0,) * d] * n
    if len(centers) != n:
        raise GeometryError(f"expected {n} centers, got {len(centers)}")
    return NRectangle(tuple(Box1(tuple(c), side) for c in centers))


def n_rectangle(sides, centers):
    if len(sides) != len(centers):
        raise GeometryError("sides and centers must have the same length")
    return NRectangle(tuple(Box1(tuple(c), s) for s, c in zip(sides, centers)))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def lattice_sites(box):
    """Integer points of the box, Z^d ∩ [c - L/2, c + L/2) per axis.

    For odd L on an integer center this is the closed box; for every integer
    side the count is side^d.
    """
    if not box.side > 0:
        raise GeometryError(f"box side must be positive, got {box.side!r}")
    if float(box.side) != int(box.side):
        raise GeometryError(f"lattice enumeration needs an integer side, got {box.side!r}")
    axes = []
    for lo in box.lower():
        first = math.ceil(lo)
        axes.append(range(first, first + int(box.side)))
    return [tuple(p) for p in itertools.product(*axes)]


def extend(rect, R):
    """Grow every factor side by 2R, keeping centers."""
    if not R > 0:
        raise GeometryError(f"extension length must be positive, got {R!r}")
    return NRectangle(tuple(Box1(box.center, box.side + 2 * R) for box in rect.factors))


def projection(rect, J):
    J = frozenset(J)
    if not J:
        raise GeometryError("projection index set must be nonempty")
    if not J <= set(range(1, rect.n + 1)):
        raise GeometryError(f"index set {sorted(J)} not within 1..{rect.n}")
    return ProjectionSet(J, tuple(rect.factors[j - 1] for j in sorted(J)))


def full_projection(rect):
    return projection(rect, range(1, rect.n + 1))


def box_distance(a, b):
    gaps = np.maximum(0.0, np.maximum(b.lower() - a.upper(), a.lower() - b.upper()))
    return float(np.sqrt(np.sum(gaps * gaps)))


def set_distance(boxes_a, boxes_b):
    """Euclidean distance between two finite unions of boxes; inf if either is empty."""
    if not boxes_a or not boxes_b:
        return math.inf
    return min(box_distance(a, b) for a in boxes_a for b in boxes_b)


def index_subsets(n):
    """Nonempty subsets of {1..n}, by size then lexicographically."""
    labels = range(1, n + 1)
    for size in range(1, n + 1):
        for combo in itertools.combinations(labels, size):
            yield frozenset(combo)


def _decouples(own_hat, other_hat, J, R):
    rest = [own_hat.factors[j - 1] for j in range(1, own_hat.n + 1) if j not in J]
    near = rest + list(other_hat.factors)
    far = [own_hat.factors[j - 1] for j in sorted(J)]
    return set_distance(far, near) > 2 * R


def r_separated(A, B, R):
    """Exhaustive R-separation test; returns a Separation with witness J and condition 1 or 2."""
    if A.n != B.n or A.d != B.d:
        raise GeometryError(
            f"rectangles must share N and d: ({A.n}, {A.d}) vs ({B.n}, {B.d})"
        )
    if not R > 0:
        raise GeometryError(f"separation length must be positive, got {R!r}")
    A_hat = extend(A, R)
    B_hat = extend(B, R)
    for J in index_subsets(A.n):
        if _decouples(A_hat, B_hat, J, R):
            return Separation(True, J, 1)
        if _decouples(B_hat, A_hat, J, R):
            return Separation(True, J, 2)
    return Separation(False)
