"""(m, M)-Delone sets: generation, verification, the one-point-per-cell split, point-list files."""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Box1

logger = logging.getLogger(__name__)

_TOL = 1e-9


class DeloneError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class DeloneSet:
    m: float
    M: float
    points: np.ndarray
    box: Box1

    @property
    def d(self):
        return self.box.d

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class DeloneReport:
    ok: bool
    violation: str = None
    cube: Box1 = None

    def __bool__(self):
        return self.ok


@dataclass(frozen=True, eq=False)
class DeloneSplit:
    """Gamma_1: cell index j -> its point; Gamma_2: (j..., rank) -> point, rank >= 1."""
    primary: dict
    secondary: dict
    M: float

    def primary_points(self):
        return np.array([self.primary[j] for j in sorted(self.primary)])

    def secondary_points(self):
        if not self.secondary:
            return np.empty((0, len(next(iter(self.primary))) if self.primary else 0))
        return np.array([self.secondary[k] for k in sorted(self.secondary)])


def _check_scales(m, M):
    if not 0 < m < M:
        raise DeloneError(f"need 0 < m < M, got m={m}, M={M}")


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def _spacing_violation(points, m):
    if len(points) < 2:
        return None
    pairs = cKDTree(points).query_pairs(m * (1.0 - _TOL), p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return None
    i, j = sorted(pairs.tolist())[0]
    lower = np.minimum(points[i], points[j])
    return Box1(tuple(lower + m / 2.0), m)


def _axis_centers(points, a, lo, hi, resolution):
    grid = np.arange(lo, hi + _TOL, resolution)
    coords = np.unique(points[:, a]) if len(points) else np.empty(0)
    mids = 0.5 * (coords[1:] + coords[:-1])
    mids = mids[(mids >= lo) & (mids <= hi)]
    return np.unique(np.concatenate([grid, mids]))


def _covering_violation(points, M, box, resolution):
    lo = box.lower() + 1.5 * M
    hi = box.upper() - 1.5 * M
    if np.any(hi < lo - _TOL):
        return None
    axes = [_axis_centers(points, a, lo[a], hi[a], resolution) for a in range(box.d)]
    centers = np.array(list(itertools.product(*axes)))
    if len(points) == 0:
        return Box1(tuple(centers[0]), M)
    dist, _ = cKDTree(points).query(centers, p=np.inf)
    bad = np.flatnonzero(dist > M / 2.0 * (1.0 + _TOL))
    if bad.size == 0:
        return None
    return Box1(tuple(centers[bad[0]]), M)


def verify_delone(points, m, M, working_box):
    """Check the spacing (every pair at sup-distance >= m) and covering properties.

    Covering is swept over closed cubes of side M at least M inside the box,
    centred on a grid of pitch min(m, M)/2 and on the midpoints between
    consecutive point coordinates, where the largest empty cubes sit.
    """
    points = np.asarray(points, dtype=float).reshape(-1, working_box.d)
    cube = _spacing_violation(points, m)
    if cube is not None:
        return DeloneReport(False, "spacing", cube)
    cube = _covering_violation(points, M, working_box, min(m, M) / 2.0)
    if cube is not None:
        return DeloneReport(False, "covering", cube)
    return DeloneReport(True)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _anchors(box, pitch):
    axes = []
    for lo, hi in zip(box.lower(), box.upper()):
        first = int(np.ceil(lo / pitch - _TOL))
        last = int(np.floor(hi / pitch + _TOL))
        axes.append(pitch * np.arange(first, last + 1))
    return np.array(list(itertools.product(*axes)))


def generate_delone(m, M, working_box, seed, jitter=0.5, max_rounds=20):
    """Jittered anchor grid with pitch M - 2a and per-coordinate jitter a = jitter (M - m) / 4.

    Neighbouring points stay at sup-distance >= M - 4a >= m and every point of
    the plane is within sup-distance M/2 of a point, so both properties hold;
    jitter = 0 gives the lattice M Z^d. Draws that still violate the spacing
    (rounding only) are resampled.
    """
    _check_scales(m, M)
    if working_box.side < 2 * M:
        raise DeloneError(f"working box side {working_box.side} must be at least 2M = {2 * M}")
    if not 0 <= jitter <= 1:
        raise DeloneError(f"jitter must lie in [0, 1], got {jitter}")
    a = jitter * (M - m) / 4.0
    anchors = _anchors(working_box, M - 2 * a)
    lo, hi = working_box.lower(), working_box.upper()
    for round_no in range(max_rounds):
        rng = np.random.Generator(np.random.Philox(key=int(seed), counter=[round_no, 0, 0, 0]))
        points = anchors + rng.uniform(-a, a, size=anchors.shape) if a > 0 else anchors.copy()
        inside = np.all((points >= lo) & (points <= hi), axis=1)
        points = points[inside]
        if _spacing_violation(points, m) is None:
            logger.debug("Delone set with %d points after %d round(s)", len(points), round_no + 1)
            return DeloneSet(float(m), float(M), points, working_box)
    raise DeloneError(
        f"no admissible (m={m}, M={M}) set after {max_rounds} rounds; "
        f"m is too close to M for jitter={jitter}"
    )


# ---------------------------------------------------------------------------
# Split into one point per M-cell plus remainder
# ---------------------------------------------------------------------------

def cell_index(point, M):
    return tuple(int(c) for c in np.floor(np.asarray(point) / M + 0.5))


def split_delone(delone):
    """Gamma_1 keeps, per cell Lambda_M(M j), the point nearest M j; Gamma_2 the rest."""
    cells = {}
    for idx, p in enumerate(delone.points):
        cells.setdefault(cell_index(p, delone.M), []).append(idx)
    primary, secondary = {}, {}
    for j, members in cells.items():
        center = delone.M * np.asarray(j, dtype=float)
        ranked = sorted(
            members,
            key=lambda i: (float(np.sum((delone.points[i] - center) ** 2)), tuple(delone.points[i])),
        )
        primary[j] = delone.points[ranked[0]].copy()
        for rank, i in enumerate(ranked[1:], 1):
            secondary[j + (rank,)] = delone.points[i].copy()
    return DeloneSplit(primary, secondary, delone.M)


# ---------------------------------------------------------------------------
# Point-list files
# ---------------------------------------------------------------------------

def write_delone(delone, path):
    lines = [f"# delone m={delone.m!r} M={delone.M!r} d={delone.d}",
             f"# box center={','.join(repr(float(c)) for c in delone.box.center)} side={float(delone.box.side)!r}"]
    for p in delone.points:
        lines.append(" ".join(repr(float(c)) for c in p))
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise DeloneError(f"Cannot write point list '{path}': {e}")


def _parse_header(line):
    fields = {}
    for token in line[1:].split()[1:]:
        key, _, value = token.partition("=")
        fields[key] = value
    return fields


def read_delone(path):
    """Read a point list written by write_delone (box line optional)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise DeloneError(f"Cannot read point list '{path}': {e}")
    header, box, rows = None, None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("# delone"):
            header = _parse_header(line)
            continue
        if line.startswith("# box"):
            info = _parse_header(line)
            box = Box1(tuple(float(c) for c in info["center"].split(",")), float(info["side"]))
            continue
        if line.startswith("#"):
            continue
        try:
            rows.append([float(c) for c in line.split()])
        except ValueError:
            raise DeloneError(f"Line {lineno}: coordinates must be numbers")
    if header is None:
        raise DeloneError("missing '# delone m=<m> M=<M> d=<d>' header")
    try:
        m, M, d = float(header["m"]), float(header["M"]), int(header["d"])
    except (KeyError, ValueError):
        raise DeloneError("malformed delone header")
    points = np.array(rows, dtype=float).reshape(-1, d)
    if box is None:
        lo, hi = points.min(axis=0), points.max(axis=0)
        box = Box1(tuple((lo + hi) / 2.0), float(np.max(hi - lo)) + M)
    return DeloneSet(m, M, points, box)
