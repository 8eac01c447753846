"""Single-site profiles, Anderson-type layouts, N-body potentials and the comparison potential W."""

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import disorder
from .disorder import DisorderError
from .geometry import lattice_sites

# Rank word reserved for layout jitter streams, far above any Delone rank.
_LAYOUT_RANK = 1 << 40


class PotentialError(Exception):
    pass


# ---------------------------------------------------------------------------
# Single-site profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleSite:
    """u: R^d -> [0, 1] with chi_{Lambda_ell(0)} <= u.

    kind "cube" is the plateau indicator itself, "ball" the indicator of
    B(0, radius) (radius >= ell sqrt(d) / 2), "tent" a plateau of side ell
    falling linearly to 0 over `ramp` in sup-norm.
    """
    kind: str
    d: int
    ell: float = 1.0
    delta: float = None
    radius: float = None
    ramp: float = 0.25

    def __post_init__(self):
        if self.kind not in ("cube", "ball", "tent"):
            raise PotentialError(f"unknown single-site profile {self.kind!r}")
        if not 0 < self.ell <= 1:
            raise PotentialError(f"ell must lie in (0, 1], got {self.ell}")
        if self.kind == "ball":
            r = self.radius if self.radius is not None else self.ell * math.sqrt(self.d) / 2.0
            if r < self.ell * math.sqrt(self.d) / 2.0 - 1e-12:
                raise PotentialError("ball radius too small to contain the plateau cube")
            object.__setattr__(self, "radius", float(r))
        if self.kind == "tent" and not self.ramp > 0:
            raise PotentialError(f"tent ramp must be positive, got {self.ramp}")
        delta = self.delta if self.delta is not None else self.ell / 2.0
        if not 0 < delta <= 0.5:
            raise PotentialError(
                f"delta={delta} outside (0, 1/2]: the unique-continuation balls B(y_j, delta) "
                "must fit their unit cells"
            )
        if delta > self.ell / 2.0 + 1e-12:
            raise PotentialError(
                f"delta={delta} exceeds ell/2={self.ell / 2.0}: B(0, delta) must lie in the plateau cube"
            )
        object.__setattr__(self, "delta", float(delta))

    def sup_half_width(self):
        """Half side of the smallest origin-centred cube containing supp u."""
        if self.kind == "cube":
            return self.ell / 2.0
        if self.kind == "ball":
            return self.radius
        return self.ell / 2.0 + self.ramp

    def support_radius(self):
        """R with supp u inside B(0, R)."""
        if self.kind == "ball":
            return self.radius
        return self.sup_half_width() * math.sqrt(self.d)

    def small_support(self):
        return self.sup_half_width() <= 0.5

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "cube":
            return (np.max(np.abs(x), axis=-1) <= self.ell / 2.0).astype(float)
        if self.kind == "ball":
            return (np.sqrt(np.sum(x * x, axis=-1)) <= self.radius).astype(float)
        r = np.max(np.abs(x), axis=-1)
        return np.clip((self.ell / 2.0 + self.ramp - r) / self.ramp, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Layouts
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=65536)
def _jitter_offset(seed, amplitude, key, d):
    u = disorder.site_uniforms(seed, 0, [key + (_LAYOUT_RANK,)], d, count=d)[0]
    return amplitude * (2.0 * u - 1.0)


@dataclass(frozen=True, eq=False)
class SiteLayout:
    """Where the single-site bumps sit.

    regular: y_j = j. crooked: y_j = j + offset, offsets supplied or drawn
    uniformly in [-jitter, jitter]^d from the layout seed. delone: Gamma_1
    points keyed by cell index j (pitch M), plus Gamma_2 points keyed by
    (j..., rank).
    """
    kind: str
    d: int
    jitter: float = 0.0
    seed: int = 0
    offsets: dict = field(default_factory=dict)
    split: object = None

    def __post_init__(self):
        if self.kind not in ("regular", "crooked", "delone"):
            raise PotentialError(f"unknown layout {self.kind!r}")
        if self.kind == "delone" and self.split is None:
            raise PotentialError("delone layout needs a split Delone set")
        if not 0 <= self.jitter <= 0.5:
            raise PotentialError(f"crooked jitter must lie in [0, 1/2], got {self.jitter}")
        offsets = {tuple(int(c) for c in k): np.asarray(v, dtype=float) for k, v in self.offsets.items()}
        for k, v in offsets.items():
            if v.shape != (self.d,) or np.max(np.abs(v)) > 0.5:
                raise PotentialError(f"offset for site {k} must satisfy |y_j - j|_inf <= 1/2")
        object.__setattr__(self, "offsets", offsets)

    @property
    def pitch(self):
        return self.split.M if self.kind == "delone" else 1.0

    def max_offset(self):
        if self.kind == "regular":
            return 0.0
        if self.kind == "crooked":
            given = max((float(np.max(np.abs(v))) for v in self.offsets.values()), default=0.0)
            return max(self.jitter, given)
        return self.split.M / 2.0

    def position(self, key):
        key = tuple(int(c) for c in key)
        if self.kind == "regular":
            return np.asarray(key, dtype=float)
        if self.kind == "crooked":
            if key in self.offsets:
                return np.asarray(key, dtype=float) + self.offsets[key]
            if self.jitter == 0:
                return np.asarray(key, dtype=float)
            return np.asarray(key, dtype=float) + _jitter_offset(self.seed, self.jitter, key, self.d)
        if key in self.split.primary:
            return np.asarray(self.split.primary[key], dtype=float)
        if key in self.split.secondary:
            return np.asarray(self.split.secondary[key], dtype=float)
        raise PotentialError(f"no Delone point for site key {key}")

    def positions(self, keys):
        if not keys:
            return np.empty((0, self.d))
        return np.array([self.position(k) for k in keys])

    def keys_near(self, lo, hi, radius):
        """Coupling keys whose point lies within sup-distance `radius` of the box [lo, hi]."""
        lo = np.asarray(lo, dtype=float) - radius
        hi = np.asarray(hi, dtype=float) + radius
        if self.kind == "delone":
            candidates = list(self.split.primary) + list(self.split.secondary)
        else:
            slack = self.max_offset()
            axes = [range(math.floor(a - slack), math.ceil(b + slack) + 1) for a, b in zip(lo, hi)]
            candidates = [tuple(p) for p in itertools.product(*axes)]
        if not candidates:
            return []
        pos = self.positions(candidates)
        inside = np.all((pos >= lo - 1e-12) & (pos <= hi + 1e-12), axis=1)
        return [k for k, ok in zip(candidates, inside) if ok]

    def skeleton(self, box):
        """Lattice skeleton of a factor box: integer sites, or Delone cells j with M j in the box."""
        if self.kind != "delone":
            return lattice_sites(box)
        lo, hi = box.lower(), box.upper()
        M = self.split.M
        return sorted(j for j in self.split.primary
                      if np.all(M * np.asarray(j) >= lo - 1e-12) and np.all(M * np.asarray(j) < hi - 1e-12))


def regular_layout(d):
    return SiteLayout("regular", d)


def crooked_layout(d, jitter=0.0, seed=0, offsets=None):
    return SiteLayout("crooked", d, jitter=jitter, seed=seed, offsets=offsets or {})


def delone_layout(split, d):
    return SiteLayout("delone", d, split=split)


# ---------------------------------------------------------------------------
# Interaction and full spec
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Interaction:
    """U(x_1..x_N): none, pair sum of A max(0, 1 - |r|/range), or a custom bounded callable."""
    kind: str = "none"
    amplitude: float = 0.0
    range: float = 1.0
    func: object = None

    def __post_init__(self):
        if self.kind not in ("none", "pair", "custom"):
            raise PotentialError(f"unknown interaction kind {self.kind!r}")
        if self.kind == "pair" and (self.amplitude < 0 or not self.range > 0):
            raise PotentialError("pair interaction needs amplitude >= 0 and range > 0")
        if self.kind == "custom" and not callable(self.func):
            raise PotentialError("custom interaction needs a callable")

    def pair_profile(self, r):
        return self.amplitude * np.maximum(0.0, 1.0 - np.asarray(r, dtype=float) / self.range)

    def sup(self, n):
        if self.kind == "pair":
            return self.amplitude * n * (n - 1) / 2.0
        return 0.0

    def __call__(self, x):
        """x has shape (..., N, d)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros(x.shape[:-2])
        if self.kind == "custom":
            return np.asarray(self.func(x), dtype=float)
        total = np.zeros(x.shape[:-2])
        for i, k in itertools.combinations(range(x.shape[-2]), 2):
            diff = x[..., i, :] - x[..., k, :]
            total += self.pair_profile(np.sqrt(np.sum(diff * diff, axis=-1)))
        return total


NO_INTERACTION = Interaction()


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    single_site: SingleSite
    layout: SiteLayout
    interaction: Interaction = NO_INTERACTION
    background: float = 0.0

    def __post_init__(self):
        if self.single_site.d != self.layout.d:
            raise PotentialError("single-site profile and layout disagree on d")
        validate_ball_fit(self.layout, self.single_site.delta)

    @property
    def d(self):
        return self.layout.d

    @property
    def delta(self):
        return self.single_site.delta


def validate_ball_fit(layout, delta):
    """B(y_j, delta) must stay inside the cell of y_j so the balls are disjoint."""
    if layout.kind == "crooked" and layout.max_offset() > 0.5 - delta + 1e-12:
        raise PotentialError(
            f"crooked offsets up to {layout.max_offset()} push B(y_j, {delta}) out of Lambda_1(j); "
            f"keep |y_j - j|_inf <= {0.5 - delta}"
        )
    if layout.kind == "delone":
        points = layout.split.primary_points()
        if len(points) > 1:
            from scipy.spatial import cKDTree
            dist, _ = cKDTree(points).query(points, k=2)
            if np.min(dist[:, 1]) < 2 * delta - 1e-12:
                raise PotentialError(f"Delone points closer than 2 delta = {2 * delta}")


# ---------------------------------------------------------------------------
# Point evaluators
# ---------------------------------------------------------------------------

def _as_points(x, width):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(-1, width)
    return pts, single


def _bump_sum(layout, u, keys, weights, pts):
    total = np.zeros(pts.shape[0])
    for key, w in zip(keys, weights):
        if w != 0:
            total += w * u(pts - layout.position(key))
    return total


def one_body_potential(layout, u, field, x):
    """V^(1)(x) = sum_j omega_j u(x - y_j), over the couplings whose bump reaches x."""
    pts, single = _as_points(x, layout.d)
    keys = layout.keys_near(pts.min(axis=0), pts.max(axis=0), u.sup_half_width())
    try:
        weights = field.lookup(keys)
    except DisorderError as e:
        raise PotentialError(str(e)) from None
    values = _bump_sum(layout, u, keys, weights, pts)
    return float(values[0]) if single else values


def n_body_potential(layout, u, field, x):
    """V^(N)(x_1..x_N) = sum_i V^(1)(x_i) with the same field in every block."""
    x = np.asarray(x, dtype=float)
    d = layout.d
    n = x.shape[-1] // d
    pts = x.reshape(-1, n, d)
    total = np.zeros(pts.shape[0])
    for i in range(n):
        total += np.atleast_1d(one_body_potential(layout, u, field, pts[:, i, :]))
    return float(total[0]) if x.ndim == 1 else total


def background_potential(amplitude, x):
    """V_0 = b sum over all coordinates of cos(2 pi x), Z^d-periodic in each particle."""
    x = np.asarray(x, dtype=float)
    if amplitude == 0:
        return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
    return amplitude * np.sum(np.cos(2.0 * np.pi * x), axis=-1)


def interaction_potential(interaction, x, d):
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // d
    values = interaction(x.reshape(x.shape[:-1] + (n, d)))
    return float(values) if x.ndim == 1 else values


def total_potential(spec, field, x):
    """U + V_0 + V^(N) at points of R^{Nd}."""
    return (n_body_potential(spec.layout, spec.single_site, field, x)
            + interaction_potential(spec.interaction, x, spec.d)
            + background_potential(spec.background, x))


def _block_distances(layout, rect, pts, delta):
    """Per particle: (skeleton site index, squared distance) pairs closer than delta."""
    d = layout.d
    blocks = []
    for i, box in enumerate(rect.factors):
        y = layout.positions(layout.skeleton(box))
        xi = pts[:, i * d:(i + 1) * d]
        if y.shape[0] == 0:
            blocks.append(np.full((pts.shape[0], 0), np.inf))
            continue
        diff = xi[:, None, :] - y[None, :, :]
        sq = np.sum(diff * diff, axis=-1)
        sq[sq >= delta * delta] = np.inf
        blocks.append(sq)
    return blocks


def comparison_potential_W(layout, delta, x, rect):
    """W(x) = sum over product skeleton sites j of chi_{B(y_j, delta)}(x), Euclidean balls in R^{Nd}."""
    pts, single = _as_points(x, layout.d * rect.n)
    blocks = _block_distances(layout, rect, pts, delta)
    values = np.zeros(pts.shape[0])
    live = np.all(np.stack([np.isfinite(b).any(axis=1) for b in blocks]), axis=0)
    for p in np.flatnonzero(live):
        per_block = [b[p][np.isfinite(b[p])] for b in blocks]
        values[p] = sum(1 for combo in itertools.product(*per_block) if sum(combo) < delta * delta)
    return float(values[0]) if single else values


def deterministic_potential(layout, u, rect, x):
    """Ṽ^(N): the N-body potential restricted to skeleton sites, all couplings one."""
    pts, single = _as_points(x, layout.d * rect.n)
    d = layout.d
    total = np.zeros(pts.shape[0])
    for i, box in enumerate(rect.factors):
        keys = layout.skeleton(box)
        total += _bump_sum(layout, u, keys, np.ones(len(keys)), pts[:, i * d:(i + 1) * d])
    return float(total[0]) if single else total


@dataclass(frozen=True)
class LowerBoundReport:
    ok: bool
    margin: float
    worst_point: tuple


def check_lower_bound(layout, u, delta, rect, points):
    """Verify Ṽ^(N)(x) >= N W(x) at every point; reports the minimal margin."""
    pts, _ = _as_points(points, layout.d * rect.n)
    lhs = deterministic_potential(layout, u, rect, pts)
    rhs = rect.n * comparison_potential_W(layout, delta, pts, rect)
    margin = np.atleast_1d(lhs - rhs)
    worst = int(np.argmin(margin))
    return LowerBoundReport(bool(margin[worst] >= -1e-12), float(margin[worst]), tuple(pts[worst]))


def sample_points(rect, count, seed, near=None, spread=0.0):
    """Uniform points in the rectangle; with `near` (array of R^{Nd} points) add jittered copies."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    lo = np.concatenate([box.lower() for box in rect.factors])
    hi = np.concatenate([box.upper() for box in rect.factors])
    pts = lo + (hi - lo) * rng.random((count, lo.size))
    if near is not None and len(near):
        near = np.asarray(near, dtype=float)
        extra = near + rng.uniform(-spread, spread, size=near.shape)
        pts = np.vstack([pts, near, extra])
    return pts
