"""Coupling distributions, reproducible disorder fields and Levy concentration."""

from dataclasses import dataclass, field

import numpy as np

_MASK32 = (1 << 32) - 1
_MASK64 = (1 << 64) - 1


class DisorderError(Exception):
    pass


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingDistribution:
    """Law of a single coupling omega_j.

    kind is one of "uniform" (on [low, high]), "density" (piecewise-constant
    density with bin `heights` on equal bins of [low, high]) or "atomic"
    (`atoms` with `weights`).
    """
    kind: str
    low: float = 0.0
    high: float = 1.0
    heights: tuple = ()
    atoms: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind in ("uniform", "density"):
            if not self.high > self.low:
                raise DisorderError(
                    f"{self.kind} distribution needs low < high, got [{self.low}, {self.high}]"
                )
        if self.kind == "uniform":
            return
        if self.kind == "density":
            h = np.asarray(self.heights, dtype=float)
            if h.size == 0 or np.any(h < 0) or not np.all(np.isfinite(h)) or h.sum() <= 0:
                raise DisorderError("density heights must be finite, nonnegative and not all zero")
            object.__setattr__(self, "heights", tuple(float(x) for x in h))
            return
        if self.kind == "atomic":
            atoms = np.asarray(self.atoms, dtype=float)
            if atoms.size == 0:
                raise DisorderError("atomic distribution needs at least one atom")
            weights = np.ones_like(atoms) if not self.weights else np.asarray(self.weights, dtype=float)
            if weights.shape != atoms.shape or np.any(weights < 0) or weights.sum() <= 0:
                raise DisorderError("atomic weights must match atoms and be nonnegative")
            order = np.argsort(atoms, kind="stable")
            object.__setattr__(self, "atoms", tuple(float(x) for x in atoms[order]))
            object.__setattr__(self, "weights", tuple(float(x) for x in weights[order] / weights.sum()))
            return
        raise DisorderError(f"unknown distribution kind {self.kind!r}")

    # -- derived quantities --------------------------------------------------

    def is_continuous(self):
        return self.kind in ("uniform", "density")

    def support(self):
        if self.kind == "atomic":
            return self.atoms[0], self.atoms[-1]
        return self.low, self.high

    def sup_abs(self):
        lo, hi = self.support()
        return max(abs(lo), abs(hi))

    def density_sup(self):
        """||rho||_inf, or inf for atomic laws."""
        if self.kind == "uniform":
            return 1.0 / (self.high - self.low)
        if self.kind == "density":
            h = np.asarray(self.heights)
            width = (self.high - self.low) / h.size
            return float(h.max() / (h.sum() * width))
        return float("inf")

    def mean(self):
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high)
        if self.kind == "density":
            masses = self._bin_masses()
            edges = self._edges()
            mids = 0.5 * (edges[:-1] + edges[1:])
            return float(np.dot(masses, mids))
        return float(np.dot(self.atoms, self.weights))

    def _edges(self):
        return np.linspace(self.low, self.high, len(self.heights) + 1)

    def _bin_masses(self):
        h = np.asarray(self.heights)
        return h / h.sum()

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.clip((x - self.low) / (self.high - self.low), 0.0, 1.0)
        if self.kind == "density":
            edges = self._edges()
            cum = np.concatenate([[0.0], np.cumsum(self._bin_masses())])
            return np.interp(x, edges, cum, left=0.0, right=1.0)
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.atoms, x, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def inverse_cdf(self, u):
        """Quantile transform of uniforms u in [0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * u
        if self.kind == "density":
            masses = self._bin_masses()
            cum = np.cumsum(masses)
            k = np.minimum(np.searchsorted(cum, u, side="right"), masses.size - 1)
            below = np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)
            frac = np.where(masses[k] > 0, (u - below) / np.where(masses[k] > 0, masses[k], 1.0), 0.0)
            width = (self.high - self.low) / masses.size
            return self.low + (k + np.clip(frac, 0.0, 1.0)) * width
        cum = np.cumsum(self.weights)
        k = np.minimum(np.searchsorted(cum, u, side="right"), len(self.atoms) - 1)
        return np.asarray(self.atoms)[k]

    def describe(self):
        if self.kind == "uniform":
            return f"uniform[{self.low}, {self.high}]"
        if self.kind == "density":
            return f"density[{self.low}, {self.high}] bins={len(self.heights)}"
        return f"atomic{list(self.atoms)}"


def uniform(low, high):
    return CouplingDistribution("uniform", low=float(low), high=float(high))


def bounded_density(heights, low, high):
    return CouplingDistribution("density", low=float(low), high=float(high), heights=tuple(heights))


def atomic(atoms, weights=None):
    return CouplingDistribution("atomic", atoms=tuple(atoms), weights=tuple(weights or ()))


# ---------------------------------------------------------------------------
# Counter-based streams
# ---------------------------------------------------------------------------

def _zigzag(k):
    return 2 * k if k >= 0 else -2 * k - 1


def stream_counter(trial, key, d):
    """Philox counter words for one coupling.

    Word 0 carries the rank (0 for lattice sites, >= 1 for extra Delone
    points), word 1 the trial, words 2-3 the zigzag-encoded site coordinates
    (first coordinate full width, the next two 32 bits each).
    """
    key = tuple(int(k) for k in key)
    coords = key[:d]
    rank = key[d] if len(key) > d else 0
    if d > 3:
        raise DisorderError(f"coupling streams support d <= 3, got d={d}")
    z = [_zigzag(c) for c in coords] + [0] * (3 - d)
    if z[1] > _MASK32 or z[2] > _MASK32 or z[0] > _MASK64:
        raise DisorderError(f"site {key} is outside the addressable stream range")
    if trial < 0 or rank < 0:
        raise DisorderError("trial and rank must be nonnegative")
    return np.array([rank, trial, z[0], (z[1] << 32) | z[2]], dtype=np.uint64)


def site_generator(master_seed, trial, key, d):
    """numpy Generator for one (master seed, trial, site) stream."""
    if not 0 <= int(master_seed) <= _MASK64:
        raise DisorderError(f"master seed must be a 64-bit unsigned integer, got {master_seed!r}")
    bitgen = np.random.Philox(key=int(master_seed), counter=stream_counter(trial, key, d))
    return np.random.Generator(bitgen)


def site_uniforms(master_seed, trial, keys, d, count=1):
    """One row of `count` uniforms per key; row i depends only on keys[i]."""
    out = np.empty((len(keys), count))
    for i, key in enumerate(keys):
        out[i] = site_generator(master_seed, trial, key, d).random(count)
    return out


# ---------------------------------------------------------------------------
# Disorder fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DisorderField:
    """One realization {omega_j} over a finite set of site keys."""
    sites: tuple
    values: np.ndarray
    d: int
    master_seed: int = 0
    trial: int = 0
    identically_distributed: bool = True
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(tuple(int(c) for c in s) for s in self.sites))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.sites) != self.values.shape[0]:
            raise DisorderError("sites and values have different lengths")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.sites)})

    def __len__(self):
        return len(self.sites)

    def __contains__(self, key):
        return tuple(key) in self._index

    def __getitem__(self, key):
        try:
            return float(self.values[self._index[tuple(key)]])
        except KeyError:
            raise DisorderError(f"site {tuple(key)} is not covered by the disorder field") from None

    def lookup(self, keys):
        missing = [tuple(k) for k in keys if tuple(k) not in self._index]
        if missing:
            raise DisorderError(
                f"{len(missing)} site(s) not covered by the disorder field, e.g. {missing[0]}"
            )
        return np.array([self.values[self._index[tuple(k)]] for k in keys])

    def as_dict(self):
        return {s: float(v) for s, v in zip(self.sites, self.values)}

    def relabeled(self, shift):
        """Field tau_k omega with (tau_k omega)_j = omega_{j+k}."""
        shift = tuple(int(c) for c in shift)
        sites = []
        for s in self.sites:
            coords = tuple(c - k for c, k in zip(s[: self.d], shift))
            sites.append(coords + s[self.d:])
        return DisorderField(tuple(sites), self.values.copy(), self.d,
                             self.master_seed, self.trial, self.identically_distributed)


def sample_field(dist, sites, master_seed, trial, overrides=None, d=None):
    """Sample omega_j for every key in `sites` from its own counter-based stream.

    `overrides` maps a site key to a distribution replacing `dist` there
    (independent but not identically distributed couplings).
    """
    sites = [tuple(int(c) for c in s) for s in sites]
    if not sites:
        raise DisorderError("cannot sample a field over an empty site list")
    if d is None:
        d = min(len(s) for s in sites)
    overrides = {tuple(k): v for k, v in (overrides or {}).items()}
    u = site_uniforms(master_seed, trial, sites, d)[:, 0]
    values = np.asarray(dist.inverse_cdf(u), dtype=float)
    for i, s in enumerate(sites):
        if s in overrides:
            values[i] = float(overrides[s].inverse_cdf(u[i]))
    return DisorderField(tuple(sites), values, d, int(master_seed), int(trial),
                         identically_distributed=not overrides)


def constant_field(sites, value=1.0, d=None):
    """Deterministic field, e.g. omega = 1 for the comparison potential."""
    sites = [tuple(int(c) for c in s) for s in sites]
    if d is None:
        d = min(len(s) for s in sites) if sites else 1
    return DisorderField(tuple(sites), np.full(len(sites), float(value)), d)


# ---------------------------------------------------------------------------
# Levy concentration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevyEstimate:
    estimate: float
    low: float
    high: float
    n_samples: int

    def contains(self, value):
        return self.low <= value <= self.high


def levy_concentration(dist, h):
    """Exact s(h) = sup_E mu([E, E + h]).

    Couplings are independent, so the conditional single-site measure equals
    the marginal and s is a property of the marginal law alone.
    """
    if h < 0:
        raise DisorderError(f"window width must be nonnegative, got {h!r}")
    if dist.kind == "uniform":
        return min(h / (dist.high - dist.low), 1.0)
    if dist.kind == "density":
        edges = dist._edges()
        starts = np.concatenate([edges, edges - h])
        mass = dist.cdf(starts + h) - dist.cdf(starts)
        return float(np.clip(mass.max(), 0.0, 1.0))
    atoms = np.asarray(dist.atoms)
    cum = np.concatenate([[0.0], np.cumsum(dist.weights)])
    right = np.searchsorted(atoms, atoms + h, side="right")
    left = np.searchsorted(atoms, atoms, side="left")
    return float(np.clip((cum[right] - cum[left]).max(), 0.0, 1.0))


def _window_max(sorted_x, h):
    n = sorted_x.size
    right = np.searchsorted(sorted_x, sorted_x + h, side="right")
    return float((right - np.arange(n)).max() / n)


def levy_concentration_empirical(dist, h, n_samples, seed, n_boot=200, confidence=0.95):
    """Sliding-window maximum of the empirical measure, with a bootstrap interval."""
    if h < 0:
        raise DisorderError(f"window width must be nonnegative, got {h!r}")
    if n_samples < 100:
        raise DisorderError(f"need at least 100 samples, got {n_samples}")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    x = np.sort(dist.inverse_cdf(rng.random(n_samples)))
    estimate = _window_max(x, h)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        boot[b] = _window_max(np.sort(x[rng.integers(0, n_samples, n_samples)]), h)
    alpha = 0.5 * (1.0 - confidence)
    low, high = np.quantile(boot, [alpha, 1.0 - alpha])
    return LevyEstimate(estimate, float(min(low, estimate)), float(max(high, estimate)), n_samples)
