"""Turns an ExperimentConfig into rectangles, potentials, disorder fields and Hamiltonians."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import delone, disorder
from .config import ExperimentConfig
from .geometry import Box1, n_cube, n_rectangle
from .hamiltonian import Mesh, assemble, mesh_dimension, required_sites
from .potential import (
    Interaction, PotentialSpec, SingleSite, crooked_layout, delone_layout, regular_layout,
)

logger = logging.getLogger(__name__)

_STREAM_STRIDE = 0x9E3779B97F4A7C15


def derived_seed(seed, stream):
    """Master seed of an independent stream; stream 0 is the seed itself."""
    return (int(seed) + int(stream) * _STREAM_STRIDE) % (1 << 64)


def energy_grid(grid):
    start, stop, step = grid
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


@dataclass(frozen=True, eq=False)
class System:
    d: int
    n: int
    p: int
    boundary: str
    L: float
    centers: tuple
    spec: PotentialSpec
    distribution: disorder.CouplingDistribution
    seed: int
    overrides: dict
    dimension_cap: int
    dense_max: int

    def rect(self, L=None, centers=None, n=None):
        n = self.n if n is None else n
        L = self.L if L is None else L
        if centers is None:
            centers = self.centers[:n] if self.centers else None
        return n_cube(n, self.d, L, centers)

    def mesh(self, rect):
        return Mesh(rect, self.p, self.boundary)

    def dimension(self, rect):
        return mesh_dimension(rect, self.p, self.boundary)

    def sites(self, rect):
        return required_sites(rect, self.spec)

    def field(self, sites, trial, stream=0):
        overrides = {k: v for k, v in self.overrides.items() if tuple(k) in set(map(tuple, sites))}
        return disorder.sample_field(self.distribution, sites, derived_seed(self.seed, stream), trial,
                                     overrides=overrides, d=self.d)

    def hamiltonian(self, rect, field, include_interaction=True):
        return assemble(self.mesh(rect), self.spec, field, include_interaction, self.dimension_cap)

    def sample(self, rect, trial, stream=0, include_interaction=True):
        """One realization: field over the sites of `rect` and its Hamiltonian."""
        field = self.field(self.sites(rect), trial, stream)
        return self.hamiltonian(rect, field, include_interaction)

    @property
    def ergodic(self):
        return self.spec.layout.kind != "delone" and not self.overrides


def build_distribution(cfg):
    kind = cfg["disorder.kind"]
    if kind == "uniform":
        return disorder.uniform(cfg["disorder.low"], cfg["disorder.high"])
    if kind == "density":
        return disorder.bounded_density(cfg["disorder.heights"], cfg["disorder.low"], cfg["disorder.high"])
    return disorder.atomic(cfg["disorder.atoms"], cfg["disorder.weights"] or None)


def _working_box(cfg):
    """Cube around the origin holding every rectangle of the run plus bump reach."""
    centers = list(cfg["system.centers"]) + list(cfg["experiment.box_b_centers"])
    far = max((max(abs(c) for c in ctr) for ctr in centers), default=0.0)
    sides = [cfg["system.L"]] + list(cfg["experiment.volumes"])
    if cfg["experiment.box_b_side"] is not None:
        sides.append(cfg["experiment.box_b_side"])
    M = cfg["delone.M"]
    return Box1((0.0,) * cfg["system.d"], 2 * far + max(sides) + 4 * M + 2)


def build_layout(cfg):
    d = cfg["system.d"]
    kind = cfg["potential.layout"]
    if kind == "regular":
        return regular_layout(d)
    if kind == "crooked":
        return crooked_layout(d, cfg["potential.jitter"], cfg["potential.layout_seed"])
    if cfg["delone.points"]:
        points = delone.read_delone(cfg["delone.points"])
    else:
        points = delone.generate_delone(cfg["delone.m"], cfg["delone.M"], _working_box(cfg),
                                        cfg["delone.seed"], cfg["delone.jitter"])
    logger.info("Delone layout: %d points, m=%g, M=%g", len(points), points.m, points.M)
    return delone_layout(delone.split_delone(points), d)


def build_spec(cfg, interaction=True):
    d = cfg["system.d"]
    u = SingleSite(cfg["potential.profile"], d, cfg["potential.ell"], cfg["potential.delta"],
                   cfg["potential.radius"], cfg["potential.ramp"])
    if interaction and cfg["potential.interaction"] == "pair":
        U = Interaction("pair", cfg["potential.interaction_amplitude"], cfg["potential.interaction_range"])
    else:
        U = Interaction()
    return PotentialSpec(u, build_layout(cfg), U, cfg["potential.background"])


def build_system(cfg: ExperimentConfig):
    override_law = disorder.uniform(cfg["disorder.override_low"], cfg["disorder.override_high"])
    overrides = {tuple(s): override_law for s in cfg["disorder.override_sites"]}
    return System(
        d=cfg["system.d"],
        n=cfg["system.n"],
        p=cfg["system.p"],
        boundary=cfg["system.boundary"],
        L=cfg["system.L"],
        centers=tuple(tuple(c) for c in cfg["system.centers"]),
        spec=build_spec(cfg),
        distribution=build_distribution(cfg),
        seed=cfg["disorder.seed"],
        overrides=overrides,
        dimension_cap=cfg["system.dimension_cap"],
        dense_max=cfg["system.dense_max"],
    )


def second_rectangle(cfg):
    side = cfg["experiment.box_b_side"] if cfg["experiment.box_b_side"] is not None else cfg["system.L"]
    centers = cfg["experiment.box_b_centers"]
    return n_rectangle([side] * len(centers), [tuple(c) for c in centers])
