"""Unit tests for building systems from experiment configs."""

import numpy as np
from nbody_wegner.config import parse_config
from nbody_wegner.system import build_system, derived_seed, energy_grid, second_rectangle


def _system(text):
    return build_system(parse_config(text))


def test_describe_example_dimension():
    system = _system("system.d -- 1\nsystem.n -- 2\nsystem.L -- 10\nsystem.p -- 2\n")
    assert system.dimension(system.rect()) == 361


def test_rect_uses_configured_centers():
    system = _system("system.n -- 2\nsystem.L -- 3\nsystem.centers -- 0; 10\n")
    assert [box.center for box in system.rect().factors] == [(0.0,), (10.0,)]
    assert system.rect(n=1).n == 1


def test_sampled_field_is_reproducible():
    system = _system("system.L -- 5\ndisorder.seed -- 7\n")
    sites = system.sites(system.rect())
    a = system.field(sites, trial=2)
    b = system.field(sites, trial=2)
    assert np.array_equal(a.values, b.values)


def test_independent_stream_differs():
    system = _system("system.L -- 5\n")
    sites = system.sites(system.rect())
    assert not np.array_equal(system.field(sites, 0).values, system.field(sites, 0, stream=1).values)


def test_derived_seed_stream_zero_is_seed():
    assert derived_seed(5, 0) == 5
    assert derived_seed(5, 1) != derived_seed(5, 2)


def test_energy_grid_includes_stop():
    assert energy_grid([0.0, 1.0, 0.25]).tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_sample_gives_hamiltonian_of_mesh_dimension():
    system = _system("system.L -- 5\nsystem.p -- 2\n")
    H = system.sample(system.rect(), trial=0)
    assert H.dimension == 9


def test_overrides_make_system_non_ergodic():
    system = _system("disorder.override_sites -- 0\ndisorder.override_low -- 5\ndisorder.override_high -- 6\n")
    assert not system.ergodic
    field = system.field(system.sites(system.rect(5)), 0)
    assert 5 <= field[(0,)] <= 6


def test_delone_layout_is_built_and_non_ergodic():
    system = _system("potential.layout -- delone\ndelone.m -- 1\ndelone.M -- 2\nsystem.L -- 6\n")
    assert system.spec.layout.kind == "delone"
    assert not system.ergodic
    assert system.sample(system.rect(), trial=0).dimension == 11


def test_second_rectangle_defaults_to_system_side():
    cfg = parse_config("system.L -- 4\nexperiment.box_b_centers -- 20\n")
    rect = second_rectangle(cfg)
    assert rect.sides == (4.0,)
    assert rect.factors[0].center == (20.0,)
