"""Invariant suite run by `nbody-wegner selftest` and by selftest experiment files."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import disorder
from .ensemble import wilson_interval
from .experiments import ExperimentResult, _delone_trial, geometric_sigma, s_sum, s_sum_closed
from .geometry import n_cube, n_rectangle, r_separated
from .hamiltonian import Mesh, assemble, required_sites
from .potential import (
    PotentialSpec, SingleSite, check_lower_bound, crooked_layout, regular_layout, sample_points,
)
from .spectral import (
    SpectrumWindow, all_eigenvalues, count_below, eigen_window, gamma_formula, tie_tolerance,
    trace_projector,
)


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


def free_laplacian(n_nodes, p=1):
    """1D Dirichlet Laplacian with n_nodes interior nodes and zero potential."""
    spec = PotentialSpec(SingleSite("cube", 1), regular_layout(1))
    rect = n_cube(1, 1, (n_nodes + 1) / p)
    field = disorder.constant_field(required_sites(rect, spec), 0.0, d=1)
    return assemble(Mesh(rect, p), spec, field)


def check_laplacian_spectrum():
    worst = 0.0
    bad_tallies = []
    for n in (3, 10, 50):
        H = free_laplacian(n)
        exact = 2.0 - 2.0 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
        worst = max(worst, float(np.max(np.abs(all_eigenvalues(H) - np.sort(exact)))))
        # E=1 at n=50 sits on 2 - 2cos(pi/3); ties count as <= E
        tol = tie_tolerance(H)
        for E in (0.5, 1.0, 2.5, 3.9):
            if count_below(H, E) != int(np.count_nonzero(exact <= E + tol)):
                bad_tallies.append(f"n={n} E={E:g}")
    detail = f"max eigenvalue error {worst:.2e}"
    if bad_tallies:
        detail += "; count mismatch at " + ", ".join(bad_tallies)
    return Check("laplacian-spectrum", worst <= 1e-10 and not bad_tallies, detail)


def check_count_below():
    count = count_below(free_laplacian(10), 2.0)
    return Check("count-below-n10", count == 5, f"count(E=2) = {count}")


def _fuzz_config(rng):
    d = int(rng.integers(1, 3))
    n = int(rng.integers(1, 4 if d == 1 else 3))
    ell = float(rng.uniform(0.5, 1.0))
    delta = ell / 2.0
    kind = ["cube", "ball", "tent"][int(rng.integers(3))]
    u = SingleSite(kind, d, ell, delta)
    layout = crooked_layout(d, float(rng.uniform(0.0, 0.5 - delta)), int(rng.integers(1 << 31)))
    sides = [int(rng.integers(1, 4)) for _ in range(n)]
    centers = [tuple(float(c) for c in rng.integers(-3, 4, size=d)) for _ in range(n)]
    return layout, u, n_rectangle(sides, centers)


def check_lower_bound_fuzz(configs=200, seed=7):
    rng = np.random.Generator(np.random.Philox(key=seed))
    failures, worst = 0, math.inf
    for k in range(configs):
        layout, u, rect = _fuzz_config(rng)
        per_factor = [layout.positions(layout.skeleton(box)) for box in rect.factors]
        combos = list(itertools.islice(itertools.product(*per_factor), 64))
        near = np.array([np.concatenate(c) for c in combos]) if combos else None
        points = sample_points(rect, 64, seed + k, near=near, spread=u.delta)
        report = check_lower_bound(layout, u, u.delta, rect, points)
        worst = min(worst, report.margin)
        failures += not report.ok
    return Check("lower-bound-fuzz", failures == 0, f"{failures} failure(s), min margin {worst:.3g}")


def check_s_sum():
    worst = 0.0
    for B in (0.5, 1, 2, 10):
        for m in range(1, 11):
            closed = s_sum_closed(B, m)
            worst = max(worst, abs(s_sum(m, geometric_sigma(B, m)) - closed) / closed)
    return Check("s-sum-closed-form", worst <= 1e-14, f"max relative error {worst:.2e}")


def check_gamma():
    quarter = abs(gamma_formula(1.0, 0.0, 0.5) ** 2 - 0.25) < 1e-15
    monotone = True
    for delta in (0.1, 0.3, 0.5):
        values = [gamma_formula(1.0, K, delta) for K in (0.0, 1.0, 5.0, 20.0)]
        monotone &= all(a > b for a, b in zip(values, values[1:]))
    for K in (0.0, 2.0):
        values = [gamma_formula(1.0, K, delta) for delta in (0.1, 0.3, 0.5)]
        monotone &= all(a < b for a, b in zip(values, values[1:]))
    return Check("gamma-formula", quarter and monotone, "gamma^2(M_D=1, K=0, delta=1/2) = 1/4")


def check_delone(count=10):
    bad = 0
    for t in range(count):
        d = 1 + t % 2
        rec = _delone_trial(d, 0.5, 1.5, 0.5, 12.0, 100, t)
        bad += not (rec["ok"] and rec["gamma1_ok"] and rec["partition_ok"])
    return Check("delone-pipeline", bad == 0, f"{bad} of {count} set(s) failed")


def check_separation_example():
    A = n_rectangle([1, 1], [(0.5,), (0.5,)])
    B = n_rectangle([1, 1], [(0.5,), (6.5,)])
    sep = r_separated(A, B, 1.0)
    ok = bool(sep) and sep.witness == frozenset({2}) and not r_separated(A, A, 1.0)
    return Check("r-separation-example", ok, f"witness {sorted(sep.witness) if sep else None}")


def _random_symmetric(n, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    X = rng.normal(size=(n, n))
    return (X + X.T) / 2.0


def check_trace_additivity():
    A = _random_symmetric(40, 3)
    evals = np.linalg.eigvalsh(A)
    cut = (evals[19] + evals[20]) / 2.0
    lo, hi = evals[5] - 0.1, evals[35] + 0.1
    left, right = SpectrumWindow(lo, cut), SpectrumWindow(cut, hi)
    union_ok = trace_projector(A, SpectrumWindow(lo, hi)) == trace_projector(A, left) + trace_projector(A, right)
    tally_ok = all(trace_projector(A, w) == int(np.count_nonzero((evals >= w.lo) & (evals <= w.hi)))
                   for w in (left, right))
    return Check("trace-additivity", bool(union_ok and tally_ok), f"split at {cut:.3f}")


def check_solver_agreement():
    spec = PotentialSpec(SingleSite("cube", 1), regular_layout(1))
    rect = n_cube(1, 1, 101)
    field = disorder.sample_field(disorder.uniform(0.0, 1.0), required_sites(rect, spec), 11, 0, d=1)
    H = assemble(Mesh(rect, 2), spec, field)
    w = SpectrumWindow(0.5, 1.5)
    dense = eigen_window(H, w, dense_max=10 ** 6)
    krylov = eigen_window(H, w, dense_max=0)
    ok = len(dense) == len(krylov) and np.allclose(dense.eigenvalues, krylov.eigenvalues, atol=1e-8)
    return Check("solver-agreement", bool(ok), f"{len(dense)} eigenvalue(s) in [0.5, 1.5]")


def check_wilson():
    ok = all(wilson_interval(k, 50).contains(k / 50) for k in range(51))
    return Check("wilson-contains-estimate", ok, "")


def check_disorder_monotonicity():
    spec = PotentialSpec(SingleSite("cube", 1), regular_layout(1))
    rect = n_cube(1, 1, 9)
    sites = required_sites(rect, spec)
    base = disorder.sample_field(disorder.uniform(0.0, 1.0), sites, 5, 0, d=1)
    bumped_values = base.values.copy()
    bumped_values[len(sites) // 2] += 0.5
    bumped = disorder.DisorderField(base.sites, bumped_values, 1)
    mesh = Mesh(rect, 2)
    before = all_eigenvalues(assemble(mesh, spec, base))
    after = all_eigenvalues(assemble(mesh, spec, bumped))
    return Check("disorder-monotonicity", bool(np.all(after >= before - 1e-10)), "")


CHECKS = (
    check_laplacian_spectrum,
    check_count_below,
    check_s_sum,
    check_gamma,
    check_separation_example,
    check_trace_additivity,
    check_wilson,
    check_disorder_monotonicity,
    check_solver_agreement,
    check_delone,
    check_lower_bound_fuzz,
)


def run_selftest():
    result = ExperimentResult("selftest")
    for fn in CHECKS:
        try:
            check = fn()
        except Exception as e:  # a crashing check is a failed check
            check = Check(fn.__name__.replace("check_", "").replace("_", "-"), False, f"error: {e}")
        result.raw.append({"check": check.name, "ok": check.ok, "detail": check.detail})
    failed = [r["check"] for r in result.raw if not r["ok"]]
    result.aggregate = [{"checks": len(result.raw), "passed": len(result.raw) - len(failed),
                         "failed": len(failed)}]
    result.summary = {"all_passed": not failed, "failed": failed}
    result.warnings = [f"self-test check failed: {name}" for name in failed]
    return result
