"""Monte Carlo drivers: Wegner one- and two-volume statistics, IDS estimates,
the convolution identity, Lipschitz slopes, unique-continuation ratios and
Delone pipeline checks.

Every driver takes a System, evaluates one picklable trial function per
realization through ensemble.map_trials, and returns an ExperimentResult
whose aggregates are recomputable from its raw records.
"""

import functools
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import delone
from .disorder import levy_concentration
from .ensemble import fit_through_origin, map_trials, mean_interval, sample_variance, wilson_interval
from .geometry import Box1, r_separated
from .hamiltonian import kron_sum
from .potential import comparison_potential_W
from .spectral import (
    SpectrumWindow, all_eigenvalues, comparison_constant_K, count_profile, eigen_window,
    eigen_windows, gamma_formula, tie_tolerance, ucp_ratio, window_traces,
)

logger = logging.getLogger(__name__)


class ExperimentError(Exception):
    pass


@dataclass
class ExperimentResult:
    kind: str
    raw: list = field(default_factory=list)
    aggregate: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Hypothesis annotations
# ---------------------------------------------------------------------------

def wegner_threshold(n, d):
    return 72.0 * math.sqrt(n * d)


def volume_warnings(system, volumes):
    out = []
    threshold = wegner_threshold(system.n, system.d)
    for L in volumes:
        if L <= threshold:
            out.append(f"L={L:g} is below the Wegner volume threshold 72 sqrt(Nd) = {threshold:.2f}; "
                       "only scaling trends are meaningful")
        if float(L) != int(L) or int(L) % 2 == 0:
            out.append(f"L={L:g} is not an odd integer")
    return out


def model_warnings(system, need_density=False):
    out = []
    dist = system.distribution
    if not dist.is_continuous():
        if need_density:
            out.append("hypothesis violation: atomic couplings have no bounded density; "
                       "slopes are expected to grow with L")
        else:
            out.append("hypothesis violation: atomic couplings, s(h) does not vanish as h -> 0")
    if system.spec.layout.kind == "delone":
        out.append("non-ergodic model: Delone layout")
    if system.overrides:
        out.append("non-ergodic model: couplings not identically distributed "
                   f"({len(system.overrides)} override site(s))")
    return out


def volume_of(system, L, n=None):
    return float(L) ** ((system.n if n is None else n) * system.d)


def _run(fn, trials, workers, checkpoint, unit_size):
    return map_trials(fn, trials, workers=workers, unit_size=unit_size, checkpoint=checkpoint)


# ---------------------------------------------------------------------------
# One-volume Wegner estimate
# ---------------------------------------------------------------------------

def _wegner1_trial(system, volumes, windows, trial):
    traces = []
    for L in volumes:
        H = system.sample(system.rect(L), trial)
        traces.append([int(t) for t in window_traces(H, windows, system.dense_max)])
    return {"trial": trial, "traces": traces}


def _inclusion_pairs(windows):
    return [(a, b) for a, b in itertools.permutations(range(len(windows)), 2)
            if windows[b].lo <= windows[a].lo and windows[a].hi <= windows[b].hi
            and (windows[a].lo, windows[a].hi) != (windows[b].lo, windows[b].hi)]


def wegner_one_volume(system, windows, volumes, trials, workers=1, checkpoint=None, unit_size=50):
    """P{sigma(H) meets I} and E[Tr E(I)] per (L, I), with scaling fits."""
    windows = list(windows)
    volumes = list(volumes)
    fn = functools.partial(_wegner1_trial, system, volumes, windows)
    records = _run(fn, trials, workers, checkpoint, unit_size)

    result = ExperimentResult("wegner1")
    result.warnings = volume_warnings(system, volumes) + model_warnings(system)
    for rec in records:
        for iL, L in enumerate(volumes):
            for iw, w in enumerate(windows):
                result.raw.append({"trial": rec["trial"], "L": L, "lo": w.lo, "hi": w.hi,
                                   "trace": rec["traces"][iL][iw]})

    means = np.zeros((len(volumes), len(windows)))
    for iL, L in enumerate(volumes):
        vol = volume_of(system, L)
        for iw, w in enumerate(windows):
            vals = [rec["traces"][iL][iw] for rec in records]
            hit = wilson_interval(sum(1 for v in vals if v > 0), len(vals))
            mean = mean_interval(vals)
            means[iL, iw] = mean.value
            result.aggregate.append({
                "L": L, "volume": vol, "lo": w.lo, "hi": w.hi, "width": w.width,
                "levy_s": levy_concentration(system.distribution, w.width),
                "p_hit": hit.value, "p_lo": hit.low, "p_hi": hit.high,
                "mean_trace": mean.value, "mean_lo": mean.low, "mean_hi": mean.high,
                "trace_per_volume": mean.value / vol,
            })

    s_values = [levy_concentration(system.distribution, w.width) for w in windows]
    fits_width = {}
    for iL, L in enumerate(volumes):
        fit = fit_through_origin(s_values, means[iL])
        fits_width[f"{L:g}"] = {"slope": fit.slope, "r2": fit.r2, "residuals": list(fit.residuals)}
        result.plots[f"trace-vs-width-L{L:g}"] = [
            (row["width"], row["mean_trace"], row["mean_lo"], row["mean_hi"])
            for row in result.aggregate if row["L"] == L]
    fits_volume = {}
    vols = [volume_of(system, L) for L in volumes]
    for iw, w in enumerate(windows):
        fit = fit_through_origin(vols, means[:, iw])
        per_volume = [means[iL, iw] / vols[iL] for iL in range(len(volumes))]
        center = math.fsum(per_volume) / len(per_volume)
        spread = (max(per_volume) - min(per_volume)) / center if center > 0 else 0.0
        fits_volume[f"{w.lo:g}:{w.hi:g}"] = {"slope": fit.slope, "r2": fit.r2,
                                             "residuals": list(fit.residuals),
                                             "relative_spread": spread}
        result.plots[f"trace-vs-volume-{iw}"] = [
            (row["volume"], row["mean_trace"], row["mean_lo"], row["mean_hi"])
            for row in result.aggregate if (row["lo"], row["hi"]) == (w.lo, w.hi)]

    violations = 0
    for a, b in _inclusion_pairs(windows):
        for rec in records:
            for iL in range(len(volumes)):
                if rec["traces"][iL][a] > rec["traces"][iL][b]:
                    violations += 1
    result.summary = {
        "trials": trials,
        "fit_vs_levy_s": fits_width,
        "fit_vs_volume": fits_volume,
        "inclusion_violations": violations,
        "constants": "empirical",
    }
    return result


# ---------------------------------------------------------------------------
# Two-volume estimate
# ---------------------------------------------------------------------------

def window_eigenvalues(H, window, dense_max):
    if H.dimension <= dense_max:
        evals = all_eigenvalues(H)
        t = tie_tolerance(H)
        return evals[(evals >= window.lo - t) & (evals <= window.hi + t)]
    return eigen_window(H, window, dense_max).eigenvalues


def min_pair_distance(a, b):
    if len(a) == 0 or len(b) == 0:
        return math.inf
    return float(np.min(np.abs(np.subtract.outer(np.asarray(a), np.asarray(b)))))


def _wegner2_trial(system, rect_a, rect_b, window, e0, policy, trial):
    if policy == "shared":
        sites = sorted(set(system.sites(rect_a)) | set(system.sites(rect_b)))
        field_ = system.field(sites, trial)
        H_a = system.hamiltonian(rect_a, field_)
        H_b = system.hamiltonian(rect_b, field_)
    else:
        H_a = system.sample(rect_a, trial, stream=0)
        H_b = system.sample(rect_b, trial, stream=1)
    ev_a = window_eigenvalues(H_a, window, system.dense_max)
    ev_b = window_eigenvalues(H_b, window, system.dense_max)
    weyl = int(count_profile(H_b, [e0], system.dense_max)[0])
    return {"trial": trial, "distance": min_pair_distance(ev_a, ev_b),
            "a_hit": int(len(ev_a) > 0), "b_hit": int(len(ev_b) > 0), "weyl_b": weyl}


def wegner_two_volume(system, rect_a, rect_b, R, window, epsilons, trials, policy="shared",
                      e0=None, workers=1, checkpoint=None, unit_size=50):
    """P{dist(sigma_A in I0, sigma_B in I0) < eps} over an eps grid, for R-separated rectangles."""
    reach = system.spec.single_site.support_radius()
    if R < reach - 1e-12:
        raise ExperimentError(f"R={R:g} is smaller than the single-site support radius {reach:g}")
    sep = r_separated(rect_a, rect_b, R)
    if not sep:
        raise ExperimentError(f"rectangles are not {R:g}-separated: no index set J decouples them")
    witness = sorted(sep.witness)
    logger.info("R-separation witness J=%s (condition %d)", witness, sep.condition)
    e0 = window.hi if e0 is None else e0
    fn = functools.partial(_wegner2_trial, system, rect_a, rect_b, window, e0, policy)
    records = _run(fn, trials, workers, checkpoint, unit_size)

    result = ExperimentResult("wegner2")
    result.warnings = model_warnings(system)
    result.raw = [dict(rec) for rec in records]
    dists = [rec["distance"] for rec in records]
    p_values = []
    for eps in epsilons:
        est = wilson_interval(sum(1 for x in dists if x < eps), len(dists))
        p_values.append(est.value)
        result.aggregate.append({"epsilon": eps, "p_close": est.value, "p_lo": est.low, "p_hi": est.high})
    result.plots["p-close-vs-epsilon"] = [(r["epsilon"], r["p_close"], r["p_lo"], r["p_hi"])
                                          for r in result.aggregate]
    fit = fit_through_origin(epsilons, p_values)

    n = len(records)
    p_a = wilson_interval(sum(r["a_hit"] for r in records), n)
    p_b = wilson_interval(sum(r["b_hit"] for r in records), n)
    p_ab = wilson_interval(sum(r["a_hit"] * r["b_hit"] for r in records), n)
    product = p_a.value * p_b.value
    weyl = mean_interval([r["weyl_b"] for r in records])
    result.summary = {
        "trials": trials,
        "witness": witness,
        "condition": sep.condition,
        "R": R,
        "policy": policy,
        "window": [window.lo, window.hi],
        "fit": {"slope": fit.slope, "r2": fit.r2, "residuals": list(fit.residuals)},
        "product_law": {"p_a": p_a.value, "p_b": p_b.value, "p_both": p_ab.value,
                        "p_both_lo": p_ab.low, "p_both_hi": p_ab.high, "product": product,
                        "within_ci": p_ab.contains(product)},
        "weyl_count_b": {"mean": weyl.value, "lo": weyl.low, "hi": weyl.high, "label": "empirical"},
        "constants": "empirical",
    }
    return result


# ---------------------------------------------------------------------------
# Integrated density of states
# ---------------------------------------------------------------------------

def _ids_trial(system, volumes, energies, trial):
    counts = []
    for L in volumes:
        H = system.sample(system.rect(L), trial)
        counts.append([int(c) for c in count_profile(H, energies, system.dense_max)])
    return {"trial": trial, "counts": counts}


def _ids_table(system, records, volumes, energies, n=None):
    """Per-volume IDS rows: N(E), CI, variance of per-trial N_L(E)/|L| and DOS increments."""
    rows = []
    for iL, L in enumerate(volumes):
        vol = volume_of(system, L, n)
        previous = 0.0
        for iE, E in enumerate(energies):
            vals = [rec["counts"][iL][iE] / vol for rec in records]
            est = mean_interval(vals)
            rows.append({"L": L, "energy": float(E), "ids": est.value, "ids_lo": est.low,
                         "ids_hi": est.high, "variance": sample_variance(vals),
                         "dos": est.value - previous if iE else est.value})
            previous = est.value
    return rows


def _monotone(seq):
    return all(b >= a for a, b in zip(seq, seq[1:]))


def ids_estimate(system, energies, volumes, trials, workers=1, checkpoint=None, unit_size=50):
    """N(E) = mean count_below(E) / |Lambda|, with |Lambda| the continuum volume."""
    energies = np.asarray(energies, dtype=float)
    if np.any(np.diff(energies) < 0):
        raise ExperimentError("energy grid must be sorted")
    volumes = list(volumes)
    fn = functools.partial(_ids_trial, system, volumes, energies)
    records = _run(fn, trials, workers, checkpoint, unit_size)
    result = ExperimentResult("ids")
    result.warnings = model_warnings(system)
    for rec in records:
        for iL, L in enumerate(volumes):
            for iE, E in enumerate(energies):
                result.raw.append({"trial": rec["trial"], "L": L, "energy": float(E),
                                   "count": rec["counts"][iL][iE]})
    result.aggregate = _ids_table(system, records, volumes, energies)
    for L in volumes:
        rows = [r for r in result.aggregate if r["L"] == L]
        result.plots[f"ids-L{L:g}"] = [(r["energy"], r["ids"], r["ids_lo"], r["ids_hi"]) for r in rows]
        result.plots[f"dos-L{L:g}"] = [(r["energy"], r["dos"], r["dos"], r["dos"]) for r in rows]
    result.summary = {
        "trials": trials,
        "monotone_per_trial": all(_monotone(c) for rec in records for c in rec["counts"]),
        "monotone_aggregate": all(_monotone([r["ids"] for r in result.aggregate if r["L"] == L])
                                  for L in volumes),
        "mean_variance_by_volume": {
            f"{L:g}": math.fsum(r["variance"] for r in result.aggregate if r["L"] == L) / len(energies)
            for L in volumes},
    }
    return result


def step_eval(grid, values, x):
    """Right-continuous step interpolation of grid samples; 0 left of the grid."""
    grid = np.asarray(grid, dtype=float)
    pad = 1e-9 * (grid[1] - grid[0]) if grid.size > 1 else 1e-12
    idx = np.searchsorted(grid, np.asarray(x) + pad, side="right") - 1
    return np.where(idx >= 0, np.asarray(values)[np.clip(idx, 0, None)], 0.0)


def increments(values):
    values = np.asarray(values, dtype=float)
    return np.diff(values, prepend=0.0)


def convolve_ids(ids, dos, grid, times):
    """ids * dos * ... * dos (`times` convolutions), dos atoms placed on the grid points."""
    grid = np.asarray(grid, dtype=float)
    out = np.asarray(ids, dtype=float)
    shifts = grid[:, None] - grid[None, :]
    for _ in range(times):
        out = step_eval(grid, out, shifts) @ np.asarray(dos, dtype=float)
    return out


def sumset_count(eigenvalue_sets, energies, tol=1e-12):
    """#{(l_1, .., l_N): l_1 + .. + l_N <= E} over one eigenvalue set per particle."""
    sums = np.zeros(1)
    for ev in eigenvalue_sets:
        sums = np.add.outer(sums, np.asarray(ev, dtype=float)).ravel()
    sums.sort()
    scale = max(1.0, float(np.max(np.abs(sums)))) if sums.size else 1.0
    return np.searchsorted(sums, np.asarray(energies) + tol * scale, side="right")


def _identical_factors(rect):
    return all(box == rect.factors[0] for box in rect.factors)


def _conv_trial(system, energies, trial):
    rect1 = system.rect(n=1)
    field_ = system.field(system.sites(rect1), trial)
    H1 = system.hamiltonian(rect1, field_)
    ones = [int(c) for c in count_profile(H1, energies, system.dense_max)]
    if system.n == 1:
        return {"trial": trial, "ones": ones, "shared": ones, "ones_ind": [ones], "independent": ones}
    shared = [int(c) for c in count_profile(system.hamiltonian(system.rect(), field_), energies,
                                            system.dense_max)]
    factors = [system.sample(rect1, trial, stream=i + 1) for i in range(system.n)]
    ones_ind = [[int(c) for c in count_profile(F, energies, system.dense_max)] for F in factors]
    product = kron_sum([F.matrix for F in factors])
    independent = [int(c) for c in count_profile(product, energies, system.dense_max)]
    return {"trial": trial, "ones": ones, "shared": shared, "ones_ind": ones_ind,
            "independent": independent}


def ids_convolution_check(system, energies, trials, tolerance=0.05, workers=1, checkpoint=None,
                          unit_size=50):
    """Compare the N-body IDS with the (N-1)-fold convolution of one-body IDS and DOS.

    Both the shared-field realization (same couplings for every particle) and
    independent per-particle fields are measured from the same trials.
    """
    if system.spec.interaction.kind != "none":
        raise ExperimentError("the convolution identity needs interaction kind 'none'")
    if not _identical_factors(system.rect()):
        raise ExperimentError("the convolution identity needs identical factor boxes")
    energies = np.asarray(energies, dtype=float)
    fn = functools.partial(_conv_trial, system, energies)
    records = _run(fn, trials, workers, checkpoint, unit_size)

    vol1 = volume_of(system, system.L, 1)
    volN = volume_of(system, system.L)
    step = float(energies[1] - energies[0]) if energies.size > 1 else 1.0

    def mean_curve(key, vol):
        return np.array([math.fsum(rec[key][k] for rec in records) / len(records) / vol
                         for k in range(energies.size)])

    ids1 = mean_curve("ones", vol1)
    ids1_ind = np.array([math.fsum(c[k] for rec in records for c in rec["ones_ind"])
                         / (len(records) * len(records[0]["ones_ind"])) / vol1
                         for k in range(energies.size)])
    conv_shared = convolve_ids(ids1, increments(ids1), energies, system.n - 1)
    conv_ind = convolve_ids(ids1_ind, increments(ids1_ind), energies, system.n - 1)
    direct_shared = mean_curve("shared", volN)
    direct_ind = mean_curve("independent", volN)
    gap_shared = np.abs(direct_shared - conv_shared)
    gap_ind = np.abs(direct_ind - conv_ind)

    result = ExperimentResult("ids-conv")
    result.warnings = model_warnings(system)
    for rec in records:
        for k, E in enumerate(energies):
            result.raw.append({"trial": rec["trial"], "energy": float(E), "count_one": rec["ones"][k],
                               "count_shared": rec["shared"][k],
                               "count_independent": rec["independent"][k]})
    dos1 = increments(ids1)
    for k, E in enumerate(energies):
        result.aggregate.append({
            "energy": float(E), "ids_one": float(ids1[k]), "dos_one": float(dos1[k]),
            "ids_direct_shared": float(direct_shared[k]), "ids_conv_shared": float(conv_shared[k]),
            "ids_direct_independent": float(direct_ind[k]), "ids_conv_independent": float(conv_ind[k]),
        })
    result.plots["ids-direct-vs-conv"] = [(r["energy"], r["ids_direct_independent"],
                                           r["ids_conv_independent"], r["ids_conv_shared"])
                                          for r in result.aggregate]
    sup_ind = float(gap_ind.max()) if gap_ind.size else 0.0
    result.summary = {
        "trials": trials,
        "n": system.n,
        "sup_shared": float(gap_shared.max()) if gap_shared.size else 0.0,
        "l1_shared": math.fsum(gap_shared) * step,
        "sup_independent": sup_ind,
        "l1_independent": math.fsum(gap_ind) * step,
        "tolerance": tolerance,
        "independent_within_tolerance": sup_ind <= tolerance,
    }
    if sup_ind > tolerance:
        result.warnings.append(f"independent-field convolution discrepancy {sup_ind:.4f} exceeds "
                               f"tolerance {tolerance}")
    return result


def ids_lipschitz_check(system, energies, volumes, trials, workers=1, checkpoint=None, unit_size=50):
    """Largest finite-difference slope of the IDS per volume and its trend."""
    energies = np.asarray(energies, dtype=float)
    volumes = list(volumes)
    if energies.size < 2:
        raise ExperimentError(f"slopes need at least two grid energies, got {energies.size}")
    fn = functools.partial(_ids_trial, system, volumes, energies)
    records = _run(fn, trials, workers, checkpoint, unit_size)
    step = float(energies[1] - energies[0])
    result = ExperimentResult("lipschitz")
    result.warnings = volume_warnings(system, volumes) + model_warnings(system, need_density=True)
    table = _ids_table(system, records, volumes, energies)
    for iL, L in enumerate(volumes):
        vol = volume_of(system, L)
        ids = np.array([r["ids"] for r in table if r["L"] == L])
        slopes = np.diff(ids) / step
        k = int(np.argmax(slopes))
        per_trial = [(rec["counts"][iL][k + 1] - rec["counts"][iL][k]) / (vol * step) for rec in records]
        est = mean_interval(per_trial)
        result.aggregate.append({"L": L, "energy": float(energies[k]), "max_slope": float(slopes[k]),
                                 "slope_lo": est.low, "slope_hi": est.high})
        for j, s in enumerate(slopes):
            result.raw.append({"L": L, "energy": float(energies[j]), "slope": float(s)})
    result.plots["max-slope-vs-L"] = [(r["L"], r["max_slope"], r["slope_lo"], r["slope_hi"])
                                      for r in result.aggregate]
    first, last = result.aggregate[0], result.aggregate[-1]
    density_sup = system.distribution.density_sup()
    result.summary = {
        "trials": trials,
        "slope_ratio_last_first": last["max_slope"] / first["max_slope"] if first["max_slope"] else math.inf,
        "grows_beyond_ci": last["slope_lo"] > first["slope_hi"],
        "density_sup": density_sup,
    }
    return result


# ---------------------------------------------------------------------------
# Interaction gap
# ---------------------------------------------------------------------------

def _gap_trial(system, volumes, energies, trial):
    free, inter = [], []
    for L in volumes:
        rect = system.rect(L)
        field_ = system.field(system.sites(rect), trial)
        inter.append([int(c) for c in count_profile(system.hamiltonian(rect, field_, True), energies,
                                                    system.dense_max)])
        free.append([int(c) for c in count_profile(system.hamiltonian(rect, field_, False), energies,
                                                   system.dense_max)])
    return {"trial": trial, "free": free, "interacting": inter}


def ids_gap(system, energies, volumes, trials, workers=1, checkpoint=None, unit_size=50):
    """sup_E |N_int(E) - N_free(E)| per volume from the same realizations (trend only)."""
    energies = np.asarray(energies, dtype=float)
    volumes = list(volumes)
    fn = functools.partial(_gap_trial, system, volumes, energies)
    records = _run(fn, trials, workers, checkpoint, unit_size)
    result = ExperimentResult("ids-gap")
    result.warnings = model_warnings(system)
    if system.spec.interaction.kind == "none":
        result.warnings.append("no interaction configured; the gap is identically zero")
    order_violations = 0
    for iL, L in enumerate(volumes):
        vol = volume_of(system, L)
        free = np.array([rec["free"][iL] for rec in records], dtype=float)
        inter = np.array([rec["interacting"][iL] for rec in records], dtype=float)
        order_violations += int(np.count_nonzero(inter > free))
        gap = np.abs(free.mean(axis=0) - inter.mean(axis=0)) / vol
        k = int(np.argmax(gap))
        result.aggregate.append({"L": L, "sup_gap": float(gap[k]), "energy": float(energies[k])})
        for j, E in enumerate(energies):
            result.raw.append({"L": L, "energy": float(E), "ids_free": float(free[:, j].mean() / vol),
                               "ids_interacting": float(inter[:, j].mean() / vol)})
    result.plots["gap-vs-L"] = [(r["L"], r["sup_gap"], r["sup_gap"], r["sup_gap"]) for r in result.aggregate]
    gaps = [r["sup_gap"] for r in result.aggregate]
    result.summary = {"trials": trials, "trend": "shrinking" if _monotone(gaps[::-1]) else "not monotone",
                      "order_violations": order_violations, "label": "trend only"}
    return result


# ---------------------------------------------------------------------------
# Unique continuation
# ---------------------------------------------------------------------------

def _ucp_trial(system, volumes, windows, trial):
    ratios, vmax = [], 0.0
    for L in volumes:
        rect = system.rect(L)
        H = system.sample(rect, trial)
        mesh = H.mesh
        W = comparison_potential_W(system.spec.layout, system.spec.delta, mesh.points(), rect)
        potential = H.matrix.diagonal() - 2.0 * rect.n * rect.d / mesh.h ** 2
        vmax = max(vmax, float(np.max(np.abs(potential))))
        slices = eigen_windows(H, windows, system.dense_max)
        ratios.append([float(ucp_ratio(H, w, W, s)) for w, s in zip(windows, slices)])
    return {"trial": trial, "ratios": ratios, "v_sup": vmax}


def ucp_experiment(system, windows, volumes, trials, m_d=1.0, e0=4.0, workers=1, checkpoint=None,
                   unit_size=50):
    """Minimum of lambda_min(P W P on ran P) over the ensemble, per box size."""
    windows = list(windows)
    volumes = list(volumes)
    fn = functools.partial(_ucp_trial, system, volumes, windows)
    records = _run(fn, trials, workers, checkpoint, unit_size)
    result = ExperimentResult("ucp")
    result.warnings = model_warnings(system)
    for rec in records:
        for iL, L in enumerate(volumes):
            for iw, w in enumerate(windows):
                result.raw.append({"trial": rec["trial"], "L": L, "lo": w.lo, "hi": w.hi,
                                   "ratio": rec["ratios"][iL][iw]})
    for iL, L in enumerate(volumes):
        finite = [r for rec in records for r in rec["ratios"][iL] if math.isfinite(r)]
        empty = sum(1 for rec in records for r in rec["ratios"][iL] if not math.isfinite(r))
        est = mean_interval(finite) if finite else None
        result.aggregate.append({
            "L": L, "min_ratio": min(finite) if finite else math.inf,
            "mean_ratio": est.value if est else math.nan,
            "mean_lo": est.low if est else math.nan, "mean_hi": est.high if est else math.nan,
            "nonempty": len(finite), "empty": empty,
        })
    result.plots["min-ratio-vs-L"] = [(r["L"], r["min_ratio"], r["mean_lo"], r["mean_hi"])
                                      for r in result.aggregate]
    v_sup = max(rec["v_sup"] for rec in records)
    K = comparison_constant_K(v_sup, e0)
    gamma = gamma_formula(m_d, K, system.spec.delta)
    cap = 2.0 * gamma
    for w in windows:
        if w.width > cap:
            result.warnings.append(f"window [{w.lo:g}, {w.hi:g}] is wider than the reporting cap "
                                   f"2 gamma = {cap:.3e}")
    first, last = result.aggregate[0]["min_ratio"], result.aggregate[-1]["min_ratio"]
    ratio = last / first if math.isfinite(first) and first > 0 and math.isfinite(last) else math.nan
    result.summary = {
        "trials": trials,
        "K": K, "v_sup": v_sup, "gamma": gamma, "window_cap": cap, "m_d": m_d,
        "min_ratio_trend": ratio,
        "all_positive": all(r["min_ratio"] > 0 for r in result.aggregate),
        "constants": "empirical",
    }
    return result


# ---------------------------------------------------------------------------
# Delone pipeline
# ---------------------------------------------------------------------------

def _delone_trial(d, m, M, jitter, side, seed, trial):
    box = Box1((0.0,) * d, side)
    try:
        points = delone.generate_delone(m, M, box, seed + trial, jitter)
    except delone.DeloneError as e:
        return {"trial": trial, "points": 0, "ok": False, "gamma1_ok": False,
                "partition_ok": False, "violation": f"generation: {e}"}
    report = delone.verify_delone(points.points, m, M, box)
    split = delone.split_delone(points)
    total = len(split.primary) + len(split.secondary)
    merged = np.vstack([split.primary_points(), split.secondary_points()]) if total else np.empty((0, d))
    partition_ok = total == len(points) and sorted(map(tuple, merged)) == sorted(map(tuple, points.points))
    gamma1 = delone.verify_delone(split.primary_points(), m, 2 * M, box)
    return {"trial": trial, "points": len(points), "ok": report.ok, "gamma1_ok": gamma1.ok,
            "partition_ok": bool(partition_ok), "violation": report.violation or gamma1.violation or ""}


def delone_check(d, m, M, jitter, side, seed, trials, workers=1, checkpoint=None, unit_size=50):
    """Generate, verify and split `trials` Delone sets; Gamma_1 is checked at scale (m, 2M)."""
    fn = functools.partial(_delone_trial, d, m, M, jitter, side, seed)
    records = _run(fn, trials, workers, checkpoint, unit_size)
    result = ExperimentResult("delone-check")
    result.raw = [dict(r) for r in records]
    passed = sum(1 for r in records if r["ok"] and r["gamma1_ok"] and r["partition_ok"])
    result.aggregate = [{"d": d, "m": m, "M": M, "sets": len(records), "passed": passed}]
    result.summary = {"trials": trials, "all_passed": passed == len(records)}
    if passed != len(records):
        result.warnings.append(f"{len(records) - passed} Delone set(s) failed verification")
    return result


# ---------------------------------------------------------------------------
# S(m; sigma)
# ---------------------------------------------------------------------------

def s_sum(m, sigma):
    """sum_{j=1}^m sigma_j / (2^j sigma_0 ... sigma_{j-1}), exact for Fraction input."""
    if m < 1:
        raise ExperimentError(f"m must be at least 1, got {m}")
    if len(sigma) < m + 1:
        raise ExperimentError(f"need sigma_0 .. sigma_{m}, got {len(sigma)} values")
    if any(s <= 0 for s in sigma[:m + 1]):
        raise ExperimentError("sigma must be positive")
    if sigma[0] != 1:
        raise ExperimentError("sigma_0 must be 1")
    total, prod = 0, sigma[0]
    for j in range(1, m + 1):
        total += sigma[j] / (2 ** j * prod)
        prod *= sigma[j]
    return float(total)


def geometric_sigma(B, m):
    """sigma_j = B^{-2^{j-1}} (sigma_0 = 1) as exact fractions."""
    B = Fraction(str(B))
    if B <= 0:
        raise ExperimentError(f"B must be positive, got {B}")
    return [Fraction(1)] + [B ** -(2 ** (j - 1)) for j in range(1, m + 1)]


def s_sum_closed(B, m):
    if B <= 0 or m < 1:
        raise ExperimentError("need B > 0 and m >= 1")
    return (1.0 - 2.0 ** -m) / B


def s_sum_constraint(m, n, d):
    """m + 2 > log(Nd) / log 2, carried with S(m; sigma) results."""
    return m + 2 > math.log(n * d) / math.log(2)


def windows_from_pairs(pairs, e0=None):
    return [SpectrumWindow(lo, hi, e0) for lo, hi in pairs]
