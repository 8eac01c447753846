"""nbody-wegner coordinator: resolves a run, dispatches the experiment, writes artifacts."""

import os
import sys

from . import experiments
from .artifacts import ArtifactError, write_artifacts
from .checkpoint import CheckpointError, UnitCheckpoint
from .config import ConfigError, config_hash, load_config, volumes_of, windows_of
from .delone import DeloneError
from .disorder import DisorderError
from .experiments import ExperimentError
from .geometry import GeometryError, r_separated
from .hamiltonian import HamiltonianError
from .potential import PotentialError
from .selftest import run_selftest
from .spectral import SpectralError, SpectrumWindow
from .system import build_system, energy_grid, second_rectangle

# One canonical global bundle.
g = {}

EXIT_OK = 0
EXIT_FAILED_CHECKS = 1
EXIT_VALIDATION = 2
EXIT_ARTIFACT = 3
EXIT_NUMERICAL = 4

_VALIDATION_ERRORS = (ConfigError, GeometryError, DisorderError, DeloneError, PotentialError,
                      HamiltonianError, ExperimentError)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def run(options):
    """Load, execute and persist one experiment; returns the process exit status.

    options keys:
        config  : experiment file path (str)
        out     : artifact directory (Path or str), used when output.dir is empty
        trials  : trial count override (int or None)
        seed    : disorder seed override (int or None)
        workers : worker pool size (int)
    """
    g["options"] = options
    try:
        _resolve(options)
        result = _dispatch()
        out_dir = _out_dir(options)
        paths = write_artifacts(result, g["cfg"], g["hash"], out_dir, g["cfg"]["output.formats"])
    except _VALIDATION_ERRORS as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ArtifactError, CheckpointError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ARTIFACT
    except SpectralError as e:
        print(f"Numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    for w in result.warnings:
        print(f"warning: {w}")
    print(f"Wrote {len(paths)} artifact(s) to {out_dir} (config {g['hash'][:12]})")
    if result.kind == "selftest" and not result.summary["all_passed"]:
        return EXIT_FAILED_CHECKS
    return EXIT_OK


def describe(options):
    """Print the plan for a config without running any trial."""
    g["options"] = options
    try:
        _resolve(options)
        lines = _plan_lines()
    except _VALIDATION_ERRORS as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    print("\n".join(lines))
    return EXIT_OK


def _resolve(options):
    cfg = load_config(options["config"])
    changes = {}
    if options.get("trials") is not None:
        changes["experiment__trials"] = int(options["trials"])
    if options.get("seed") is not None:
        changes["disorder__seed"] = int(options["seed"])
    if changes:
        cfg = cfg.replace(**changes)
    g["cfg"] = cfg
    g["hash"] = config_hash(cfg)
    g["workers"] = max(1, int(options.get("workers") or 1))
    g["system"] = None if cfg.kind in ("selftest", "delone-check") else build_system(cfg)


def _out_dir(options):
    return g["cfg"]["output.dir"] or str(options.get("out") or "results")


def _checkpoint():
    path = os.path.join(_out_dir(g["options"]), "checkpoints", f"{g['cfg'].kind}-{g['hash'][:16]}")
    return UnitCheckpoint(path, g["hash"])


def _windows():
    cfg = g["cfg"]
    return [SpectrumWindow(lo, hi, cfg["experiment.e0"]) for lo, hi in windows_of(cfg)]


def _pool_args():
    return {"workers": g["workers"], "checkpoint": _checkpoint(),
            "unit_size": g["cfg"]["experiment.unit_size"]}


# ---------------------------------------------------------------------------
# Experiment handlers
# ---------------------------------------------------------------------------

def handle_wegner1():
    cfg = g["cfg"]
    return experiments.wegner_one_volume(g["system"], _windows(), volumes_of(cfg),
                                         cfg["experiment.trials"], **_pool_args())


def handle_wegner2():
    cfg = g["cfg"]
    system = g["system"]
    return experiments.wegner_two_volume(
        system, system.rect(), second_rectangle(cfg), cfg["experiment.separation_R"], _windows()[0],
        cfg["experiment.epsilons"], cfg["experiment.trials"], cfg["experiment.field_policy"],
        cfg["experiment.e0"], **_pool_args())


def handle_ids():
    cfg = g["cfg"]
    return experiments.ids_estimate(g["system"], energy_grid(cfg["experiment.energies"]), volumes_of(cfg),
                                    cfg["experiment.trials"], **_pool_args())


def handle_ids_conv():
    cfg = g["cfg"]
    return experiments.ids_convolution_check(g["system"], energy_grid(cfg["experiment.energies"]),
                                             cfg["experiment.trials"], cfg["experiment.conv_tolerance"],
                                             **_pool_args())


def handle_lipschitz():
    cfg = g["cfg"]
    return experiments.ids_lipschitz_check(g["system"], energy_grid(cfg["experiment.energies"]),
                                           volumes_of(cfg), cfg["experiment.trials"], **_pool_args())


def handle_ids_gap():
    cfg = g["cfg"]
    return experiments.ids_gap(g["system"], energy_grid(cfg["experiment.energies"]), volumes_of(cfg),
                               cfg["experiment.trials"], **_pool_args())


def handle_ucp():
    cfg = g["cfg"]
    return experiments.ucp_experiment(g["system"], _windows(), volumes_of(cfg), cfg["experiment.trials"],
                                      cfg["experiment.m_d"], cfg["experiment.e0"], **_pool_args())


def handle_delone_check():
    cfg = g["cfg"]
    M = cfg["delone.M"]
    return experiments.delone_check(cfg["system.d"], cfg["delone.m"], M, cfg["delone.jitter"],
                                    max(cfg["system.L"], 8 * M), cfg["delone.seed"],
                                    cfg["experiment.trials"], **_pool_args())


def handle_selftest():
    return run_selftest()


_HANDLERS = {
    "wegner1": handle_wegner1,
    "wegner2": handle_wegner2,
    "ids": handle_ids,
    "ids-conv": handle_ids_conv,
    "lipschitz": handle_lipschitz,
    "ids-gap": handle_ids_gap,
    "ucp": handle_ucp,
    "delone-check": handle_delone_check,
    "selftest": handle_selftest,
}


def _dispatch():
    return _HANDLERS[g["cfg"].kind]()


# ---------------------------------------------------------------------------
# Dry-run plan
# ---------------------------------------------------------------------------

def _plan_lines():
    cfg = g["cfg"]
    system = g["system"]
    lines = [
        f"Experiment: {cfg.title or cfg.kind}",
        f"Kind: {cfg.kind}",
        f"Config hash: {g['hash']}",
        f"Trials: {cfg['experiment.trials']}  workers: {g['workers']}",
    ]
    if system is None:
        return lines
    lines.append(f"System: N={system.n} d={system.d} p={system.p} boundary={system.boundary} "
                 f"layout={system.spec.layout.kind} profile={system.spec.single_site.kind} "
                 f"delta={system.spec.delta:g}")
    rects = [("L=%g" % L, system.rect(L)) for L in volumes_of(cfg)]
    if cfg.kind == "ids-conv":
        rects.append(("one-body", system.rect(n=1)))
    if cfg.kind == "wegner2":
        rects = [("A", system.rect()), ("B", second_rectangle(cfg))]
    for label, rect in rects:
        dim = system.dimension(rect)
        method = "dense" if dim <= system.dense_max else "sparse inertia / shift-invert Lanczos"
        line = f"  {label}: matrix dimension {dim} ({method})"
        if dim > system.dimension_cap:
            line += f"  REFUSED: exceeds dimension cap {system.dimension_cap}"
        lines.append(line)
    if cfg.kind == "wegner2":
        R = cfg["experiment.separation_R"]
        sep = r_separated(system.rect(), second_rectangle(cfg), R)
        if sep:
            lines.append(f"R-separation (R={R:g}): witness J={sorted(sep.witness)} condition {sep.condition}")
        else:
            lines.append(f"R-separation (R={R:g}): NOT separated, run would be refused")
    warnings = experiments.model_warnings(system, need_density=cfg.kind == "lipschitz")
    if cfg.kind in ("wegner1", "lipschitz"):
        warnings = experiments.volume_warnings(system, volumes_of(cfg)) + warnings
    lines += [f"warning: {w}" for w in warnings]
    return lines
