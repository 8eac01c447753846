"""Experiment file DSL parser, schema and validation.

One setting per line:

    <key.path> -- <value>    # optional comment

`# title: <text>` names the experiment; other `#` lines are comments.
Every key must appear in SCHEMA; repeated or unknown keys are errors.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = ("wegner1", "wegner2", "ids", "ids-conv", "lipschitz", "ucp",
                    "ids-gap", "delone-check", "selftest")


class ConfigError(Exception):
    pass


def _key(type_name, default, doc, choices=None):
    return {"type": type_name, "default": default, "doc": doc, "choices": choices}


SCHEMA = {
    "schema_version": _key("int", SCHEMA_VERSION, "experiment file format version"),

    "system.d": _key("int", 1, "space dimension d (1..3)"),
    "system.n": _key("int", 1, "number of particles N"),
    "system.L": _key("float", 10.0, "side of every factor box"),
    "system.centers": _key("points", [], "factor box centers 'x,y; x,y', one per particle (default origin)"),
    "system.p": _key("int", 2, "mesh points per unit length (h = 1/p)"),
    "system.boundary": _key("choice", "dirichlet", "boundary condition", ("dirichlet", "periodic")),
    "system.dimension_cap": _key("int", 200000, "largest matrix dimension assembled"),
    "system.dense_max": _key("int", 3000, "largest dimension solved densely"),

    "potential.profile": _key("choice", "cube", "single-site profile u", ("cube", "ball", "tent")),
    "potential.ell": _key("float", 1.0, "plateau side ell of u, in (0, 1]"),
    "potential.delta": _key("float?", None, "comparison ball radius delta (default ell/2)"),
    "potential.radius": _key("float?", None, "ball profile radius (default ell sqrt(d)/2)"),
    "potential.ramp": _key("float", 0.25, "tent profile ramp width"),
    "potential.layout": _key("choice", "regular", "site layout", ("regular", "crooked", "delone")),
    "potential.jitter": _key("float", 0.0, "crooked layout offset amplitude"),
    "potential.layout_seed": _key("int", 0, "crooked layout offset seed"),
    "potential.interaction": _key("choice", "none", "interaction U", ("none", "pair")),
    "potential.interaction_amplitude": _key("float", 1.0, "pair interaction height A"),
    "potential.interaction_range": _key("float", 1.0, "pair interaction range"),
    "potential.background": _key("float", 0.0, "periodic background amplitude b"),

    "disorder.kind": _key("choice", "uniform", "coupling distribution", ("uniform", "density", "atomic")),
    "disorder.low": _key("float", 0.0, "support lower end (uniform, density)"),
    "disorder.high": _key("float", 1.0, "support upper end (uniform, density)"),
    "disorder.heights": _key("floats", [], "piecewise-constant density bin heights"),
    "disorder.atoms": _key("floats", [0.0, 1.0], "atomic distribution atoms"),
    "disorder.weights": _key("floats", [], "atomic weights (default equal)"),
    "disorder.seed": _key("int", 1, "master seed of the coupling streams"),
    "disorder.override_sites": _key("sites", [], "sites 'j,k; j,k' with their own uniform law"),
    "disorder.override_low": _key("float", 0.0, "override uniform lower end"),
    "disorder.override_high": _key("float", 2.0, "override uniform upper end"),

    "delone.m": _key("float", 1.0, "Delone minimal spacing m"),
    "delone.M": _key("float", 2.0, "Delone covering scale M"),
    "delone.jitter": _key("float", 0.5, "Delone generator jitter in [0, 1]"),
    "delone.seed": _key("int", 0, "Delone generator seed"),
    "delone.points": _key("str", "", "point-list file to load instead of generating"),

    "experiment.kind": _key("choice", "selftest", "experiment to run", EXPERIMENT_KINDS),
    "experiment.trials": _key("int", 100, "disorder realizations (Delone sets for delone-check)"),
    "experiment.e0": _key("float", 4.0, "energy cap E0"),
    "experiment.windows": _key("intervals", [], "energy windows 'lo:hi, lo:hi'"),
    "experiment.window_center": _key("float", 1.0, "center of generated windows"),
    "experiment.window_widths": _key("floats", [], "widths of windows generated around window_center"),
    "experiment.volumes": _key("floats", [], "box sides L to sweep (default system.L)"),
    "experiment.energies": _key("grid?", None, "energy grid 'start:stop:step'"),
    "experiment.epsilons": _key("floats", [], "distance thresholds for wegner2"),
    "experiment.separation_R": _key("float?", None, "separation length R for wegner2"),
    "experiment.box_b_centers": _key("points", [], "second rectangle centers for wegner2"),
    "experiment.box_b_side": _key("float?", None, "second rectangle side (default system.L)"),
    "experiment.field_policy": _key("choice", "shared", "wegner2 field policy", ("shared", "independent")),
    "experiment.m_d": _key("float", 1.0, "unique-continuation constant M_D"),
    "experiment.conv_tolerance": _key("float", 0.05, "ids-conv sup-norm tolerance"),
    "experiment.unit_size": _key("int", 50, "trials per checkpoint unit"),

    "output.dir": _key("str", "", "artifact directory (default: persistent path.out)"),
    "output.formats": _key("words", ["csv", "json", "report", "plot"], "artifact kinds to write"),
}

_OUTPUT_FORMATS = ("csv", "json", "report", "plot")


# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------

def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _parse_value(type_name, text, choices):
    text = text.strip()
    if type_name.endswith("?"):
        if text.lower() in ("", "none"):
            return None
        type_name = type_name[:-1]
    if type_name == "int":
        return int(text)
    if type_name == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    if type_name == "str":
        return text
    if type_name == "choice":
        if text not in choices:
            raise ValueError(f"must be one of {', '.join(choices)}")
        return text
    if type_name == "floats":
        return _floats(text)
    if type_name == "words":
        return [t.strip() for t in text.split(",") if t.strip()]
    if type_name == "intervals":
        out = []
        for part in text.split(","):
            if not part.strip():
                continue
            lo, sep, hi = part.partition(":")
            if not sep:
                raise ValueError(f"interval '{part.strip()}' needs the form lo:hi")
            out.append([float(lo), float(hi)])
        return out
    if type_name == "grid":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("grid needs the form start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not step > 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop >= start")
        return [start, stop, step]
    if type_name == "points":
        return [_floats(p) for p in text.split(";") if p.strip()]
    if type_name == "sites":
        return [[int(c) for c in p.split(",") if c.strip()] for p in text.split(";") if p.strip()]
    raise ValueError(f"unknown schema type {type_name}")


def _render_value(type_name, value):
    if value is None:
        return "none"
    type_name = type_name.rstrip("?")
    if type_name in ("floats", "words"):
        return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if type_name == "intervals":
        return ", ".join(f"{lo!r}:{hi!r}" for lo, hi in value)
    if type_name == "grid":
        return ":".join(repr(v) for v in value)
    if type_name in ("points", "sites"):
        return "; ".join(",".join(repr(c) if isinstance(c, float) else str(c) for c in p) for p in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# ExperimentConfig
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    values: dict
    title: str = ""
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    def section(self, prefix):
        return {k[len(prefix) + 1:]: v for k, v in self.values.items() if k.startswith(prefix + ".")}

    @property
    def kind(self):
        return self.values["experiment.kind"]

    def replace(self, **changes):
        """Copy with dotted keys given as keyword arguments using '__' for '.'."""
        values = dict(self.values)
        explicit = set(self.explicit)
        for name, v in changes.items():
            key = name.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"unknown key '{key}'")
            values[key] = v
            explicit.add(key)
        cfg = ExperimentConfig(values, self.title, explicit)
        validate_config(cfg)
        return cfg

    def to_dict(self):
        return {"title": self.title, "values": {k: self.values[k] for k in SCHEMA}}


def default_values():
    return {k: json.loads(json.dumps(v["default"])) for k, v in SCHEMA.items()}


def parse_config(text):
    """Parse DSL text into a validated ExperimentConfig.

    Raises:
        ConfigError with the line number and key path of the first problem
    """
    values = default_values()
    title = ""
    seen = set()

    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.strip()

        if not line:
            continue

        if line.startswith('#'):
            content = line[1:].strip()
            if content.startswith('title:'):
                title = content[len('title:'):].strip()
            continue

        if '--' not in line:
            raise ConfigError(f"Line {lineno}: missing '--' separator")

        left, _, right = line.partition('--')
        key = left.strip()
        if not key:
            raise ConfigError(f"Line {lineno}: empty key")
        if key not in SCHEMA:
            raise ConfigError(f"Line {lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"Line {lineno}: duplicate key '{key}'")
        seen.add(key)

        value_raw = right.strip()
        if '#' in value_raw:
            value_raw = value_raw[:value_raw.index('#')].strip()

        entry = SCHEMA[key]
        try:
            values[key] = _parse_value(entry["type"], value_raw, entry["choices"])
        except ValueError as e:
            raise ConfigError(f"Line {lineno}: bad value for '{key}': {e}")

    cfg = ExperimentConfig(values, title, seen)
    validate_config(cfg)
    return cfg


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read config '{path}': {e}")
    return parse_config(text)


def config_from_dict(data):
    """Rebuild a config from the dict stored in a JSON summary."""
    values = default_values()
    for key, v in data.get("values", {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key '{key}'")
        values[key] = v
    cfg = ExperimentConfig(values, data.get("title", ""), set(data.get("values", {})))
    validate_config(cfg)
    return cfg


def render_config(cfg):
    lines = []
    if cfg.title:
        lines.append(f"# title: {cfg.title}")
    for key, entry in SCHEMA.items():
        lines.append(f"{key} -- {_render_value(entry['type'], cfg.values[key])}")
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _fail(key, message):
    raise ConfigError(f"{key}: {message}")


def windows_of(cfg):
    """Explicit windows, else windows of each width around window_center."""
    if cfg["experiment.windows"]:
        return [tuple(w) for w in cfg["experiment.windows"]]
    c = cfg["experiment.window_center"]
    return [(c - w / 2.0, c + w / 2.0) for w in cfg["experiment.window_widths"]]


def volumes_of(cfg):
    return list(cfg["experiment.volumes"]) or [cfg["system.L"]]


def validate_config(cfg):
    v = cfg.values
    if v["schema_version"] != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {v['schema_version']} (expected {SCHEMA_VERSION})")
    d, n = v["system.d"], v["system.n"]
    if not 1 <= d <= 3:
        _fail("system.d", f"d must be 1, 2 or 3, got {d}")
    if n < 1:
        _fail("system.n", f"N must be at least 1, got {n}")
    if v["system.p"] < 1:
        _fail("system.p", "points per unit length must be at least 1")
    for L in [v["system.L"]] + list(v["experiment.volumes"]):
        if not L > 0:
            _fail("system.L", f"box sides must be positive, got {L}")
    for key in ("system.centers", "experiment.box_b_centers"):
        centers = v[key]
        if centers and (len(centers) != n or any(len(c) != d for c in centers)):
            _fail(key, f"need {n} centers of {d} coordinates each")
    for key in ("disorder.override_sites",):
        if any(len(s) != d for s in v[key]):
            _fail(key, f"override sites need {d} integer coordinates")

    ell = v["potential.ell"]
    if not 0 < ell <= 1:
        _fail("potential.ell", f"ell must lie in (0, 1], got {ell}")
    delta = v["potential.delta"]
    if delta is not None:
        if not 0 < delta <= 0.5:
            _fail("potential.delta", f"delta={delta} violates delta in (0, 1/2] required by the "
                                     "unique-continuation estimate")
        if delta > ell / 2.0:
            _fail("potential.delta", f"delta={delta} exceeds ell/2={ell / 2.0}")
    if not 0 <= v["potential.jitter"] <= 0.5:
        _fail("potential.jitter", "crooked offsets must satisfy |y_j - j|_inf <= 1/2")
    if v["potential.interaction_amplitude"] < 0:
        _fail("potential.interaction_amplitude", "interaction must be nonnegative")

    if v["disorder.kind"] == "density" and not v["disorder.heights"]:
        _fail("disorder.heights", "a density distribution needs bin heights")
    if v["disorder.kind"] == "atomic":
        if not v["disorder.atoms"]:
            _fail("disorder.atoms", "an atomic distribution needs atoms")
        if v["disorder.weights"] and len(v["disorder.weights"]) != len(v["disorder.atoms"]):
            _fail("disorder.weights", "one weight per atom")
    if v["disorder.kind"] != "atomic" and not v["disorder.low"] < v["disorder.high"]:
        _fail("disorder.high", "support needs low < high")

    if not 0 < v["delone.m"] < v["delone.M"]:
        _fail("delone.m", "need 0 < m < M")
    if v["potential.layout"] == "delone" and not v["delone.points"]:
        eff = delta if delta is not None else ell / 2.0
        if 2 * eff > v["delone.m"] + 1e-12:
            _fail("potential.delta", f"delta={eff} needs 2 delta <= delone.m = {v['delone.m']} "
                                     "so the balls B(y_j, delta) stay disjoint")

    kind = v["experiment.kind"]
    if v["experiment.trials"] < 1:
        _fail("experiment.trials", "need at least one trial")
    if v["experiment.unit_size"] < 1:
        _fail("experiment.unit_size", "need at least one trial per unit")
    e0 = v["experiment.e0"]
    for lo, hi in windows_of(cfg):
        if lo > hi:
            _fail("experiment.windows", f"window [{lo}, {hi}] is reversed")
        if hi > e0:
            _fail("experiment.windows", f"window [{lo}, {hi}] reaches above E0 = {e0}")
    if kind in ("wegner1", "wegner2", "ucp") and not windows_of(cfg):
        _fail("experiment.windows", f"{kind} needs windows or window_widths")
    if kind in ("ids", "ids-conv", "lipschitz", "ids-gap") and v["experiment.energies"] is None:
        _fail("experiment.energies", f"{kind} needs an energy grid")
    if kind == "lipschitz":
        start, stop, step = v["experiment.energies"]
        if stop - start < step * (1.0 - 1e-9):
            _fail("experiment.energies", "lipschitz slopes need at least two grid energies")
    if kind == "wegner2":
        if v["experiment.separation_R"] is None:
            _fail("experiment.separation_R", "two-volume runs need a separation length R")
        if not v["experiment.separation_R"] > 0:
            _fail("experiment.separation_R", "R must be positive")
        if not v["experiment.box_b_centers"]:
            _fail("experiment.box_b_centers", "two-volume runs need the second rectangle")
        if not v["experiment.epsilons"]:
            _fail("experiment.epsilons", "two-volume runs need an epsilon grid")
    if kind == "ids-conv" and v["potential.interaction"] != "none":
        _fail("potential.interaction", "the convolution identity holds for non-interacting particles only")
    unknown = [f for f in v["output.formats"] if f not in _OUTPUT_FORMATS]
    if unknown:
        _fail("output.formats", f"unknown format(s) {', '.join(unknown)}")
