"""Artifact building and file writing."""

import csv
import io
import json
import math
import os

import numpy as np

SUMMARY_SCHEMA_VERSION = 1


class ArtifactError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset, tuple)):
        return sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def build_summary(result, cfg, config_hash):
    """Build and return the JSON summary dict for a finished experiment."""
    return {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "config_hash": config_hash,
        "kind": result.kind,
        "title": cfg.title,
        "config": cfg.to_dict(),
        "summary": result.summary,
        "warnings": list(result.warnings),
    }


def render_csv(rows, config_hash):
    """CSV text with a '# config_hash' first line; columns in first-row order."""
    buf = io.StringIO()
    buf.write(f"# config_hash: {config_hash}\n")
    if rows:
        columns = list(rows[0])
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def render_plot(series, name, config_hash):
    lines = [f"# config_hash: {config_hash}", f"# series: {name}", "x y ci_lo ci_hi"]
    for point in series:
        lines.append(" ".join(_cell(v) for v in point))
    return "\n".join(lines) + "\n"


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    else:
        out.append((prefix, value))


def render_report(result, cfg, config_hash):
    lines = [
        f"Experiment: {cfg.title or result.kind}",
        f"Kind: {result.kind}",
        f"Config hash: {config_hash}",
        "",
        "Summary",
        "-------",
    ]
    items = []
    _flatten("", result.summary, items)
    for key, value in items:
        if isinstance(value, float) and math.isfinite(value):
            value = f"{value:.6g}"
        lines.append(f"  {key}: {_cell(value) if not isinstance(value, str) else value}")
    lines += ["", "Warnings", "--------"]
    lines += [f"  - {w}" for w in result.warnings] or ["  (none)"]
    if result.aggregate:
        lines += ["", "Aggregates", "----------"]
        columns = list(result.aggregate[0])
        lines.append("  " + "  ".join(columns))
        for row in result.aggregate:
            lines.append("  " + "  ".join(
                f"{row[c]:.6g}" if isinstance(row[c], float) else _cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _write_text(path, text):
    try:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    except OSError as e:
        raise ArtifactError(f"Cannot write file '{path}': {e}")


def write_artifacts(result, cfg, config_hash, out_dir, formats=("csv", "json", "report", "plot")):
    """Write every requested artifact into out_dir. Returns the written paths.

    Aggregates carry no timestamps, so identical inputs give identical bytes.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ArtifactError(f"Cannot create output directory '{out_dir}': {e}")

    written = []
    stem = result.kind
    if "csv" in formats:
        for name, rows in (("raw", result.raw), ("aggregate", result.aggregate)):
            path = os.path.join(out_dir, f"{stem}-{name}.csv")
            _write_text(path, render_csv(rows, config_hash))
            written.append(path)
    if "json" in formats:
        path = os.path.join(out_dir, f"{stem}-summary.json")
        text = json.dumps(build_summary(result, cfg, config_hash), indent=2, sort_keys=True,
                          default=_jsonable, ensure_ascii=False)
        _write_text(path, text + "\n")
        written.append(path)
    if "report" in formats:
        path = os.path.join(out_dir, f"{stem}-report.txt")
        _write_text(path, render_report(result, cfg, config_hash))
        written.append(path)
    if "plot" in formats:
        for name, series in sorted(result.plots.items()):
            path = os.path.join(out_dir, f"{stem}-{name}.dat")
            _write_text(path, render_plot(series, name, config_hash))
            written.append(path)
    return written


def read_summary(path):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(f"Cannot read summary '{path}': {e}")
