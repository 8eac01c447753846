"""nbody-wegner: entry point."""

import os
import sys

import lionscliapp as app
from lionscliapp import override_inputs

from . import __version__
from .runner import EXIT_FAILED_CHECKS, EXIT_OK, describe, run
from .selftest import run_selftest


def _options():
    from lionscliapp import ctx

    # --config, --out, --trials, --seed and --workers are transient CLI
    # options, not persisted to the project config.
    cli = override_inputs.cli_overrides
    config_path = cli.get("config")
    if not config_path:
        print("Error: pass --config <experiment file>", file=sys.stderr)
        sys.exit(2)
    workers = cli.get("workers") or os.environ.get("NBW_WORKERS") or ctx.get("workers")
    return {
        "config": config_path,
        "out": cli.get("out") or ctx.get("path.out"),
        "trials": cli.get("trials"),
        "seed": cli.get("seed"),
        "workers": int(workers or 1),
    }


def _run_command():
    sys.exit(run(_options()))


def _describe_command():
    sys.exit(describe(_options()))


def _selftest_command():
    result = run_selftest()
    for row in result.raw:
        print(f"{'ok  ' if row['ok'] else 'FAIL'} {row['check']}  {row['detail']}")
    sys.exit(EXIT_OK if result.summary["all_passed"] else EXIT_FAILED_CHECKS)


def _version_command():
    print(f"nbody-wegner {__version__}")


app.declare_app("nbody-wegner", __version__)
app.describe_app("Monte Carlo Wegner, IDS and unique-continuation statistics for N-body random Schrodinger operators.")
app.declare_projectdir(".nbody-wegner")
app.declare_key("path.out", "results")
app.describe_key("path.out", "Default artifact directory when the experiment file sets no output.dir")
app.declare_key("workers", "1")
app.describe_key("workers", "Default worker pool size (overridden by NBW_WORKERS and --workers)")
app.declare_cmd("run", _run_command)
app.describe_cmd("run", "Run the experiment in --config; writes CSV, JSON, report and plot files. Accepts --out, --trials, --seed, --workers.")
app.declare_cmd("describe", _describe_command)
app.describe_cmd("describe", "Print matrix sizes, trial counts and threshold warnings for --config without computing.")
app.declare_cmd("selftest", _selftest_command)
app.describe_cmd("selftest", "Run the built-in invariant suite.")
app.declare_cmd("version", _version_command)
app.describe_cmd("version", "Print the program version.")


def main():
    app.main()


if __name__ == "__main__":
    main()
