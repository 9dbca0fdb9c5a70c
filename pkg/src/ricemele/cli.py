"""Command line front end.

    ricemele spectrum   [--config PATH] [--override key=value ...]
    ricemele phases     ...
    ricemele evolve     ...
    ricemele wavepacket ...
    ricemele preset [NAME] ...

Common flags: ``--out PATH`` (default stdout), ``--format csv|json``,
``--workers N`` (0 = all cores). Output is deterministic: header lines
(``# key: value``) then the table, floats written with 17 significant digits.
On failure a one-line JSON error record goes to stderr and the exit code is
nonzero (2 for configuration errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .config import validate_config
from .exceptions import ConfigError
from .presets import PRESETS, Table, run_config, run_preset

__all__ = ["main", "build_parser", "format_table"]


def _fmt(value) -> str:
    if isinstance(value, (bool, int)) or value is None:
        return str(value)
    if isinstance(value, float):
        return "%.17g" % value
    if hasattr(value, "dtype"):
        return _fmt(value.item())
    return str(value)


def _json_value(value):
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def format_table(table: Table, fmt: str = "csv") -> str:
    if fmt == "json":
        doc = {
            "header": table.header,
            "columns": table.columns,
            "rows": [[_json_value(v) for v in row] for row in table.rows],
        }
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO()
    for line in table.header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="config file (sections [model], [protocol], ...)")
    common.add_argument("--out", help="output path ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    common.add_argument("--workers", type=int, help="worker threads, 0 = all cores")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. model.delta=0.3 (repeatable)")

    parser = argparse.ArgumentParser(prog="ricemele", description="Flux-driven non-Hermitian Rice-Mele ring.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="band energies on the momentum grid at model.phi")
    sub.add_parser("phases", parents=[common], help="dynamic and geometric phases along a flux sweep")
    sub.add_parser("evolve", parents=[common], help="amplification and fidelity of an evolved eigenstate")
    sub.add_parser("wavepacket", parents=[common], help="Gaussian packet: centre, band populations, energy")
    p = sub.add_parser("preset", parents=[common], help="run a named figure preset")
    p.add_argument("name", nargs="?", choices=sorted(PRESETS), help="defaults to run.preset from --config")
    return parser


def _error_record(exc: BaseException) -> dict:
    record = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        record["details"] = exc.as_records()
    return record


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
        cfg = validate_config(text, args.override)
        fmt = args.format or cfg.run["format"]
        out = args.out or cfg.run["out"]
        workers = args.workers if args.workers is not None else cfg.run["workers"]
        if args.command == "preset":
            name = args.name or cfg.run["preset"]
            if not name:
                raise ConfigError([(None, "run.preset", "no preset named on the command line or in the config")])
            # the preset carries its own parameters; only --override values are layered on top
            table = run_preset(name, args.override, workers)
        else:
            for w in cfg.warnings:
                print(f"warning: {w}", file=sys.stderr)
            table = run_config(cfg, args.command, workers)
        payload = format_table(table, fmt)
        if out == "-":
            sys.stdout.write(payload)
        else:
            Path(out).write_text(payload)
    except Exception as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
