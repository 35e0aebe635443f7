"""Command-line entry points and deterministic result emission.

Subcommands: ``phase-scan``, ``position-scan``, ``width-scan``,
``mode-count``, ``selfcheck``.  Exit codes: 0 success, 2 configuration
error, 3 numerical invariant failure.  Diagnostics go to stderr; data goes
only to the output file.

CSV files use ``.`` decimals, LF line endings and 17-significant-digit
floats (round-trip safe).  Header lines start with ``#``; the timestamp sits
on its own ``# generated:`` line so the data payload is byte-identical
across runs with the same config, seed and engine.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config
from .experiments import (ScanResult, build_pipeline, coherence_length,
                          mode_count_measured, mode_count_theory,
                          phase_scan_experiment, position_scan, width_scan)
from .selfcheck import run_selfcheck

CSV_SCHEMA_VERSION = "msqsim-csv v1"

_SCAN_COLUMNS = {
    "phase": ("chi_rad", "ratio", "db", "db_corrected"),
    "position": ("position_mm", "ratio", "db", "db_corrected",
                 "fit_center_mm", "fit_waist_u_mm", "fit_waist_v_mm"),
    "width": ("width_mm", "ratio", "db", "db_corrected",
              "fit_waist_u_mm", "fit_waist_v_mm"),
}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _scan_rows(kind: str, result: ScanResult) -> List[List[float]]:
    rows = []
    for p in result.points:
        row = [p.value, p.ratio, p.db_raw, p.db_corrected]
        if kind == "position":
            row += [p.fit["center_mm"], p.fit["waist_u_mm"], p.fit["waist_v_mm"]]
        elif kind == "width":
            row += [p.fit["waist_u_mm"], p.fit["waist_v_mm"]]
        rows.append(row)
    return rows


def write_scan_csv(path: Path, kind: str, result: ScanResult,
                   config: ExperimentConfig) -> None:
    columns = _SCAN_COLUMNS[kind]
    lines = [
        f"# {CSV_SCHEMA_VERSION}",
        f"# package: msqsim {__version__}",
        f"# scan: {kind}",
        f"# engine: {result.metadata.get('engine', '')}",
        f"# config-sha256: {config.sha256()}",
        f"# generated: {datetime.now(timezone.utc).isoformat()}",
        ",".join(columns),
    ]
    for row in _scan_rows(kind, result):
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_scan_json(path: Path, kind: str, result: ScanResult,
                    config: ExperimentConfig) -> None:
    payload = {
        "schema": CSV_SCHEMA_VERSION.replace("csv", "json"),
        "package": f"msqsim {__version__}",
        "scan": kind,
        "engine": result.metadata.get("engine", ""),
        "config_sha256": config.sha256(),
        "generated": datetime.now(timezone.utc).isoformat(),
        "columns": list(_SCAN_COLUMNS[kind]),
        "rows": _scan_rows(kind, result),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


_PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Plot a {kind} scan CSV produced by msqsim (reads only the CSV)."""
import argparse
import csv

import matplotlib.pyplot as plt

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("csv_path", nargs="?", default={default!r})
args = parser.parse_args()

rows = []
with open(args.csv_path, newline="") as fh:
    for line in fh:
        if not line.startswith("#"):
            break
    header = line.strip().split(",")
    for row in csv.reader(fh):
        rows.append([float(v) for v in row])

if not rows:
    raise SystemExit("no data rows in " + args.csv_path)

cols = {{name: [r[i] for r in rows] for i, name in enumerate(header)}}
x = cols[header[0]]
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(x, cols["db"], "o-", label="raw")
ax.plot(x, cols["db_corrected"], "s--", label="floor corrected")
ax.axhline(0.0, color="k", lw=0.8, label="QNL")
ax.set_xlabel(header[0])
ax.set_ylabel("noise relative to QNL (dB)")
ax.legend()
fig.tight_layout()
out = args.csv_path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=150)
print("wrote", out)
'''


def write_plot_script(out_path: Path, kind: str) -> Path:
    script_path = out_path.with_suffix(out_path.suffix + ".plot.py")
    script_path.write_text(
        _PLOT_TEMPLATE.format(kind=kind, default=out_path.name), encoding="utf-8"
    )
    return script_path


# ---------------------------------------------------------------------------
# subcommand drivers
# ---------------------------------------------------------------------------

def _load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _run_scan(kind: str, args) -> int:
    try:
        config = _load_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if config.scan.type != kind:
        print(
            f"config error: [scan] type = {config.scan.type!r} does not match "
            f"the {kind}-scan subcommand",
            file=sys.stderr,
        )
        return 2
    engine = args.engine or config.engine.engine
    try:
        if kind == "phase":
            result = phase_scan_experiment(config, engine=engine)
        elif kind == "position":
            result = position_scan(config, engine=engine)
        else:
            result = width_scan(config, engine=engine)
    except (ValueError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else Path(f"{kind}-scan.{args.format}")
    if args.format == "csv":
        write_scan_csv(out, kind, result, config)
    else:
        write_scan_json(out, kind, result, config)
    if args.plot_script:
        script = write_plot_script(out, kind)
        print(f"plot script: {script}", file=sys.stderr)
    print(f"wrote {out} ({len(result.points)} points)", file=sys.stderr)
    return 0


def _run_mode_count(args) -> int:
    try:
        config = _load_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    med = config.medium
    l_coh = coherence_length(med.wavelength_mm, med.length_mm,
                             med.refractive_index)
    payload = {
        "l_coh_mm": l_coh,
        "n_theory": mode_count_theory(med.pump_waist_mm, l_coh),
        "n_measured_formula": mode_count_measured(args.region_size_mm,
                                                  args.min_waist_mm),
    }
    out = Path(args.out) if args.out else Path("mode-count.json")
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    print(f"wrote {out}", file=sys.stderr)
    return 0


def _run_selfcheck(args) -> int:
    results = run_selfcheck(seed=args.seed)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail}", file=sys.stderr)
        all_ok = all_ok and r.passed
    if args.out:
        payload = {
            "package": f"msqsim {__version__}",
            "seed": args.seed,
            "checks": [
                {"name": r.name, "passed": r.passed, "detail": r.detail}
                for r in results
            ],
            "passed": all_ok,
        }
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    return 0 if all_ok else 3


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msqsim",
        description="Multi-spatial-mode squeezed light simulator",
    )
    parser.add_argument("--version", action="version",
                        version=f"msqsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, default_format="csv"):
        p.add_argument("--config", help="experiment configuration file")
        p.add_argument("--out", help="output data file")
        p.add_argument("--format", choices=("csv", "json"),
                       default=default_format)
        p.add_argument("--engine", choices=("dense", "implicit"), default=None,
                       help="override the [engine] section")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomised checks")
        p.add_argument("--plot-script", action="store_true",
                       help="emit a standalone plotting script beside the data")

    for kind in ("phase", "position", "width"):
        p = sub.add_parser(f"{kind}-scan", help=f"run a {kind} scan")
        add_common(p)
        p.set_defaults(func=lambda a, k=kind: _run_scan(k, a))

    p = sub.add_parser("mode-count",
                       help="coherence length and squeezed-mode counts")
    add_common(p, default_format="json")
    p.add_argument("--region-size-mm", type=float, default=3.1,
                   help="squeezing-region size for the measured-count formula")
    p.add_argument("--min-waist-mm", type=float, default=0.18,
                   help="smallest squeezed LO waist for the measured-count formula")
    p.set_defaults(func=_run_mode_count)

    p = sub.add_parser("selfcheck", help="run the numerical invariant battery")
    add_common(p, default_format="json")
    p.set_defaults(func=_run_selfcheck)
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def main() -> None:
    sys.exit(run_cli())
