"""JSON/CSV report emission with a shipped schema."""

from __future__ import annotations

import csv
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from . import __version__

TOOL = "qspacetime"


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("report_schema.json").read_text())


def plain(obj):
    """Recursively convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def config_hash(config: dict) -> str:
    canonical = json.dumps(plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_report(
    command: str,
    seed: int,
    config: dict,
    results: dict | None = None,
    checks: dict[str, bool] | None = None,
) -> dict:
    checks = dict(checks or {})
    report = {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "seed": int(seed),
        "config_hash": config_hash({"command": command, "seed": int(seed), "config": config}),
        "status": "ok" if all(checks.values()) else "verification_failed",
        "config": plain(config),
        "results": plain(results or {}),
        "checks": {k: bool(v) for k, v in checks.items()},
    }
    validate_report(report)
    return report


def validate_report(report: dict) -> None:
    jsonschema.validate(report, load_schema())


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_report(report: dict, out_dir, tables: dict | None = None) -> list[Path]:
    """Write ``<command>_report.json`` plus one CSV per table into ``out_dir``.

    ``tables`` maps a file stem to ``(header, rows)``. Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = report["command"].replace("-", "_")
    paths = []
    for name, (header, rows) in (tables or {}).items():
        p = out / f"{stem}_{name}.csv"
        write_csv(p, header, rows)
        paths.append(p)
    report = dict(report, files=[p.name for p in paths])
    validate_report(report)
    json_path = out / f"{stem}_report.json"
    json_path.write_text(dumps(report))
    return [json_path, *paths]
