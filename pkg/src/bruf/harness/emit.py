"""Deterministic CSV and manifest output.

Floats are written with repr (shortest round-trip decimal), rows in a
fixed order, no timestamps; running the same config and seed twice
produces byte-identical files.
"""

import csv
import json
import os
import subprocess

SCHEMA_VERSION = 1


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, header, rows) -> str:
    """Write rows (sequences or dicts matching ``header``) as UTF-8 CSV."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                writer.writerow([_format(row[col]) for col in header])
            else:
                writer.writerow([_format(v) for v in row])
    return path


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def write_manifest(output_dir: str, config, files) -> str:
    """JSON manifest tying outputs to the config hash and seed."""
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "scenario": config.scenario,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "git_describe": git_describe(),
        "files": sorted(os.path.relpath(f, output_dir) for f in files),
    }
    path = os.path.join(output_dir, "manifest.json")
    os.makedirs(output_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def emit_plot_data(artifacts: dict, output_dir: str, config) -> list:
    """Write every artifact table as CSV plus the manifest.

    ``artifacts`` maps file stem -> (header, rows). Returns the list of
    written paths (manifest last).
    """
    written = []
    for stem in sorted(artifacts):
        header, rows = artifacts[stem]
        path = os.path.join(output_dir, f"{stem}.csv")
        written.append(write_csv(path, header, rows))
    manifest = write_manifest(output_dir, config, written)
    return written + [manifest]
