"""Readers and writers for the CSV tables and the run manifest.

Cell formatting is lossless for floats (shortest round-trip repr), so a
read-then-rewrite of any emitted table reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import json

import numpy as np


def format_cell(cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, str):
        if "," in cell or "\n" in cell:
            raise ValueError(f"cell text may not contain separators: {cell!r}")
        return cell
    if isinstance(cell, (bool, np.bool_)):
        raise TypeError("boolean cells are ambiguous; write 0/1 integers")
    if isinstance(cell, (int, np.integer)):
        return str(int(cell))
    return repr(float(cell))


def parse_cell(cell: str):
    if cell == "":
        return None
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def write_table_csv(path, header, rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != len(header):
                raise ValueError(
                    f"row width {len(row)} does not match header width {len(header)}"
                )
            fh.write(",".join(format_cell(c) for c in row) + "\n")


def read_table_csv(path):
    """Parse a toolkit CSV back into (header, rows of int/float/str)."""
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[parse_cell(c) for c in row] for row in reader]
    return header, rows


def write_markdown_table(path, title: str, header, rows) -> None:
    def fmt(cell) -> str:
        if cell is None:
            return "-"
        if isinstance(cell, str):
            return cell if cell else "-"
        if isinstance(cell, (int, np.integer)):
            return str(int(cell))
        return f"{float(cell):.6g}"

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# {title}\n\n")
        fh.write("| " + " | ".join(header) + " |\n")
        fh.write("|" + "|".join(" --- " for _ in header) + "|\n")
        for row in rows:
            fh.write("| " + " | ".join(fmt(c) for c in row) + " |\n")


def run_name(prefix: str, sigma: float, tau_M: float, seed: int) -> str:
    return f"{prefix}_sigma{sigma:g}_tauM{tau_M:g}_seed{seed}"


def write_manifest(path, verb: str, scenario_desc: dict, artifacts: list[dict],
                   timing: dict | None = None) -> None:
    """One machine-readable index of everything a run produced.

    artifacts entries carry a path (relative to the manifest), a kind tag
    and the parameters the artifact was produced under.
    """
    payload = {
        "verb": verb,
        "scenario": scenario_desc,
        "artifacts": sorted(artifacts, key=lambda a: a["path"]),
        "timing": timing or {},
    }
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        return json.load(fh)
