"""Reading run manifests and the CSV artifacts they point to.

The simulation toolkit writes one run_manifest.json per invocation: a verb,
the resolved scenario, and a list of artifact entries (path relative to the
manifest, a kind tag, and the parameters the artifact was produced under).
That JSON plus the CSVs are the whole interface; nothing in this package
imports the toolkit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyTrace, PlotsError

_AXIS_CANDIDATES = ("sigma", "tau_M", "h")


def _parse(cell: str):
    if cell == "":
        return None
    for cast in (int, float):
        try:
            return cast(cell)
        except ValueError:
            pass
    return cell


def read_csv_columns(path) -> dict[str, list]:
    """One artifact CSV as named columns with int/float/None cells."""
    path = Path(path)
    if not path.exists():
        raise PlotsError(f"referenced CSV does not exist: {path}")
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyTrace(f"{path} is empty") from None
        rows = [[_parse(c) for c in row] for row in reader]
    if not rows:
        raise EmptyTrace(f"{path} has a header but no data rows")
    return {name: [row[i] for row in rows] for i, name in enumerate(header)}


@dataclass(frozen=True)
class TraceRef:
    """One trace artifact: its resolved path and the cell parameters."""

    path: Path
    params: dict

    def label(self, axes: tuple[str, ...], with_seed: bool) -> str:
        parts = [f"{axis} = {self.params[axis]:g}"
                 for axis in axes if axis in self.params]
        if with_seed and "seed" in self.params:
            parts.append(f"seed {self.params['seed']}")
        return ", ".join(parts) if parts else self.path.stem


@dataclass(frozen=True)
class RunManifest:
    path: Path
    verb: str
    scenario: dict
    artifacts: tuple[dict, ...]

    @property
    def base_dir(self) -> Path:
        return self.path.parent

    def of_kind(self, kind: str) -> list[dict]:
        return [a for a in self.artifacts if a.get("kind") == kind]

    def sweep_axes(self) -> tuple[str, ...]:
        """The cell parameters that actually vary across the traces.

        Falls back to the verb's natural axis when nothing varies (a single
        trace still gets a meaningful legend entry).
        """
        traces = self.of_kind("trace")
        axes = tuple(
            key for key in _AXIS_CANDIDATES
            if len({t.get("params", {}).get(key) for t in traces}) > 1
        )
        if axes:
            return axes
        return ("tau_M",) if self.verb == "table3" else ("sigma",)

    def traces(self) -> list[TraceRef]:
        """Trace handles sorted by the sweep axes, then by seed."""
        axes = self.sweep_axes()
        refs = [TraceRef(self.base_dir / a["path"], a.get("params", {}))
                for a in self.of_kind("trace")]
        refs.sort(key=lambda r: tuple(float(r.params.get(a, 0.0)) for a in axes)
                  + (int(r.params.get("seed", 0)),))
        return refs


def load_manifest(path) -> RunManifest:
    path = Path(path)
    if not path.exists():
        raise PlotsError(f"manifest does not exist: {path}")
    try:
        with open(path, encoding="ascii") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PlotsError(f"manifest does not parse: {exc}") from None
    for key in ("verb", "artifacts"):
        if key not in raw:
            raise PlotsError(f"manifest lacks the {key!r} field: {path}")
    if not isinstance(raw["artifacts"], list):
        raise PlotsError(f"manifest field 'artifacts' must be a list: {path}")
    return RunManifest(path=path, verb=str(raw["verb"]),
                       scenario=dict(raw.get("scenario", {})),
                       artifacts=tuple(raw["artifacts"]))
