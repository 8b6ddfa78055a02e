"""Figure rendering for trace trajectories and the certified frontier.

Figures are batch artifacts, a pure function of the manifest and the CSVs
it references. The Agg backend is forced, the SVG hash salt is pinned and
date metadata is stripped, so re-rendering the same inputs reproduces every
output byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import EmptyTrace, MissingColumn
from .manifest import RunManifest, load_manifest, read_csv_columns

plt.rcParams["svg.hashsalt"] = "petcplots"

SELECTIONS = ("pos", "vel", "input", "frontier")
FORMATS = ("png", "svg", "pdf")

_TRACE_COLUMN = {"pos": "q", "vel": "qdot", "input": "u1"}
_Y_LABEL = {
    "pos": "position",
    "vel": "velocity",
    "input": "input u1",
    "frontier": "largest certified threshold",
}
# savefig metadata that varies run to run, suppressed per format
_VOLATILE_META = {"svg": {"Date": None}, "pdf": {"CreationDate": None}}


@dataclass(frozen=True)
class PlotJob:
    """Everything one invocation renders: which manifest, which figures,
    where, and in which formats."""

    manifest: Path
    selection: tuple[str, ...]
    outdir: Path
    formats: tuple[str, ...] = ("png", "svg")
    dpi: int = 150
    labels: dict | None = None

    def __post_init__(self):
        unknown = [s for s in self.selection if s not in SELECTIONS]
        if unknown:
            raise ValueError(f"unknown selections {unknown}; "
                             f"valid ones are {list(SELECTIONS)}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ValueError(f"unknown formats {bad}; valid ones are {list(FORMATS)}")
        if not self.selection:
            raise ValueError("nothing selected")

    def ylabel(self, name: str) -> str:
        if self.labels and name in self.labels:
            return str(self.labels[name])
        return _Y_LABEL[name]


def _column(cols: dict, name: str, path) -> list:
    """A column by exact name, or the first component of an indexed group."""
    if name in cols:
        return cols[name]
    indexed = sorted(k for k in cols if k.startswith(f"{name}_"))
    if indexed:
        return cols[indexed[0]]
    raise MissingColumn(f"{path} has no column {name!r}")


def _fixed_settings(refs, axes) -> str:
    parts = []
    for key in ("h", "sigma", "tau_M"):
        if key in axes:
            continue
        values = {r.params.get(key) for r in refs}
        value = values.pop() if len(values) == 1 else None
        if value is not None:
            parts.append(f"{key} = {value:g}")
    return ", ".join(parts)


def _trace_figure(man: RunManifest, name: str, job: PlotJob):
    refs = man.traces()
    if not refs:
        raise EmptyTrace(f"manifest {man.path} lists no trace artifacts")
    axes_keys = man.sweep_axes()
    many_seeds = len({r.params.get("seed") for r in refs}) > 1
    column = _TRACE_COLUMN[name]

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for ref in refs:
        cols = read_csv_columns(ref.path)
        ax.plot(_column(cols, "t", ref.path), _column(cols, column, ref.path),
                linewidth=1.1, label=ref.label(axes_keys, many_seeds))
    ax.set_xlabel("time [s]")
    ax.set_ylabel(job.ylabel(name))
    fixed = _fixed_settings(refs, axes_keys)
    ax.set_title(_Y_LABEL[name] if not fixed else f"{_Y_LABEL[name]} ({fixed})")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def _frontier_figure(man: RunManifest, job: PlotJob):
    tables = man.of_kind("table")
    if not tables:
        raise EmptyTrace(f"manifest {man.path} lists no tables")
    cols = None
    for art in tables:
        candidate = read_csv_columns(man.base_dir / art["path"])
        if "delta_M" in candidate and "sigma_max" in candidate:
            cols = candidate
            break
    if cols is None:
        raise MissingColumn(
            f"no table in {man.path} has columns 'delta_M' and 'sigma_max'")
    points = sorted((d, s) for d, s in zip(cols["delta_M"], cols["sigma_max"])
                    if s is not None)
    if not points:
        raise EmptyTrace("the frontier table has no feasible cells")

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot([p[0] for p in points], [p[1] for p in points],
            marker="o", linewidth=1.1)
    ax.set_xlabel("delta_M (sampling period plus maximal delay)")
    ax.set_ylabel(job.ylabel("frontier"))
    ax.set_title("certified threshold frontier")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def render(job: PlotJob) -> list[Path]:
    """Render every selected figure; returns the files written."""
    man = load_manifest(job.manifest)
    outdir = Path(job.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in job.selection:
        build = _frontier_figure if name == "frontier" else _trace_figure
        args = (man, job) if name == "frontier" else (man, name, job)
        fig = build(*args)
        try:
            for fmt in job.formats:
                target = outdir / f"{man.verb}_{name}.{fmt}"
                fig.savefig(target, dpi=job.dpi,
                            metadata=_VOLATILE_META.get(fmt))
                written.append(target)
        finally:
            plt.close(fig)
    return written
