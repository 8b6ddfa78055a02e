import matplotlib.pyplot as plt
import pytest

from petcplots import EmptyTrace, MissingColumn, PlotJob, load_manifest, render
from petcplots.figures import _frontier_figure, _trace_figure

from conftest import ramp_trace, write_manifest


def job_for(manifest, selection=("pos",), **kw):
    return PlotJob(manifest=manifest, selection=selection,
                   outdir=manifest.parent / "figs", **kw)


def test_legend_sorted_by_axis_one_curve_per_value(trace_manifest):
    man = load_manifest(trace_manifest)
    fig = _trace_figure(man, "pos", job_for(trace_manifest))
    ax = fig.axes[0]
    assert len(ax.lines) == 3
    labels = [t.get_text() for t in ax.get_legend().get_texts()]
    assert labels == ["sigma = 0.1", "sigma = 0.4", "sigma = 0.8"]
    assert "h = 0.3" in ax.get_title()
    plt.close(fig)


def test_input_figure_reads_u1_column(trace_manifest):
    man = load_manifest(trace_manifest)
    fig = _trace_figure(man, "input", job_for(trace_manifest))
    line = fig.axes[0].lines[0]  # sigma = 0.1 after sorting
    t = line.get_xdata()
    assert line.get_ydata() == pytest.approx([-1.5 * 0.1 * v for v in t])
    plt.close(fig)


def test_missing_column_is_reported(tmp_path):
    p = tmp_path / "narrow.csv"
    p.write_text("t,q\n0.0,1.0\n0.1,0.9\n", encoding="ascii")
    m = write_manifest(tmp_path / "m.json", "table2",
                       [{"path": "narrow.csv", "kind": "trace",
                         "params": {"sigma": 0.1, "seed": 1}}])
    man = load_manifest(m)
    with pytest.raises(MissingColumn, match="qdot"):
        _trace_figure(man, "vel", job_for(m))


def test_manifest_without_traces_is_empty(tmp_path):
    m = write_manifest(tmp_path / "m.json", "table2", [])
    with pytest.raises(EmptyTrace, match="no trace artifacts"):
        _trace_figure(load_manifest(m), "pos", job_for(m))


def test_trace_without_rows_is_empty(tmp_path):
    (tmp_path / "hollow.csv").write_text("t,q,qdot,u1\n", encoding="ascii")
    m = write_manifest(tmp_path / "m.json", "table2",
                       [{"path": "hollow.csv", "kind": "trace",
                         "params": {"sigma": 0.1, "seed": 1}}])
    with pytest.raises(EmptyTrace, match="no data rows"):
        _trace_figure(load_manifest(m), "pos", job_for(m))


def frontier_manifest(tmp_path, body):
    (tmp_path / "table1.csv").write_text(body, encoding="ascii")
    return write_manifest(tmp_path / "m.json", "table1",
                          [{"path": "table1.csv", "kind": "table", "params": {}}])


def test_frontier_sorts_and_skips_infeasible_cells(tmp_path):
    m = frontier_manifest(
        tmp_path, "delta_M,sigma_max,alpha\n0.3,0.195,\n0.7,,\n0.1,0.488,\n")
    fig = _frontier_figure(load_manifest(m), job_for(m, ("frontier",)))
    line = fig.axes[0].lines[0]
    assert list(line.get_xdata()) == [0.1, 0.3]
    assert list(line.get_ydata()) == [0.488, 0.195]
    plt.close(fig)


def test_frontier_needs_the_right_columns(tmp_path):
    m = frontier_manifest(tmp_path, "sigma,seed,status\n0.1,1,ok\n")
    with pytest.raises(MissingColumn, match="delta_M"):
        _frontier_figure(load_manifest(m), job_for(m, ("frontier",)))


def test_frontier_without_tables_is_empty(tmp_path):
    m = write_manifest(tmp_path / "m.json", "table1", [])
    with pytest.raises(EmptyTrace, match="no tables"):
        _frontier_figure(load_manifest(m), job_for(m, ("frontier",)))


def test_frontier_all_infeasible_is_empty(tmp_path):
    m = frontier_manifest(tmp_path, "delta_M,sigma_max,alpha\n0.7,,\n0.8,,\n")
    with pytest.raises(EmptyTrace, match="no feasible cells"):
        _frontier_figure(load_manifest(m), job_for(m, ("frontier",)))


def test_render_rerun_is_byte_identical(trace_manifest, tmp_path):
    outs = []
    for sub in ("one", "two"):
        job = PlotJob(manifest=trace_manifest, selection=("pos", "input"),
                      outdir=tmp_path / sub)
        written = render(job)
        assert sorted(p.name for p in written) == [
            "table2_input.png", "table2_input.svg",
            "table2_pos.png", "table2_pos.svg",
        ]
        outs.append(sorted(written))
    for a, b in zip(*outs):
        assert a.read_bytes() == b.read_bytes(), a.name


def test_plotjob_rejects_unknown_names(trace_manifest, tmp_path):
    with pytest.raises(ValueError, match="unknown selections"):
        PlotJob(trace_manifest, ("pos", "both"), tmp_path)
    with pytest.raises(ValueError, match="unknown formats"):
        PlotJob(trace_manifest, ("pos",), tmp_path, formats=("bmp",))
    with pytest.raises(ValueError, match="nothing selected"):
        PlotJob(trace_manifest, (), tmp_path)


def test_ylabel_override(trace_manifest, tmp_path):
    job = PlotJob(trace_manifest, ("pos",), tmp_path,
                  labels={"pos": "angle [rad]"})
    man = load_manifest(trace_manifest)
    fig = _trace_figure(man, "pos", job)
    assert fig.axes[0].get_ylabel() == "angle [rad]"
    plt.close(fig)
