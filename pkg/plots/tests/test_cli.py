import pytest

from petcplots.cli import main

from conftest import write_manifest


def test_explicit_selection_and_format(trace_manifest, tmp_path, capsys):
    out = tmp_path / "figs"
    rc = main(["--manifest", str(trace_manifest),
               "--select", "pos,vel", "--out", str(out), "--format", "png"])
    assert rc == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "table2_pos.png", "table2_vel.png"]
    assert capsys.readouterr().out.count("wrote ") == 2


def test_auto_selection_on_trace_manifest(trace_manifest, tmp_path):
    out = tmp_path / "figs"
    assert main(["--manifest", str(trace_manifest), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "table2_input.png", "table2_input.svg",
        "table2_pos.png", "table2_pos.svg",
        "table2_vel.png", "table2_vel.svg",
    ]


def test_auto_selection_on_table_manifest(tmp_path):
    (tmp_path / "table1.csv").write_text(
        "delta_M,sigma_max,alpha\n0.3,0.195,\n", encoding="ascii")
    m = write_manifest(tmp_path / "m.json", "table1",
                       [{"path": "table1.csv", "kind": "table", "params": {}}])
    out = tmp_path / "figs"
    assert main(["--manifest", str(m), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "table1_frontier.png", "table1_frontier.svg"]


def test_empty_manifest_fails_with_exit_3(tmp_path, capsys):
    m = write_manifest(tmp_path / "m.json", "table2", [])
    rc = main(["--manifest", str(m), "--select", "pos",
               "--out", str(tmp_path / "figs")])
    assert rc == 3
    assert "no trace artifacts" in capsys.readouterr().err


def test_unknown_selection_is_a_usage_error(trace_manifest, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["--manifest", str(trace_manifest), "--select", "pos,both",
              "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_missing_manifest_fails_with_exit_3(tmp_path, capsys):
    rc = main(["--manifest", str(tmp_path / "nope.json"),
               "--select", "pos", "--out", str(tmp_path)])
    assert rc == 3
    assert "does not exist" in capsys.readouterr().err
