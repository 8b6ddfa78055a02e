import json

import pytest

TRACE_COLS = ("t", "q", "qdot", "x2", "y1", "y1_held", "u1", "u2",
              "H1", "Htotal", "event", "delay")


def write_trace_csv(path, t, q, qdot, x2, u1):
    """A structurally faithful trace CSV with synthetic values."""
    lines = [",".join(TRACE_COLS)]
    for i in range(len(t)):
        cells = [repr(float(v)) for v in
                 (t[i], q[i], qdot[i], x2[i], qdot[i], qdot[i], u1[i], 0.0,
                  0.5 * q[i] ** 2, q[i] ** 2)]
        cells += ["0", ""]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def write_manifest(path, verb, artifacts, scenario=None):
    payload = {"verb": verb, "scenario": scenario or {},
               "artifacts": artifacts, "timing": {}}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="ascii")
    return path


def ramp_trace(path, slope, n=21):
    t = [0.05 * k for k in range(n)]
    write_trace_csv(path,
                    t=t,
                    q=[slope * v for v in t],
                    qdot=[slope] * n,
                    x2=[0.5 * slope * v for v in t],
                    u1=[-3.0 * 0.5 * slope * v for v in t])


@pytest.fixture
def trace_manifest(tmp_path):
    """Three traces over a sigma axis; file names deliberately out of
    numeric order so sorting by path would give the wrong legend."""
    spec = (("a.csv", 0.4), ("b.csv", 0.1), ("c.csv", 0.8))
    artifacts = []
    for fname, sigma in spec:
        ramp_trace(tmp_path / fname, slope=sigma)
        artifacts.append({
            "path": fname, "kind": "trace",
            "params": {"sigma": sigma, "tau_m": 0.0, "tau_M": 0.0,
                       "h": 0.3, "seed": 1, "T": 1.0, "dt": 0.05},
        })
    return write_manifest(tmp_path / "run_manifest.json", "table2", artifacts)
