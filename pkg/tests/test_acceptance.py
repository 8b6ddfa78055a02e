"""Acceptance gate: one test per required behavior, at its stated tolerance.

Two tests fail by design on this implementation and are left red rather than
weakened; the README section "Known limits" carries the analysis:

  - test_threshold_frontier_bands: the certified frontier computed here tops
    out near sigma = 0.49 at delta_M = 0.1, far below the expected band
    [1.5, 2.9], and delta_M = 0.7 has no feasible point at all.
  - test_delay_metric_directions: the time-weighted error integral is not
    monotone in tau_M at the default seed (the dip is seed-dependent noise,
    and picking a friendlier seed would defeat the check).
"""

import math
import time

import numpy as np
import pytest

from phpetc import (
    NoFeasiblePoint,
    TriggerDelayConfig,
    build_theta,
    build_xi,
    certify_polytopic,
    derive_seed,
    hessian_vertices,
    lyapunov_series,
    pendulum_hessian_bounds,
    sigma_max,
    simulate,
    wirtinger_gap,
)
from phpetc.cli import main
from phpetc.artifacts import read_table_csv

DELTA_AXIS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)


def spd(rng, n, scale=1.0):
    B = rng.standard_normal((n, n))
    return scale * (B @ B.T + n * np.eye(n))


def test_wirtinger_bound_random_inputs():
    """1000 random piecewise-linear signals never beat the integral bound
    (relative slack >= -1e-8), and constant signals saturate it to 1e-9."""
    rng = np.random.default_rng(7)
    started = time.monotonic()
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        a = float(rng.uniform(-2.0, 2.0))
        L = float(rng.uniform(0.3, 3.0))
        N = int(rng.integers(48, 257))
        times = np.linspace(a, a + L, N)
        knots = np.sort(rng.choice(np.arange(1, N - 1), size=int(rng.integers(1, 5)),
                                   replace=False))
        knots = np.concatenate([[0], knots, [N - 1]])
        vals = rng.normal(0.0, 2.0, size=(knots.size, n))
        w = np.column_stack([np.interp(np.arange(N), knots, vals[:, j])
                             for j in range(n)])
        Q = spd(rng, n)
        gap = wirtinger_gap(Q, times, w)
        lhs = float(np.trapezoid(np.einsum("ki,ij,kj->k", w, Q, w), times))
        assert gap >= -1e-8 * max(lhs, 1e-12)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        times = np.linspace(0.0, float(rng.uniform(0.3, 3.0)), 64)
        w = np.tile(rng.normal(0.0, 2.0, size=n), (64, 1))
        Q = spd(rng, n)
        gap = wirtinger_gap(Q, times, w)
        lhs = float(np.trapezoid(np.einsum("ki,ij,kj->k", w, Q, w), times))
        assert abs(gap) <= 1e-9 * max(lhs, 1e-12)
    assert time.monotonic() - started < 10.0


def test_schur_sign_consistency():
    """The enlarged form with the exact inverse corner agrees in sign with
    the direct form on 200 random instances."""
    rng = np.random.default_rng(8)
    started = time.monotonic()
    signs = set()
    for k in range(200):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        A = rng.standard_normal((n, n)) - (0.0, 3.0, 8.0)[k % 3] * np.eye(n)
        A_d = 0.6 * rng.standard_normal((n, n))
        A_e = 0.6 * rng.standard_normal((n, m))
        G = rng.standard_normal((m, n))
        Hs = spd(rng, n, 0.5)
        P, Q, Om = spd(rng, n, 0.3), spd(rng, n, 0.3), spd(rng, m, 0.5)
        d = float(rng.uniform(0.05, 0.8))
        s = float(rng.uniform(0.0, 1.5))
        xi = build_xi(A, A_d, A_e, G, Hs, d, s, P, Q, Om)
        theta = build_theta(A, A_d, A_e, G, Hs, d, s, P, Q, Om,
                            Qinv_bound=np.linalg.inv(Q))
        sx = float(np.sign(np.linalg.eigvalsh(xi)[-1]))
        st = float(np.sign(np.linalg.eigvalsh(theta)[-1]))
        assert sx == st
        signs.add(sx)
    assert signs == {-1.0, 1.0}
    assert time.monotonic() - started < 5.0


def test_threshold_frontier_bands(pendulum):
    """The certified frontier must be nonincreasing in the delay bound and
    land inside the expected bands at both ends of the axis."""
    bounds = pendulum_hessian_bounds()
    started = time.monotonic()
    frontier = {}
    for delta in DELTA_AXIS:
        try:
            frontier[delta] = sigma_max(pendulum, delta, vertex_bounds=bounds)
        except NoFeasiblePoint:
            frontier[delta] = None
    elapsed = time.monotonic() - started
    assert elapsed < 300.0

    realized = [v for v in frontier.values() if v is not None]
    assert all(b <= a + 1e-9 for a, b in zip(realized, realized[1:])), frontier

    assert frontier[0.1] is not None
    assert 1.5 <= frontier[0.1] <= 2.9, (
        f"frontier at delta_M = 0.1 is {frontier[0.1]:.4f}; this "
        f"implementation's certified frontier tops out near 0.49 there "
        f"(full row: {frontier}; see README, Known limits)"
    )
    assert frontier[0.7] is not None and 0.0 <= frontier[0.7] <= 0.5, (
        f"no feasible point at delta_M = 0.7 (full row: {frontier}; "
        f"see README, Known limits)"
    )


def test_vertex_sufficiency(pendulum):
    """Feasible certificates hold strictly inside the Hessian polytope: 50
    random convex combinations of the vertices per cell, zero violations."""
    rng = np.random.default_rng(9)
    bounds = pendulum_hessian_bounds()
    vertices = hessian_vertices(np.diag([1.0, 1.0, 3.0]), bounds)
    for delta, sig in ((0.1, 0.45), (0.3, 0.19), (0.5, 0.02)):
        cert = certify_polytopic(pendulum, delta, sig, vertex_bounds=bounds)
        assert cert.feasible, (delta, sig)
        for _ in range(50):
            lam = rng.dirichlet(np.ones(len(vertices)))
            H = sum(l * v for l, v in zip(lam, vertices))
            xi = build_xi(pendulum.A, pendulum.A_d, pendulum.A_e,
                          pendulum.Gcal, H, delta, sig,
                          cert.P, cert.Q, cert.Omega)
            assert np.linalg.eigvalsh(xi)[-1] < 0.0


def test_certified_decrease_and_convergence(pendulum, pendulum_cert):
    """Along the benchmark run the functional does not increase between
    control updates (tolerance 1e-6 of its peak, at 99% of grid points) and
    the state reaches the origin."""
    cfg = TriggerDelayConfig(h=0.3, sigma=0.88, tau_m=0.0, tau_M=0.0, seed=1)
    trace = simulate(pendulum, cfg, (2.0, 0.0, 0.0), T=40.0, dt=1e-3)
    assert np.linalg.norm(trace.states[-1]) < 1e-2

    t_V, V = lyapunov_series(trace, pendulum_cert.P, pendulum_cert.Q, 0.3)
    arrivals = np.asarray(trace.log.arrival_times, dtype=float)
    starts = np.unique(np.concatenate([[t_V[0]], arrivals[arrivals >= t_V[0]]]))
    start_idx = np.searchsorted(t_V, starts - 1e-9)
    holding = np.searchsorted(starts, t_V + 1e-9, side="right") - 1
    baseline = V[start_idx[holding]]
    tol = 1e-6 * V.max()
    ok = V <= baseline + tol
    assert ok.mean() >= 0.99, f"decrease holds at {ok.mean():.2%} of grid points"


def test_sampled_data_limit_counts(pendulum):
    """A zero threshold transmits at every sampling instant."""
    cfg = TriggerDelayConfig(h=0.3, sigma=0.0, tau_m=0.0, tau_M=0.0, seed=1)
    trace = simulate(pendulum, cfg, (2.0, 0.0, 0.0), T=40.0, dt=1e-3)
    assert trace.log.transmission_count == math.floor(40.0 / 0.3) + 1


def test_threshold_metric_directions(pendulum):
    """A larger threshold spaces transmissions out and degrades the squared
    error integral, delay-free."""
    metrics = {}
    for sig in (0.1, 0.8):
        cfg = TriggerDelayConfig(h=0.3, sigma=sig, tau_m=0.0, tau_M=0.0,
                                 seed=derive_seed(1, sig, 0.0, 1))
        trace = simulate(pendulum, cfg, (2.0, 0.0, 0.0), T=40.0, dt=1e-3)
        metrics[sig] = trace.indices
    assert metrics[0.8]["avg_inter_event"] > metrics[0.1]["avg_inter_event"]
    assert metrics[0.8]["ISE"] >= metrics[0.1]["ISE"]


def test_delay_metric_directions(pendulum):
    """Across the delay axis, transmissions get denser (more corrections are
    triggered) and the time-weighted error integral must not improve."""
    taus = (0.1, 0.2, 0.3, 0.4)
    rows = {}
    for tau in taus:
        cfg = TriggerDelayConfig(h=0.2, sigma=0.2, tau_m=0.01, tau_M=tau,
                                 seed=derive_seed(1, 0.2, tau, 1))
        trace = simulate(pendulum, cfg, (2.0, 0.0, 0.0), T=40.0, dt=1e-3)
        rows[tau] = trace.indices
    inter = [rows[t]["avg_inter_event"] for t in taus]
    itae = [rows[t]["ITAE"] for t in taus]
    assert all(b <= a + 1e-12 for a, b in zip(inter, inter[1:])), inter
    assert all(b >= a - 1e-12 for a, b in zip(itae, itae[1:])), (
        f"ITAE row {itae} is not monotone at the default seed; "
        f"see README, Known limits"
    )


def test_integrator_order_band(pendulum):
    """Halving the step shrinks the end-state error by a fourth-order
    factor against a much finer reference."""
    cfg = TriggerDelayConfig(h=0.25, sigma=0.0, tau_m=0.0, tau_M=0.0, seed=1)
    ref = simulate(pendulum, cfg, (2.0, 0.0, 0.0), T=5.0, dt=1e-5).states[-1]
    e1 = np.linalg.norm(
        simulate(pendulum, cfg, (2.0, 0.0, 0.0), T=5.0, dt=5e-3).states[-1] - ref)
    e2 = np.linalg.norm(
        simulate(pendulum, cfg, (2.0, 0.0, 0.0), T=5.0, dt=2.5e-3).states[-1] - ref)
    assert 8.0 <= e1 / e2 <= 32.0


def test_pipeline_determinism(tmp_path):
    """Two identical pipeline invocations produce byte-identical CSVs."""
    cfg_path = tmp_path / "scenario.toml"
    cfg_path.write_text("""
[sweep]
sigma = [0.1, 0.8]
tau_M = [0.1, 0.2]
delta_M = [0.3]

[simulation]
T = 10.0
""")
    for out in ("a", "b"):
        base = tmp_path / out
        assert main(["table2", "--config", str(cfg_path),
                     "--out", str(base / "t2")]) == 0
        assert main(["table3", "--config", str(cfg_path),
                     "--out", str(base / "t3")]) == 0
        assert main(["table1", "--config", str(cfg_path),
                     "--out", str(base / "t1")]) == 0

    csvs = sorted(p.relative_to(tmp_path / "a")
                  for p in (tmp_path / "a").rglob("*.csv"))
    assert len(csvs) >= 7
    for rel in csvs:
        assert ((tmp_path / "a" / rel).read_bytes()
                == (tmp_path / "b" / rel).read_bytes()), rel

    header, rows = read_table_csv(tmp_path / "a" / "t1" / "table1.csv")
    assert header == ["delta_M", "sigma_max", "alpha"]
    assert rows[0][1] == pytest.approx(0.195, abs=0.02)
