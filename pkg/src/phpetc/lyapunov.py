"""Numerical evaluation of the delay functional along simulated runs.

The certified functional has three parts: the total stored energy, a
quadratic form of the stacked gradient, and a double integral penalising the
gradient's recent rate of change,

    V(t) = H(xi(t)) + g(t)^T P g(t)
         + dM * int_{t-dM}^{t} int_{s}^{t} gdot(r)^T Q gdot(r) dr ds,

with g = grad H(xi) and dM the worst-case sample age. Everything here works
from sampled histories: derivatives by central differences, integrals by the
trapezoid rule. This module also carries the two oracle checks the matrix
conditions rest on: the integral lower bound used to absorb the double
integral, and the pointwise quadratic-form bound on the functional's rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import ClosedLoopModel
from .errors import DimensionMismatch, InsufficientHistory
from .lmi import build_xi
from .sim import SimTrace
from .trigger import sample_delay

_ALIGN_RTOL = 1e-9


def _check_psd(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > 1e-10 * scale:
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() < -1e-9 * scale:
        raise ValueError(f"{name} must be positive semidefinite")
    return M


@dataclass(frozen=True)
class HistoryBuffer:
    """Grid-aligned window of (time, state, gradient) rows, time-ordered."""

    times: np.ndarray
    states: np.ndarray
    grads: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise InsufficientHistory("need at least two history rows")
        if np.any(np.diff(t) <= 0):
            raise InsufficientHistory("history times must be strictly increasing")

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])

    @classmethod
    def from_trace(cls, trace: SimTrace, t: float, delta_M: float,
                   model: ClosedLoopModel | None = None) -> "HistoryBuffer":
        """Slice the window [t - delta_M, t] out of a simulation trace.

        t must lie on the trace grid; the window start is widened to the
        enclosing grid point.
        """
        model = model or trace.model
        dt = trace.dt
        i = round(t / dt)
        if not (0 <= i < trace.times.size) or abs(trace.times[i] - t) > _ALIGN_RTOL * max(1.0, abs(t)):
            raise InsufficientHistory(f"t = {t} is not on the trace grid")
        j = i - math.ceil(delta_M / dt - _ALIGN_RTOL)
        if j < 0:
            raise InsufficientHistory(
                f"trace holds {trace.times[i]:.6f}s of history before t but the "
                f"window needs {delta_M}"
            )
        states = trace.states[j:i + 1]
        grads = np.array([model.gradTotal(x) for x in states])
        return cls(times=trace.times[j:i + 1].copy(), states=states.copy(),
                   grads=grads)


def eval_V(P, Q, buffer: HistoryBuffer, model: ClosedLoopModel,
           delta_M: float) -> float:
    """The functional at the buffer's final instant.

    The window is clipped to exactly [t - delta_M, t], linearly interpolating
    the gradient at the left edge when it falls between grid points. Raises
    InsufficientHistory when the buffer is too short.
    """
    P = _check_psd(P, "P")
    Q = _check_psd(Q, "Q")
    t = float(buffer.times[-1])
    t0 = t - delta_M
    if buffer.times[0] > t0 + _ALIGN_RTOL * max(1.0, abs(t0)):
        raise InsufficientHistory(
            f"buffer spans {buffer.span:.6f}s but the functional needs {delta_M}"
        )

    j = int(np.searchsorted(buffer.times, t0 - _ALIGN_RTOL * max(1.0, abs(t0))))
    times = buffer.times[j:]
    grads = buffer.grads[j:]
    if times[0] < t0 - 1e-15 and times.size >= 2:
        # The left edge falls inside the first interval: replace the first
        # row by the interpolated value at exactly t0.
        lam = (t0 - times[0]) / (times[1] - times[0])
        g0 = (1 - lam) * grads[0] + lam * grads[1]
        times = np.concatenate([[t0], times[1:]])
        grads = np.vstack([g0, grads[1:]])

    g_t = buffer.grads[-1]
    V1 = model.H_total(buffer.states[-1]) + float(g_t @ P @ g_t)

    dg = np.gradient(grads, times, axis=0)
    w = np.einsum("ki,ij,kj->k", dg, Q, dg)
    inner = cumulative_trapezoid(w, times, initial=0.0)
    # inner[-1] - inner[j] is the integral of w from times[j] up to t.
    V2 = delta_M * float(np.trapezoid(inner[-1] - inner, times))
    return V1 + V2


def lyapunov_series(trace: SimTrace, P, Q, delta_M: float,
                    model: ClosedLoopModel | None = None):
    """V(t) at every grid point with a full window, as (times, values).

    Uses a sliding-window quadrature over the whole trace when delta_M is an
    integer number of steps (the usual case); otherwise falls back to the
    per-point evaluation.
    """
    P = _check_psd(P, "P")
    Q = _check_psd(Q, "Q")
    model = model or trace.model
    dt = trace.dt
    times = trace.times
    ratio = delta_M / dt
    K = round(ratio)
    if K < 1 or K >= times.size:
        raise InsufficientHistory(
            f"window of {delta_M}s does not fit a {times[-1]}s trace at dt = {dt}"
        )

    if abs(ratio - K) > _ALIGN_RTOL * max(1.0, ratio):
        sub = times[times >= delta_M - _ALIGN_RTOL]
        vals = np.array([
            eval_V(P, Q, HistoryBuffer.from_trace(trace, float(t), delta_M, model),
                   model, delta_M)
            for t in sub
        ])
        return sub, vals

    grads = np.array([model.gradTotal(x) for x in trace.states])
    dg = np.gradient(grads, times, axis=0)
    w = np.einsum("ki,ij,kj->k", dg, Q, dg)
    I = cumulative_trapezoid(w, times, initial=0.0)
    # Running sums make the trapezoid integral of I over each window O(1).
    S = np.concatenate([[0.0], np.cumsum(I)])
    idx = np.arange(K, times.size)
    window_int = dt * (S[idx + 1] - S[idx - K] - 0.5 * (I[idx - K] + I[idx]))
    V2 = delta_M * (I[idx] * delta_M - window_int)
    V1 = trace.H_total[idx] + np.einsum("ki,ij,kj->k", grads[idx], P, grads[idx])
    return times[idx], V1 + V2


def wirtinger_gap(Q, times, values) -> float:
    """Slack of the two-term integral lower bound on int w^T Q w.

    For a function w sampled on [a, b] returns LHS - RHS of

        int w^T Q w >= (1/L) (int w)^T Q (int w) + (3/L) Phi^T Q Phi,
        Phi = int w - (2/L) int_a^b int_a^s w(r) dr ds,  L = b - a,

    which is nonnegative for any continuous w and saturates for constant and
    affine ones. All integrals by the trapezoid rule (the inner one runs
    from the left endpoint). Needs at least 16 samples.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    times = np.asarray(times, dtype=float).reshape(-1)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if times.size < 16:
        raise ValueError(f"need at least 16 samples, got {times.size}")
    if values.shape[0] != times.size:
        raise DimensionMismatch("values must be sampled at the given times")
    if np.linalg.eigvalsh(Q).min() <= 0:
        raise ValueError("Q must be positive definite")

    L = float(times[-1] - times[0])
    lhs = float(np.trapezoid(np.einsum("ki,ij,kj->k", values, Q, values), times))
    total = np.trapezoid(values, times, axis=0)
    running = cumulative_trapezoid(values, times, initial=0.0, axis=0)
    phi = total - (2.0 / L) * np.trapezoid(running, times, axis=0)
    rhs = float(total @ Q @ total) / L + 3.0 * float(phi @ Q @ phi) / L
    return lhs - rhs


@dataclass(frozen=True)
class VdotSeries:
    """Numerical rate of the functional along a run, with its matrix bound.

    vdot is differenced separately on each holding interval (the functional
    is not differentiable across control updates); bound is the quadratic
    form of the certified matrix condition at the same instants. A nan in
    vdot marks a segment too short to difference.
    """

    times: np.ndarray
    V: np.ndarray
    vdot: np.ndarray
    bound: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("t,V,vdot,bound\n")
            for row in zip(self.times, self.V, self.vdot, self.bound):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _virtual_schedule(trace: SimTrace):
    """Sample ticks and per-sample virtual arrival ticks.

    Every sampling instant gets an arrival tick by the same draw-clamp-snap
    path the channel uses, whether or not the sample transmitted. When
    tau_M < h this reproduces the physical arrivals exactly for transmitted
    packets, and the applied value is constant on each virtual interval.
    """
    cfg, dt = trace.cfg, trace.dt
    sample_ticks = []
    arrival_ticks = []
    last_arrival = -math.inf
    for t in trace.log.sample_times:
        tick = round(t / dt)
        tau = sample_delay(cfg, t)
        if arrival_ticks and t + tau <= last_arrival:
            tau = (last_arrival - t) + 1e-9
        a = tick + max(0, math.ceil(tau / dt - 1e-9))
        while arrival_ticks and a <= arrival_ticks[-1]:
            a += 1
        sample_ticks.append(tick)
        arrival_ticks.append(a)
        last_arrival = a * dt
    return np.asarray(sample_ticks), np.asarray(arrival_ticks)


def vdot_along_trace(trace: SimTrace, P, Q, Omega, sigma: float,
                     model: ClosedLoopModel | None = None) -> VdotSeries:
    """Check the certified decrease along one simulated run.

    Evaluates V on the grid, differences it inside each holding interval,
    and assembles the quadratic-form bound at each instant from the stacked
    vector (current gradient, gradient at the sample behind the applied
    value, windowed gradient average, held-value error). Intended for runs
    with tau_M < h, where the virtual update schedule of the analysis
    coincides with the physical packet arrivals.
    """
    model = model or trace.model
    Omega = np.atleast_2d(np.asarray(Omega, dtype=float))
    dt = trace.dt
    delta_M = trace.cfg.delta_M

    t_V, V = lyapunov_series(trace, P, Q, delta_M, model)
    i0 = trace.times.size - t_V.size

    sample_ticks, arrival_ticks = _virtual_schedule(trace)
    if arrival_ticks.size == 0 or arrival_ticks[0] > trace.times.size - 1:
        raise InsufficientHistory("no control update inside the trace")

    grads = np.array([model.gradTotal(x) for x in trace.states])
    cumg = cumulative_trapezoid(grads, trace.times, initial=0.0, axis=0)

    if model.constant_matrices:
        A, A_d, A_e = model.A, model.A_d, model.A_e
        Gcal = model.Gcal
    start = max(i0, int(arrival_ticks[0]))
    n_pts = trace.times.size - start
    bound = np.full(n_pts, np.nan)
    for k in range(n_pts):
        i = start + k
        # Latest sample whose virtual packet has arrived by tick i.
        ell = int(np.searchsorted(arrival_ticks, i, side="right")) - 1
        s_tick = int(sample_ticks[ell])
        delta = (i - s_tick) * dt
        g_t = grads[i]
        g_d = grads[s_tick]
        if delta > 0:
            g_avg = (cumg[i] - cumg[s_tick]) / delta
        else:
            g_avg = g_t
        err = trace.y1_held[i] - trace.y1[s_tick]
        psi = np.concatenate([g_t, g_d, g_avg, err])
        if not model.constant_matrices:
            A, A_d, A_e = model.blocks_at(trace.states[i])
            Gcal = model.Gcal(trace.states[i])
        xi_mat = build_xi(A, A_d, A_e, Gcal, model.hessTotal(trace.states[i]),
                          delta_M, sigma, P, Q, Omega)
        bound[k] = float(psi @ xi_mat @ psi)

    V_tail = V[start - i0:]
    t_tail = t_V[start - i0:]
    vdot = np.full(n_pts, np.nan)
    cuts = [int(a) for a in arrival_ticks if start < a <= start + n_pts - 1]
    edges = [start] + cuts + [start + n_pts]
    for a, b in zip(edges[:-1], edges[1:]):
        lo, hi = a - start, b - start
        if hi - lo >= 2:
            vdot[lo:hi] = np.gradient(V_tail[lo:hi], t_tail[lo:hi])
    return VdotSeries(times=t_tail, V=V_tail, vdot=vdot, bound=bound)
