"""Fixed-step simulation of the interconnection under the sampled channel.

The integrator advances the physically ordered loop: the first subsystem is
driven continuously by u1 = -y2, the second receives the held output
u2 = yhat1 delivered by the event-triggered delayed channel. Classical
fourth-order Runge-Kutta with a fixed step; the held value is constant within
a step because control updates are snapped to the integration grid.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import ClosedLoopModel
from .errors import DimensionMismatch, NonFiniteState, StepMismatch
from .trigger import (
    TransmissionLog,
    TriggerDelayConfig,
    check_trigger,
    clamp_delay,
    sample_delay,
)

STATE_NORM_LIMIT = 1e8
_GRID_RTOL = 1e-9


@dataclass
class SimTrace:
    """Complete record of one simulation run.

    Arrays are sampled on the uniform grid `times` (N+1 points including both
    endpoints). `event` is 1 at ticks where a packet was released and `delay`
    holds that packet's effective release-to-arrival time (nan elsewhere).
    `indices` carries the run-level metrics: ISE, IAE, ITAE of the plant
    energy and the average inter-event time.
    """

    times: np.ndarray
    states: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    y1_held: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    H1: np.ndarray
    H_total: np.ndarray
    event: np.ndarray
    delay: np.ndarray
    log: TransmissionLog
    model: ClosedLoopModel
    cfg: TriggerDelayConfig
    dt: float
    indices: dict[str, float] = field(default_factory=dict)


def _ticks(total: float, dt: float, what: str) -> int:
    ratio = total / dt
    k = round(ratio)
    if k < 1 or abs(ratio - k) > _GRID_RTOL * max(1.0, abs(ratio)):
        raise StepMismatch(f"{what} = {total} is not an integer multiple of dt = {dt}")
    return k


def simulate(model: ClosedLoopModel, cfg: TriggerDelayConfig, xi0, T: float,
             dt: float, initial_held=None) -> SimTrace:
    """Integrate the closed loop over [0, T] and return the full trace.

    The per-tick order is: deliver any packets whose (grid-snapped) arrival
    is due, then, at sampling instants, evaluate the trigger on the error
    between the currently applied value and the fresh output. The first
    sample always transmits so the receiver starts from real data. Packet
    arrivals are rounded up to the next grid tick and kept strictly ordered,
    so the effective delay stays within one tick of the drawn one.

    Raises StepMismatch when h or T is not an integer multiple of dt and
    NonFiniteState when the state norm passes 1e8 or stops being finite.
    """
    steps_per_h = _ticks(cfg.h, dt, "sampling period h")
    n_steps = _ticks(T, dt, "horizon T")

    xi = np.asarray(xi0, dtype=float).reshape(-1)
    if xi.shape != (model.n,):
        raise DimensionMismatch(f"initial state must have length {model.n}")

    m = model.m
    if initial_held is None:
        yhat = np.zeros(m)
    else:
        yhat = np.asarray(initial_held, dtype=float).reshape(-1)
        if yhat.shape != (m,):
            raise DimensionMismatch(f"initial held value must have length {m}")

    log = TransmissionLog(initial_value=yhat.copy())
    pending: deque[tuple[int, np.ndarray]] = deque()

    N = n_steps
    times = np.arange(N + 1) * dt
    states = np.empty((N + 1, model.n))
    y1_arr = np.empty((N + 1, m))
    y2_arr = np.empty((N + 1, m))
    held_arr = np.empty((N + 1, m))
    u1_arr = np.empty((N + 1, m))
    u2_arr = np.empty((N + 1, m))
    H1_arr = np.empty(N + 1)
    Ht_arr = np.empty(N + 1)
    event = np.zeros(N + 1, dtype=np.int8)
    delay_arr = np.full(N + 1, np.nan)

    sys1, sys2 = model.sys1, model.sys2
    n1 = sys1.n

    if model.constant_matrices:
        A, A_e = model.A, model.A_e

        def rhs(x, held):
            return A @ model.gradTotal(x) + A_e @ held
    else:
        def rhs(x, held):
            Ax, _, Aex = model.blocks_at(x)
            return Ax @ model.gradTotal(x) + Aex @ held

    half = 0.5 * dt
    sixth = dt / 6.0

    for i in range(N + 1):
        t = times[i]

        while pending and pending[0][0] <= i:
            _, yhat = pending.popleft()

        g1 = sys1.gradH(xi[:n1])
        g2 = sys2.gradH(xi[n1:])
        y1 = sys1.G_at(xi[:n1]).T @ g1
        y2 = sys2.G_at(xi[n1:]).T @ g2

        if i % steps_per_h == 0:
            e = yhat - y1
            fire = True if i == 0 else check_trigger(cfg, e, y1)
            log.record_sample(t, y1, e, fire)
            if fire:
                tau = clamp_delay(log, t, sample_delay(cfg, t))
                tick = i + max(0, math.ceil(tau / dt - 1e-9))
                while log.arrival_times and tick * dt <= log.arrival_times[-1]:
                    tick += 1
                log.record_transmission(t, tick * dt, y1)
                pending.append((tick, y1.copy()))
                event[i] = 1
                delay_arr[i] = tick * dt - t
                while pending and pending[0][0] <= i:
                    _, yhat = pending.popleft()

        states[i] = xi
        y1_arr[i] = y1
        y2_arr[i] = y2
        held_arr[i] = yhat
        u1_arr[i] = -y2
        u2_arr[i] = yhat
        H1_arr[i] = sys1.H(xi[:n1])
        Ht_arr[i] = model.H_total(xi)

        if i == N:
            break

        k1 = rhs(xi, yhat)
        k2 = rhs(xi + half * k1, yhat)
        k3 = rhs(xi + half * k2, yhat)
        k4 = rhs(xi + dt * k3, yhat)
        xi = xi + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if not np.all(np.isfinite(xi)) or np.linalg.norm(xi) > STATE_NORM_LIMIT:
            raise NonFiniteState(
                f"state norm left the trusted range at t = {t + dt:.6f} "
                f"(norm > {STATE_NORM_LIMIT:g} or non-finite)"
            )

    trace = SimTrace(times=times, states=states, y1=y1_arr, y2=y2_arr,
                     y1_held=held_arr, u1=u1_arr, u2=u2_arr, H1=H1_arr,
                     H_total=Ht_arr, event=event, delay=delay_arr, log=log,
                     model=model, cfg=cfg, dt=dt)
    trace.indices = performance_indices(trace)
    trace.indices["avg_inter_event"] = log.avg_inter_event()
    return trace


def performance_indices(trace: SimTrace, signal=None) -> dict[str, float]:
    """Integral metrics of a scalar signal over the trace, by trapezoid rule.

    The default signal is the plant energy H1 along the trace. Returns the
    integrals of signal^2 (ISE), |signal| (IAE) and t*|signal| (ITAE).
    """
    if signal is None:
        signal = trace.H1
    s = np.asarray(signal, dtype=float).reshape(-1)
    t = trace.times
    if s.shape != t.shape:
        raise DimensionMismatch("signal must be sampled on the trace grid")
    return {
        "ISE": float(np.trapezoid(s * s, t)),
        "IAE": float(np.trapezoid(np.abs(s), t)),
        "ITAE": float(np.trapezoid(t * np.abs(s), t)),
    }


def state_labels(model: ClosedLoopModel) -> list[str]:
    if model.sys1.n == 2 and model.sys2.n == 1:
        return ["q", "qdot", "x2"]
    return [f"x{k}" for k in range(model.n)]


def trace_to_csv(trace: SimTrace, path) -> None:
    """Write the trace as CSV with shortest-roundtrip float formatting.

    Scalar-port models get the flat header (t, <states>, y1, y1_held, u1,
    u2, H1, Htotal, event, delay); wider ports index the signal columns.
    """
    m = trace.model.m
    names = state_labels(trace.model)

    def sig_cols(base):
        return [base] if m == 1 else [f"{base}_{k}" for k in range(m)]

    cols = ["t"] + names + sig_cols("y1") + sig_cols("y1_held")
    cols += sig_cols("u1") + sig_cols("u2") + ["H1", "Htotal", "event", "delay"]

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(trace.times.size):
            cells = [repr(float(trace.times[i]))]
            cells += [repr(float(v)) for v in trace.states[i]]
            for arr in (trace.y1, trace.y1_held, trace.u1, trace.u2):
                cells += [repr(float(v)) for v in arr[i]]
            cells.append(repr(float(trace.H1[i])))
            cells.append(repr(float(trace.H_total[i])))
            cells.append(str(int(trace.event[i])))
            d = trace.delay[i]
            cells.append("" if math.isnan(d) else repr(float(d)))
            fh.write(",".join(cells) + "\n")
