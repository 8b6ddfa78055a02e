"""Periodic event trigger, delayed channel and transmission bookkeeping.

The first subsystem's output is sampled every h seconds. At a sampling
instant the fresh output y1 is compared with the value the receiver is still
applying, e = held - fresh, and a packet goes out iff

    e^T Omega e - sigma * y1^T Omega y1 >= 0.

Each transmitted packet experiences a bounded random delay in [tau_m, tau_M];
between arrivals the receiver keeps the previous value (zero-order hold).
The age of the sample behind the applied value never exceeds
delta_M = h + tau_M.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionMismatch

Vector = np.ndarray
Matrix = np.ndarray

# Minimal spacing forced between arrivals when a draw lands out of order.
REORDER_EPS = 1e-9


@dataclass(frozen=True)
class TriggerDelayConfig:
    """Sampling period, trigger threshold and weight, and the delay band.

    omega is the positive definite trigger weight; None means identity of the
    port dimension. seed drives the reproducible per-packet delay draw.
    A zero delay band (tau_m = tau_M = 0) is accepted and gives the pure
    periodic sampled-data setup.
    """

    h: float
    sigma: float
    omega: Matrix | None = None
    tau_m: float = 0.0
    tau_M: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.h > 0):
            raise ConfigError(f"sampling period h must be positive, got {self.h}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be nonnegative, got {self.sigma}")
        if not (0 <= self.tau_m <= self.tau_M):
            raise ConfigError(
                f"need 0 <= tau_m <= tau_M, got tau_m={self.tau_m}, tau_M={self.tau_M}"
            )
        if self.omega is not None:
            om = np.atleast_2d(np.asarray(self.omega, dtype=float))
            if om.shape[0] != om.shape[1]:
                raise DimensionMismatch(f"omega must be square, got {om.shape}")
            if np.any(om != om.T):
                raise ConfigError("omega must be symmetric")
            if np.linalg.eigvalsh(om).min() <= 0:
                raise ConfigError("omega must be positive definite")
            om.setflags(write=False)
            object.__setattr__(self, "omega", om)
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")

    @property
    def delta_M(self) -> float:
        """Worst-case age of the applied sample: one period plus max delay."""
        return self.h + self.tau_M

    def omega_for(self, m: int) -> Matrix:
        if self.omega is None:
            return np.eye(m)
        if self.omega.shape[0] != m:
            raise DimensionMismatch(
                f"omega is {self.omega.shape[0]}x{self.omega.shape[0]} "
                f"but the port has dimension {m}"
            )
        return self.omega


def check_trigger(cfg: TriggerDelayConfig, e: Vector, y1: Vector) -> bool:
    """True when the held-value error has reached the sigma fraction of the
    output energy; the boundary case transmits.

    One consequence of the inclusive comparison: on the equilibrium both
    quadratic forms vanish and every sampling instant fires.
    """
    e = np.asarray(e, dtype=float).reshape(-1)
    y1 = np.asarray(y1, dtype=float).reshape(-1)
    if e.shape != y1.shape:
        raise DimensionMismatch(f"e has shape {e.shape} but y1 has {y1.shape}")
    om = cfg.omega_for(e.size)
    return float(e @ om @ e - cfg.sigma * (y1 @ om @ y1)) >= 0.0


def sample_delay(cfg: TriggerDelayConfig, t_k: float) -> float:
    """Deterministic uniform draw from [tau_m, tau_M] for the packet
    released at t_k.

    Hashes the seed together with the bit pattern of t_k, so the value is a
    pure function of (seed, t_k): stable across runs, platforms and call
    order, and different packets decorrelate through the hash.
    """
    if cfg.tau_M == cfg.tau_m:
        return cfg.tau_m
    digest = hashlib.sha256(
        int(cfg.seed).to_bytes(8, "big") + np.float64(t_k).tobytes()
    ).digest()
    u = int.from_bytes(digest[:8], "big") / 2.0 ** 64
    return cfg.tau_m + (cfg.tau_M - cfg.tau_m) * u


@dataclass
class TransmissionLog:
    """Every sampling decision plus the released-packet history.

    The sample_* lists cover all sampling instants: time, fresh output,
    held-minus-fresh error and the trigger verdict. The release/arrival/value
    lists cover transmitted packets only, in release order; tx_sample_idx
    maps each packet back to its sampling instant. Arrivals are kept strictly
    increasing (out-of-order draws are re-clamped upstream), so transmitted
    packets are a subset of the fired samples with well-ordered holding
    intervals.

    initial_value is what the receiver applies before the first arrival.
    """

    sample_times: list[float] = field(default_factory=list)
    sample_y1: list[np.ndarray] = field(default_factory=list)
    sample_e: list[np.ndarray] = field(default_factory=list)
    fired: list[bool] = field(default_factory=list)
    release_times: list[float] = field(default_factory=list)
    arrival_times: list[float] = field(default_factory=list)
    values: list[np.ndarray] = field(default_factory=list)
    tx_sample_idx: list[int] = field(default_factory=list)
    initial_value: np.ndarray | None = None

    def record_sample(self, t: float, y1: Vector, e: Vector, did_fire: bool) -> None:
        self.sample_times.append(float(t))
        self.sample_y1.append(np.asarray(y1, dtype=float).reshape(-1).copy())
        self.sample_e.append(np.asarray(e, dtype=float).reshape(-1).copy())
        self.fired.append(bool(did_fire))

    def record_transmission(self, t_release: float, t_arrival: float,
                            value: Vector) -> None:
        if self.arrival_times and t_arrival <= self.arrival_times[-1]:
            raise ValueError(
                f"arrival at {t_arrival} does not follow {self.arrival_times[-1]}"
            )
        if t_arrival < t_release:
            raise ValueError("a packet cannot arrive before it is released")
        self.release_times.append(float(t_release))
        self.arrival_times.append(float(t_arrival))
        self.values.append(np.asarray(value, dtype=float).reshape(-1).copy())
        self.tx_sample_idx.append(len(self.sample_times) - 1)

    @property
    def transmission_count(self) -> int:
        return len(self.release_times)

    def inter_event_times(self) -> np.ndarray:
        """Gaps between consecutive packet releases."""
        return np.diff(np.asarray(self.release_times))

    def avg_inter_event(self) -> float:
        """Mean spacing of releases; nan with fewer than two packets."""
        if self.transmission_count < 2:
            return float("nan")
        span = self.release_times[-1] - self.release_times[0]
        return span / (self.transmission_count - 1)


def clamp_delay(log: TransmissionLog, t_release: float, tau: float) -> float:
    """Re-clamp a drawn delay so the arrival lands after the previous one.

    The channel semantics need well-ordered holding intervals; a draw whose
    arrival would not follow the last one is pushed to just past it instead
    of being dropped.
    """
    if log.arrival_times and t_release + tau <= log.arrival_times[-1]:
        return (log.arrival_times[-1] - t_release) + REORDER_EPS
    return tau


def held_value(log: TransmissionLog, t: float) -> Vector:
    """Receiver-side value in effect at time t.

    Left-closed at arrivals: a packet arriving exactly at t is already
    applied at t. Before the first arrival the log's initial value holds
    (zero when none was configured).
    """
    arrivals = log.arrival_times
    idx = int(np.searchsorted(np.asarray(arrivals), t, side="right")) - 1
    if idx >= 0:
        return log.values[idx]
    if log.initial_value is not None:
        return np.asarray(log.initial_value, dtype=float).reshape(-1)
    width = log.values[0].size if log.values else 1
    return np.zeros(width)


def events_to_csv(log: TransmissionLog, path) -> None:
    """Write the per-sample event log as CSV.

    Columns: sampling time, fresh output, held-value error, trigger verdict,
    then delay and arrival for fired samples (empty cells otherwise).
    """
    width = log.sample_y1[0].size if log.sample_y1 else 1
    arrival_by_sample = {}
    for k, idx in enumerate(log.tx_sample_idx):
        arrival_by_sample[idx] = (log.release_times[k], log.arrival_times[k])
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        cols = ["t"]
        cols += [f"y1_{k}" for k in range(width)]
        cols += [f"e_{k}" for k in range(width)]
        cols += ["triggered", "delay", "arrival"]
        fh.write(",".join(cols) + "\n")
        for i, t in enumerate(log.sample_times):
            cells = [repr(float(t))]
            cells += [repr(float(v)) for v in log.sample_y1[i]]
            cells += [repr(float(v)) for v in log.sample_e[i]]
            cells.append("1" if log.fired[i] else "0")
            if i in arrival_by_sample:
                rel, arr = arrival_by_sample[i]
                cells += [repr(float(arr - rel)), repr(float(arr))]
            else:
                cells += ["", ""]
            fh.write(",".join(cells) + "\n")
