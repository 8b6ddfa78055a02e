"""Scenario files: one strict TOML document describing a whole run.

Sections are [model], [trigger], [network], [simulation], [sweep] and
[output]; unknown sections or keys are hard errors so parameter typos
cannot silently fall back to defaults. Every value has a default, so the
built-in pendulum benchmark runs with no file at all. The scenario records
which keys the user actually set; table verbs use that to fill in their
canonical settings without overriding explicit choices.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .core import (
    ClosedLoopModel,
    assemble_interconnection,
    make_pendulum_model,
    make_subsystem,
    pendulum_hessian_bounds,
)
from .errors import ConfigError
from .trigger import TriggerDelayConfig

_LINEAR_KEYS = ("M1", "J1", "R1", "G1", "M2", "J2", "R2", "G2")

_SCHEMA: dict[str, set[str]] = {
    "model": {"kind", "zeta", "zeta_c", "gain", "validity_radius", *_LINEAR_KEYS},
    "trigger": {"h", "sigma", "omega"},
    "network": {"tau_m", "tau_M", "seed"},
    "simulation": {"x0", "T", "dt"},
    "sweep": {"sigma", "tau_M", "delta_M", "seeds"},
    "output": {"dir"},
}

DEFAULT_SIGMA_AXIS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
DEFAULT_TAU_M_AXIS = (0.1, 0.2, 0.3, 0.4)
DEFAULT_DELTA_M_AXIS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)


@dataclass(frozen=True)
class Scenario:
    """Resolved configuration plus the set of user-provided keys."""

    model_kind: str = "pendulum"
    zeta: float = 0.1
    zeta_c: float = 1.0
    gain: float = 3.0
    validity_radius: float | None = math.pi
    linear_parts: dict[str, Any] | None = None
    h: float = 0.3
    sigma: float = 0.88
    omega: Any = None
    tau_m: float = 0.0
    tau_M: float = 0.0
    seed: int = 1
    x0: tuple[float, ...] = (2.0, 0.0, 0.0)
    T: float = 40.0
    dt: float = 1e-3
    sigma_axis: tuple[float, ...] = DEFAULT_SIGMA_AXIS
    tau_M_axis: tuple[float, ...] = DEFAULT_TAU_M_AXIS
    delta_M_axis: tuple[float, ...] = DEFAULT_DELTA_M_AXIS
    seeds: tuple[int, ...] = (1,)
    out_dir: str = "out"
    provided: frozenset[str] = frozenset()

    def was_set(self, key: str) -> bool:
        """Whether the user set `section.key` explicitly."""
        return key in self.provided


def _need(value, types, where: str):
    if isinstance(value, bool) or not isinstance(value, types):
        raise ConfigError(f"{where}: expected {types}, got {value!r}")
    return value


def _number(value, where: str) -> float:
    return float(_need(value, (int, float), where))


def _number_list(value, where: str) -> tuple[float, ...]:
    _need(value, list, where)
    if not value:
        raise ConfigError(f"{where}: axis must not be empty")
    return tuple(_number(v, where) for v in value)


def _int_list(value, where: str) -> tuple[int, ...]:
    _need(value, list, where)
    if not value:
        raise ConfigError(f"{where}: axis must not be empty")
    return tuple(int(_need(v, int, where)) for v in value)


def _matrix(value, where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a numeric matrix: {exc}") from None
    return np.atleast_2d(arr)


def load_scenario(path=None) -> Scenario:
    """Read and validate a scenario file; None gives the pure defaults."""
    if path is None:
        return Scenario()
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"scenario file does not parse: {exc}") from None

    provided: set[str] = set()
    for section, body in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table of keys")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            provided.add(f"{section}.{key}")

    kw: dict[str, Any] = {}
    model = raw.get("model", {})
    if "kind" in model:
        kind = _need(model["kind"], str, "model.kind")
        if kind not in ("pendulum", "linear"):
            raise ConfigError(f"model.kind must be 'pendulum' or 'linear', got {kind!r}")
        kw["model_kind"] = kind
    for key, field in (("zeta", "zeta"), ("zeta_c", "zeta_c"), ("gain", "gain")):
        if key in model:
            kw[field] = _number(model[key], f"model.{key}")
    if "validity_radius" in model:
        kw["validity_radius"] = _number(model["validity_radius"],
                                        "model.validity_radius")
    if kw.get("model_kind") == "linear":
        missing = [k for k in _LINEAR_KEYS if k not in model]
        if missing:
            raise ConfigError(f"model.kind = 'linear' needs keys {missing}")
        kw["linear_parts"] = {k: _matrix(model[k], f"model.{k}") for k in _LINEAR_KEYS}
        kw.setdefault("validity_radius", None)

    trig = raw.get("trigger", {})
    if "h" in trig:
        kw["h"] = _number(trig["h"], "trigger.h")
    if "sigma" in trig:
        kw["sigma"] = _number(trig["sigma"], "trigger.sigma")
    if "omega" in trig:
        kw["omega"] = _matrix(trig["omega"], "trigger.omega")

    net = raw.get("network", {})
    if "tau_m" in net:
        kw["tau_m"] = _number(net["tau_m"], "network.tau_m")
    if "tau_M" in net:
        kw["tau_M"] = _number(net["tau_M"], "network.tau_M")
    if "seed" in net:
        kw["seed"] = int(_need(net["seed"], int, "network.seed"))

    sim = raw.get("simulation", {})
    if "x0" in sim:
        kw["x0"] = _number_list(sim["x0"], "simulation.x0")
    if "T" in sim:
        kw["T"] = _number(sim["T"], "simulation.T")
    if "dt" in sim:
        kw["dt"] = _number(sim["dt"], "simulation.dt")

    sweep = raw.get("sweep", {})
    if "sigma" in sweep:
        kw["sigma_axis"] = _number_list(sweep["sigma"], "sweep.sigma")
    if "tau_M" in sweep:
        kw["tau_M_axis"] = _number_list(sweep["tau_M"], "sweep.tau_M")
    if "delta_M" in sweep:
        kw["delta_M_axis"] = _number_list(sweep["delta_M"], "sweep.delta_M")
    if "seeds" in sweep:
        kw["seeds"] = _int_list(sweep["seeds"], "sweep.seeds")

    out = raw.get("output", {})
    if "dir" in out:
        kw["out_dir"] = _need(out["dir"], str, "output.dir")

    return Scenario(provided=frozenset(provided), **kw)


def build_model(scenario: Scenario) -> ClosedLoopModel:
    if scenario.model_kind == "pendulum":
        return make_pendulum_model(scenario.zeta, scenario.zeta_c, scenario.gain)
    parts = scenario.linear_parts
    if parts is None:
        raise ConfigError("model.kind = 'linear' needs explicit matrices")

    def quad(M):
        return (lambda x: 0.5 * float(x @ M @ x),
                lambda x: M @ np.asarray(x, float),
                lambda x: M)

    H1, g1, h1 = quad(parts["M1"])
    H2, g2, h2 = quad(parts["M2"])
    s1 = make_subsystem(parts["J1"], parts["R1"], parts["G1"], H1, g1, h1)
    s2 = make_subsystem(parts["J2"], parts["R2"], parts["G2"], H2, g2, h2)
    return assemble_interconnection(s1, s2)


def vertex_bounds(scenario: Scenario) -> dict:
    """Hessian entry bounds for the scenario's model (empty = constant)."""
    if scenario.model_kind == "pendulum":
        return pendulum_hessian_bounds()
    return {}


def trigger_config(scenario: Scenario, h: float | None = None,
                   sigma: float | None = None, tau_m: float | None = None,
                   tau_M: float | None = None,
                   seed: int | None = None) -> TriggerDelayConfig:
    """The scenario's channel settings, with per-run overrides."""
    return TriggerDelayConfig(
        h=scenario.h if h is None else h,
        sigma=scenario.sigma if sigma is None else sigma,
        omega=scenario.omega,
        tau_m=scenario.tau_m if tau_m is None else tau_m,
        tau_M=scenario.tau_M if tau_M is None else tau_M,
        seed=scenario.seed if seed is None else seed,
    )


def derive_seed(root: int, sigma: float, tau_M: float, run_idx: int) -> int:
    """Per-run channel seed: a hash of the root seed and the cell coordinates.

    Cells of a sweep get independent yet reproducible delay realisations;
    repr() of the floats keeps the mapping exact (0.1 and 0.1000001 differ).
    """
    text = f"{root}|{sigma!r}|{tau_M!r}|{run_idx}"
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")
