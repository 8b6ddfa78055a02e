"""Port-Hamiltonian building blocks and their networked interconnection.

A subsystem is d/dt x = (J - R) grad H(x) + G u with output y = G^T grad H(x).
Two subsystems are closed through a skew feedback: the first output travels
over a sampled channel and reaches the second input as a held value, while the
second output feeds back continuously with a sign flip. Stacking the energy
gradients as w = (grad H1, grad H2), the loop becomes

    d/dt xi = A w(t) + A_d w(t - delta(t)) + A_e e(t - delta(t)),

where e is the held-minus-fresh output error of the first subsystem and
delta(t) is the elapsed time since the sample that is currently applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    AntisymmetryViolation,
    DimensionMismatch,
    DissipationViolation,
    EquilibriumViolation,
    GradientMismatch,
)

Vector = np.ndarray
Matrix = np.ndarray

_EQ_GRAD_TOL = 1e-10
_HESS_CHECK_RTOL = 1e-5
_HESS_FD_STEP = 1e-5
_HESS_PROBE_COUNT = 8
_HESS_PROBE_RADIUS = 0.5
_HESS_PROBE_SEED = 916
_PSD_SLACK = 1e-12


def _square(value, name: str) -> Matrix:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    return arr


def _input_matrix(value, n: int, name: str) -> Matrix:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] != n:
        raise DimensionMismatch(f"{name} must have {n} rows, got shape {arr.shape}")
    return arr


def fd_hessian(grad: Callable[[Vector], Vector], x: Vector) -> Matrix:
    """Central-difference Hessian of a gradient field, symmetrised.

    The step per coordinate is scaled as 1e-5 * (1 + |x_i|).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.empty((n, n))
    for i in range(n):
        step = _HESS_FD_STEP * (1.0 + abs(float(x[i])))
        unit = np.zeros(n)
        unit[i] = step
        out[:, i] = (np.asarray(grad(x + unit), float) - np.asarray(grad(x - unit), float)) / (2.0 * step)
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class PhSubsystem:
    """One port-Hamiltonian block in coordinates shifted to its equilibrium.

    J is skew-symmetric structure, R symmetric positive semidefinite
    dissipation, G the input map (a constant matrix, or a state callback for
    simulation-only models). H, gradH and hessH act on the shifted state, so
    H(0) = 0 and gradH(0) = 0 by construction.
    """

    J: Matrix
    R: Matrix
    G: Matrix | Callable[[Vector], Matrix]
    H: Callable[[Vector], float]
    gradH: Callable[[Vector], Vector]
    hessH: Callable[[Vector], Matrix]
    n: int
    m: int

    @property
    def constant_G(self) -> bool:
        return isinstance(self.G, np.ndarray)

    def G_at(self, x: Vector) -> Matrix:
        if self.constant_G:
            return self.G
        return _input_matrix(self.G(np.asarray(x, float)), self.n, "G(x)")


def make_subsystem(J, R, G, H, gradH, hessH=None, equilibrium=None) -> PhSubsystem:
    """Validate and normalise one subsystem description.

    The declared equilibrium is shifted to the origin and the energy offset is
    removed, so downstream code never sees the original coordinates. When
    hessH is omitted a central finite-difference of gradH stands in for it.

    Raises AntisymmetryViolation, DissipationViolation, EquilibriumViolation,
    GradientMismatch or DimensionMismatch when the description is inconsistent.
    """
    Jm = _square(J, "J")
    n = Jm.shape[0]
    Rm = _square(R, "R")
    if Rm.shape[0] != n:
        raise DimensionMismatch(f"R must be {n}x{n}, got {Rm.shape}")
    if np.any(Jm + Jm.T != 0.0):
        raise AntisymmetryViolation("J + J^T must vanish exactly")
    if np.any(Rm != Rm.T):
        raise DissipationViolation("R must be symmetric")
    eigs = np.linalg.eigvalsh(Rm)
    if eigs.min() < -_PSD_SLACK * max(1.0, float(np.abs(eigs).max())):
        raise DissipationViolation(f"R has negative eigenvalue {eigs.min():.3e}")

    if equilibrium is None:
        xe = np.zeros(n)
    else:
        xe = np.asarray(equilibrium, dtype=float).reshape(-1)
        if xe.shape != (n,):
            raise DimensionMismatch(f"equilibrium must have length {n}")

    h_offset = float(H(xe))

    def H_shifted(x, _H=H, _xe=xe, _off=h_offset):
        return float(_H(np.asarray(x, float) + _xe) - _off)

    def grad_shifted(x, _g=gradH, _xe=xe):
        return np.asarray(_g(np.asarray(x, float) + _xe), dtype=float).reshape(-1)

    if hessH is None:
        def hess_shifted(x, _g=grad_shifted):
            return fd_hessian(_g, x)
    else:
        def hess_shifted(x, _h=hessH, _xe=xe):
            return np.atleast_2d(np.asarray(_h(np.asarray(x, float) + _xe), dtype=float))

    g0 = grad_shifted(np.zeros(n))
    if g0.shape != (n,):
        raise DimensionMismatch(f"gradH must return length-{n} vectors, got {g0.shape}")
    if not np.isfinite(H_shifted(np.zeros(n))):
        raise EquilibriumViolation("H is not finite at the equilibrium")
    if float(np.linalg.norm(g0)) > _EQ_GRAD_TOL:
        raise EquilibriumViolation(
            f"gradient norm {np.linalg.norm(g0):.3e} at the equilibrium exceeds {_EQ_GRAD_TOL:g}"
        )

    _check_hessian(grad_shifted, hess_shifted, n)

    if callable(G) and not isinstance(G, np.ndarray):
        def G_shifted(x, _G=G, _xe=xe):
            return np.asarray(_G(np.asarray(x, float) + _xe), dtype=float)

        m = _input_matrix(G_shifted(np.zeros(n)), n, "G(x)").shape[1]
        G_final: Matrix | Callable = G_shifted
    else:
        G_final = _input_matrix(G, n, "G")
        m = G_final.shape[1]
        G_final.setflags(write=False)

    Jm.setflags(write=False)
    Rm.setflags(write=False)
    return PhSubsystem(J=Jm, R=Rm, G=G_final, H=H_shifted, gradH=grad_shifted,
                       hessH=hess_shifted, n=n, m=m)


def _check_hessian(grad, hess, n: int) -> None:
    rng = np.random.default_rng(_HESS_PROBE_SEED)
    for _ in range(_HESS_PROBE_COUNT):
        x = _HESS_PROBE_RADIUS * rng.standard_normal(n)
        given = np.atleast_2d(np.asarray(hess(x), dtype=float))
        if given.shape != (n, n):
            raise DimensionMismatch(f"hessH must return {n}x{n}, got {given.shape}")
        scale = 1.0 + float(np.linalg.norm(given))
        if float(np.linalg.norm(given - given.T)) > 1e-9 * scale:
            raise GradientMismatch("hessH must return symmetric matrices")
        probe = fd_hessian(grad, x)
        err = float(np.linalg.norm(probe - given)) / scale
        if err > _HESS_CHECK_RTOL:
            raise GradientMismatch(
                f"hessH deviates from finite differences of gradH by {err:.3e} (relative)"
            )


@dataclass(frozen=True)
class ClosedLoopModel:
    """The two-subsystem loop in stacked coordinates xi = (x1, x2).

    A, A_d and A_e are the drift, delayed-coupling and error-injection blocks
    of the closed loop written on stacked gradients. They are plain arrays for
    constant input maps and callbacks of xi otherwise (simulation only).
    Gcal selects the first output from the stacked gradient: y1 = Gcal w.
    """

    sys1: PhSubsystem
    sys2: PhSubsystem
    A: Matrix | Callable[[Vector], Matrix]
    A_d: Matrix | Callable[[Vector], Matrix]
    A_e: Matrix | Callable[[Vector], Matrix]
    Gcal: Matrix | Callable[[Vector], Matrix]
    n: int
    m: int

    @property
    def constant_matrices(self) -> bool:
        return isinstance(self.A, np.ndarray)

    def split(self, xi: Vector) -> tuple[Vector, Vector]:
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.shape != (self.n,):
            raise DimensionMismatch(f"state must have length {self.n}, got {xi.shape}")
        return xi[: self.sys1.n], xi[self.sys1.n:]

    def gradTotal(self, xi: Vector) -> Vector:
        x1, x2 = self.split(xi)
        return np.concatenate([self.sys1.gradH(x1), self.sys2.gradH(x2)])

    def hessTotal(self, xi: Vector) -> Matrix:
        x1, x2 = self.split(xi)
        n1 = self.sys1.n
        out = np.zeros((self.n, self.n))
        out[:n1, :n1] = self.sys1.hessH(x1)
        out[n1:, n1:] = self.sys2.hessH(x2)
        return out

    def H_total(self, xi: Vector) -> float:
        x1, x2 = self.split(xi)
        return self.sys1.H(x1) + self.sys2.H(x2)

    def blocks_at(self, xi: Vector) -> tuple[Matrix, Matrix, Matrix]:
        """Evaluate (A, A_d, A_e) at a state, trivially for constant models."""
        if self.constant_matrices:
            return self.A, self.A_d, self.A_e
        return self.A(xi), self.A_d(xi), self.A_e(xi)


def assemble_interconnection(sys1: PhSubsystem, sys2: PhSubsystem) -> ClosedLoopModel:
    """Build the closed-loop blocks from two validated subsystems.

    Requires matching port dimension (the first output drives the second
    input and conversely). With B_i = J_i - R_i the constant-case blocks are

        A   = [[B1, -G1 G2^T], [0, B2]]
        A_d = [[0, 0], [G2 G1^T, 0]]
        A_e = [[0], [G2]]
        Gcal = [G1^T, 0].
    """
    if sys1.m != sys2.m:
        raise DimensionMismatch(
            f"port dimensions differ: {sys1.m} (first) vs {sys2.m} (second)"
        )
    n1, n2, m = sys1.n, sys2.n, sys1.m
    n = n1 + n2
    B1 = sys1.J - sys1.R
    B2 = sys2.J - sys2.R

    if sys1.constant_G and sys2.constant_G:
        G1, G2 = sys1.G, sys2.G
        A = np.block([[B1, -G1 @ G2.T], [np.zeros((n2, n1)), B2]])
        A_d = np.block([[np.zeros((n1, n1)), np.zeros((n1, n2))],
                        [G2 @ G1.T, np.zeros((n2, n2))]])
        A_e = np.vstack([np.zeros((n1, m)), G2])
        Gcal = np.hstack([G1.T, np.zeros((m, n2))])
        for arr in (A, A_d, A_e, Gcal):
            arr.setflags(write=False)
        return ClosedLoopModel(sys1=sys1, sys2=sys2, A=A, A_d=A_d, A_e=A_e,
                               Gcal=Gcal, n=n, m=m)

    # State-dependent input maps: expose the blocks as callbacks of xi.
    def _gs(xi):
        x1 = np.asarray(xi, float)[:n1]
        x2 = np.asarray(xi, float)[n1:]
        return sys1.G_at(x1), sys2.G_at(x2)

    def A_fun(xi):
        G1, G2 = _gs(xi)
        return np.block([[B1, -G1 @ G2.T], [np.zeros((n2, n1)), B2]])

    def A_d_fun(xi):
        G1, G2 = _gs(xi)
        return np.block([[np.zeros((n1, n1)), np.zeros((n1, n2))],
                         [G2 @ G1.T, np.zeros((n2, n2))]])

    def A_e_fun(xi):
        _, G2 = _gs(xi)
        return np.vstack([np.zeros((n1, m)), G2])

    def Gcal_fun(xi):
        G1, _ = _gs(xi)
        return np.hstack([G1.T, np.zeros((m, n2))])

    return ClosedLoopModel(sys1=sys1, sys2=sys2, A=A_fun, A_d=A_d_fun,
                           A_e=A_e_fun, Gcal=Gcal_fun, n=n, m=m)


def output_y1(model: ClosedLoopModel, xi: Vector) -> Vector:
    """First-subsystem output y1 = G1(x1)^T grad H1(x1) at a stacked state."""
    x1, _ = model.split(xi)
    return model.sys1.G_at(x1).T @ model.sys1.gradH(x1)


# ---------------------------------------------------------------------------
# Built-in benchmark: actuated pendulum with a first-order dynamic controller.


def make_pendulum_plant(zeta: float = 0.1) -> PhSubsystem:
    """Damped pendulum, state (angle, angular velocity), torque input."""
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    return make_subsystem(
        J=[[0.0, 1.0], [-1.0, 0.0]],
        R=[[0.0, 0.0], [0.0, float(zeta)]],
        G=[[0.0], [1.0]],
        H=lambda x: 0.5 * x[1] ** 2 + (1.0 - np.cos(x[0])),
        gradH=lambda x: np.array([np.sin(x[0]), x[1]]),
        hessH=lambda x: np.array([[np.cos(x[0]), 0.0], [0.0, 1.0]]),
    )


def make_pendulum_controller(zeta_c: float = 1.0, gain: float = 3.0) -> PhSubsystem:
    """Scalar dynamic controller with quadratic energy 0.5 * gain * x^2."""
    if zeta_c < 0:
        raise ValueError("zeta_c must be nonnegative")
    if gain <= 0:
        raise ValueError("gain must be positive")
    return make_subsystem(
        J=[[0.0]],
        R=[[float(zeta_c)]],
        G=[[1.0]],
        H=lambda x: 0.5 * gain * x[0] ** 2,
        gradH=lambda x: np.array([gain * x[0]]),
        hessH=lambda x: np.array([[gain]]),
    )


def make_pendulum_model(zeta: float = 0.1, zeta_c: float = 1.0,
                        gain: float = 3.0) -> ClosedLoopModel:
    return assemble_interconnection(make_pendulum_plant(zeta),
                                    make_pendulum_controller(zeta_c, gain))


def pendulum_hessian_bounds() -> dict[tuple[int, int], tuple[float, float]]:
    """Entry bounds spanning the pendulum Hessian over the whole state space.

    Only the (0, 0) entry varies (the cosine of the angle), so the convex
    hull has two vertices.
    """
    return {(0, 0): (-1.0, 1.0)}
