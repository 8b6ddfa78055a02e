"""Assembly and solution of the stability matrix inequalities.

The closed loop is certified through a delay functional whose decrease
condition, after an integral lower bound and the trigger's quadratic
guarantee are folded in, becomes negative definiteness of one symmetric
block matrix Xi in the stacked vector

    psi = (grad now, grad at the applied sample, windowed grad average,
           held-value error).

Xi is affine in the certificate matrices (P, Q, Omega) for a fixed Hessian.
The Hessian enters one term quadratically, but that term is X^T Q X with
X linear in the Hessian, which is matrix-convex for Q >= 0: negative
definiteness at the polytope vertices therefore carries to every interior
Hessian, and the default certification route imposes Xi directly per
vertex. The Schur form Theta, in which the Hessian appears only linearly,
is kept both as an exact numeric cross-check (true inverse corner) and as
an alternative certification route whose inverse corner is replaced by the
conservative surrogate -(1/alpha) I under the cap Q <= alpha*I.
Feasibility itself is delegated to a pluggable engine and every witness is
re-verified with a plain eigensolver.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ClosedLoopModel
from .engine import CvxpyEngine, FeasibilityEngine
from .errors import (
    DimensionMismatch,
    NoFeasiblePoint,
    NonConstantMatrices,
    SolverFailure,
)

DEFAULT_ALPHA_SWEEP = (1e-3, 1e-2, 1e-1, 1.0)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNDECIDED = "undecided"


def default_epsilon(A) -> float:
    """Strictness margin used on all definiteness constraints."""
    return 1e-6 * (1.0 + float(np.linalg.norm(np.asarray(A, float), 2)))


def _is_numeric(x) -> bool:
    return isinstance(x, (np.ndarray, int, float, np.floating))


def _bmat(rows):
    if all(_is_numeric(b) for row in rows for b in row):
        return np.block(rows)
    import cvxpy as cp

    return cp.bmat(rows)


def _data(A, A_d, A_e, Gcal, Hess):
    A = np.atleast_2d(np.asarray(A, float))
    A_d = np.atleast_2d(np.asarray(A_d, float))
    A_e = np.asarray(A_e, float)
    if A_e.ndim == 1:
        A_e = A_e[:, None]
    Gcal = np.atleast_2d(np.asarray(Gcal, float))
    Hess = np.atleast_2d(np.asarray(Hess, float))
    n = A.shape[0]
    if A.shape != (n, n) or A_d.shape != (n, n):
        raise DimensionMismatch("A and A_d must be square and equally sized")
    if Hess.shape != (n, n):
        raise DimensionMismatch(f"Hessian must be {n}x{n}, got {Hess.shape}")
    if np.any(np.abs(Hess - Hess.T) > 1e-12 * max(1.0, float(np.abs(Hess).max()))):
        raise DimensionMismatch("Hessian must be symmetric")
    if A_e.shape[0] != n:
        raise DimensionMismatch(f"A_e must have {n} rows, got {A_e.shape}")
    m = A_e.shape[1]
    if Gcal.shape != (m, n):
        raise DimensionMismatch(f"selector must be {m}x{n}, got {Gcal.shape}")
    return A, A_d, A_e, Gcal, Hess, n, m


def build_xi(A, A_d, A_e, Gcal, Hess, delta_M, sigma, P, Q, Omega):
    """The 4x4-block decrease condition at one fixed Hessian.

    Block sizes are (n, n, n, m). P, Q, Omega may be numeric arrays or
    solver variables; everything else is numeric data. The matrix is affine
    in (P, Q, Omega).
    """
    A, A_d, A_e, Gcal, H, n, m = _data(A, A_d, A_e, Gcal, Hess)
    d2 = float(delta_M) ** 2
    HA, HAd, HAe = H @ A, H @ A_d, H @ A_e

    x11 = 0.5 * (A + A.T) + A.T @ H.T @ P + P @ HA + d2 * (HA.T @ Q @ HA) - 4.0 * Q
    x21 = A_d.T @ H.T @ P + 0.5 * A_d.T + d2 * (HAd.T @ Q @ HA) - 2.0 * Q
    x22 = d2 * (HAd.T @ Q @ HAd) - 4.0 * Q + sigma * (Gcal.T @ Omega @ Gcal)
    x31 = 6.0 * Q
    x32 = 6.0 * Q
    x33 = -12.0 * Q
    x41 = A_e.T @ H.T @ P + 0.5 * A_e.T + d2 * (HAe.T @ Q @ HA)
    x42 = d2 * (HAe.T @ Q @ HAd)
    x43 = np.zeros((m, n))
    x44 = d2 * (HAe.T @ Q @ HAe) - Omega

    return _bmat([
        [x11, x21.T, x31.T, x41.T],
        [x21, x22, x32.T, x42.T],
        [x31, x32, x33, x43.T],
        [x41, x42, x43, x44],
    ])


def build_theta(A, A_d, A_e, Gcal, Hess, delta_M, sigma, P, Q, Omega,
                Qinv_bound):
    """Schur form of the decrease condition, linear in the Hessian.

    The quadratic-in-Q terms of build_xi move into a fifth block row
    delta_M * [H A, H A_d, 0, H A_e] against a corner block -Qinv_bound.
    With Qinv_bound = Q^{-1} (numeric use) this is exactly equivalent to the
    4x4 form; with the surrogate Qinv_bound = (1/alpha) I it is a sound
    sufficient condition whenever Q <= alpha*I, since then
    -(1/alpha) I >= -Q^{-1}. The matrix is affine in (P, Q, Omega) and in
    the Hessian.
    """
    A, A_d, A_e, Gcal, H, n, m = _data(A, A_d, A_e, Gcal, Hess)
    dM = float(delta_M)
    HA, HAd, HAe = H @ A, H @ A_d, H @ A_e

    t11 = 0.5 * (A + A.T) + A.T @ H.T @ P + P @ HA - 4.0 * Q
    t21 = A_d.T @ H.T @ P + 0.5 * A_d.T - 2.0 * Q
    t22 = -4.0 * Q + sigma * (Gcal.T @ Omega @ Gcal)
    t31 = 6.0 * Q
    t32 = 6.0 * Q
    t33 = -12.0 * Q
    t41 = A_e.T @ H.T @ P + 0.5 * A_e.T
    t42 = np.zeros((m, n))
    t43 = np.zeros((m, n))
    t44 = -1.0 * Omega

    r51, r52, r53, r54 = dM * HA, dM * HAd, np.zeros((n, n)), dM * HAe
    corner = -np.atleast_2d(np.asarray(Qinv_bound, float))
    if corner.shape != (n, n):
        raise DimensionMismatch(f"Qinv_bound must be {n}x{n}")

    return _bmat([
        [t11, t21.T, t31.T, t41.T, r51.T],
        [t21, t22, t32.T, t42.T, r52.T],
        [t31, t32, t33, t43.T, r53.T],
        [t41, t42, t43, t44, r54.T],
        [r51, r52, r53, r54, corner],
    ])


def hessian_vertices(H0, bounds) -> list[np.ndarray]:
    """Vertex Hessians from per-entry bounds over a nominal matrix.

    bounds maps entry indices (i, j) to (lo, hi); each listed entry (and its
    mirror) takes both extremes, every combination yielding one vertex.
    Duplicate vertices from degenerate bounds are dropped. Empty bounds give
    the single nominal matrix.
    """
    H0 = np.atleast_2d(np.asarray(H0, float))
    items = sorted(bounds.items()) if bounds else []
    out: list[np.ndarray] = []
    seen = set()
    ranges = [(float(lo), float(hi)) for _, (lo, hi) in items]
    for combo in itertools.product(*ranges) if items else [()]:
        H = H0.copy()
        for ((i, j), _), val in zip(items, combo):
            H[i, j] = val
            H[j, i] = val
        key = H.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(H)
    return out


@dataclass
class LmiConstraint:
    """One affine symmetric-matrix constraint.

    sense "neg" requires build(vars) <= -margin*I, "pos" requires
    build(vars) >= margin*I.
    """

    name: str
    build: Callable[[dict], object]
    sense: str
    margin: float


@dataclass
class LmiInstance:
    """A feasibility problem over symmetric matrix variables."""

    variables: dict[str, int]
    constraints: list[LmiConstraint]
    data: dict = field(default_factory=dict)

    def check_affine(self, rtol: float = 1e-9, seed: int = 0) -> None:
        """Probe every constraint for affinity by superposition.

        Affine f satisfies f(a) + f(b) = f(a + b) + f(0); two random
        assignments are checked to the given relative tolerance.
        """
        rng = np.random.default_rng(seed)

        def draw():
            out = {}
            for name, d in self.variables.items():
                raw = rng.standard_normal((d, d))
                out[name] = 0.5 * (raw + raw.T)
            return out

        a, b = draw(), draw()
        ab = {k: a[k] + b[k] for k in a}
        zero = {k: np.zeros_like(v) for k, v in a.items()}
        for con in self.constraints:
            lhs = con.build(a) + con.build(b)
            rhs = con.build(ab) + con.build(zero)
            scale = max(1.0, float(np.abs(lhs).max()), float(np.abs(rhs).max()))
            if float(np.abs(lhs - rhs).max()) > rtol * scale:
                raise ValueError(f"constraint {con.name!r} is not affine in the variables")


def verify_witness(instance: LmiInstance, witness: dict) -> tuple[bool, dict[str, float]]:
    """Independent eigenvalue check of every constraint at a witness.

    Returns (all satisfied with at least half their margin, per-constraint
    achieved margins). The achieved margin of a "neg" constraint is
    -lambda_max, of a "pos" constraint lambda_min.
    """
    margins: dict[str, float] = {}
    ok = True
    for con in instance.constraints:
        M = np.asarray(con.build(witness), float)
        M = 0.5 * (M + M.T)
        eigs = np.linalg.eigvalsh(M)
        achieved = -float(eigs[-1]) if con.sense == "neg" else float(eigs[0])
        margins[con.name] = achieved
        if achieved < 0.5 * con.margin:
            ok = False
    return ok, margins


@dataclass
class Certificate:
    """Outcome of one certification call.

    Feasible certificates carry the verified witness matrices, the margin
    achieved by every constraint, and the alpha under which the corner
    surrogate succeeded. The validity radius is the state-space ball the
    Hessian bounds were taken over; it is reported, not derived.
    """

    verdict: str
    delta_M: float
    sigma: float
    eps: float
    alpha: float | None = None
    P: np.ndarray | None = None
    Q: np.ndarray | None = None
    Omega: np.ndarray | None = None
    margins: dict[str, float] = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    validity_radius: float | None = None

    @property
    def feasible(self) -> bool:
        return self.verdict == FEASIBLE

    def to_json(self, path) -> None:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        payload = {
            "verdict": self.verdict,
            "delta_M": self.delta_M,
            "sigma": self.sigma,
            "eps": self.eps,
            "alpha": self.alpha,
            "P": arr(self.P),
            "Q": arr(self.Q),
            "Omega": arr(self.Omega),
            "margins": self.margins,
            "info": self.info,
            "validity_radius": self.validity_radius,
        }
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "Certificate":
        with open(path, "r", encoding="ascii") as fh:
            payload = json.load(fh)

        def arr(x):
            return None if x is None else np.asarray(x, float)

        return cls(verdict=payload["verdict"], delta_M=payload["delta_M"],
                   sigma=payload["sigma"], eps=payload["eps"],
                   alpha=payload["alpha"], P=arr(payload["P"]),
                   Q=arr(payload["Q"]), Omega=arr(payload["Omega"]),
                   margins=payload["margins"], info=payload["info"],
                   validity_radius=payload["validity_radius"])


def polytopic_instance(A, A_d, A_e, Gcal, vertices, delta_M, sigma, alpha,
                       eps) -> LmiInstance:
    """Feasibility instance over the vertex set.

    alpha = None builds the exact route: the 4x4 form directly per vertex
    (affine in P, Q, Omega; interior Hessians covered by matrix convexity).
    A numeric alpha builds the Schur-surrogate route: the 5x5 form with
    corner -(1/alpha) I per vertex plus the soundness cap Q <= alpha*I.
    """
    n = np.atleast_2d(np.asarray(A)).shape[0]
    m = np.atleast_2d(np.asarray(Gcal)).shape[0]
    constraints = [
        LmiConstraint("P_pos", lambda v: v["P"], "pos", eps),
        LmiConstraint("Q_pos", lambda v: v["Q"], "pos", eps),
        LmiConstraint("Omega_pos", lambda v: v["Omega"], "pos", eps),
    ]
    if alpha is None:
        for j, Hj in enumerate(vertices):
            constraints.append(LmiConstraint(
                f"xi_vertex_{j}",
                lambda v, H=Hj: build_xi(A, A_d, A_e, Gcal, H, delta_M, sigma,
                                         v["P"], v["Q"], v["Omega"]),
                "neg", eps))
    else:
        alpha = float(alpha)
        Qinv_bound = (1.0 / alpha) * np.eye(n)
        # Soundness of the (1/alpha) corner surrogate needs Q capped by
        # alpha from above.
        constraints.append(
            LmiConstraint("Q_cap", lambda v, a=alpha: v["Q"] - a * np.eye(n),
                          "neg", 0.0))
        for j, Hj in enumerate(vertices):
            constraints.append(LmiConstraint(
                f"theta_vertex_{j}",
                lambda v, H=Hj: build_theta(A, A_d, A_e, Gcal, H, delta_M,
                                            sigma, v["P"], v["Q"], v["Omega"],
                                            Qinv_bound),
                "neg", eps))
    return LmiInstance(
        variables={"P": n, "Q": n, "Omega": m},
        constraints=constraints,
        data={"delta_M": float(delta_M), "sigma": float(sigma),
              "alpha": alpha, "eps": float(eps),
              "vertex_count": len(vertices)},
    )


def certify_polytopic(model: ClosedLoopModel, delta_M: float, sigma: float,
                      vertex_bounds=None, alpha=None,
                      eps: float | None = None,
                      engine: FeasibilityEngine | None = None,
                      validity_radius: float | None = None) -> Certificate:
    """Certify the loop over a Hessian polytope at one (delta_M, sigma).

    vertex_bounds gives per-entry Hessian ranges around the equilibrium
    Hessian (empty means the Hessian is taken constant). alpha selects the
    route: None (default) imposes the 4x4 form exactly per vertex; the
    string "sweep" tries the corner surrogate over DEFAULT_ALPHA_SWEEP and
    returns the first verified success; a number uses the surrogate with
    that single cap. Verdicts: feasible only after independent
    re-verification of the witness; infeasible only when every attempted
    route was proven infeasible; undecided otherwise.
    """
    if not model.constant_matrices:
        raise NonConstantMatrices(
            "polytopic certification needs constant loop matrices"
        )
    A, A_d, A_e, Gcal = model.A, model.A_d, model.A_e, model.Gcal
    eps = default_epsilon(A) if eps is None else float(eps)
    H0 = model.hessTotal(np.zeros(model.n))
    vertices = hessian_vertices(H0, vertex_bounds or {})
    engine = engine or CvxpyEngine()
    if alpha is None:
        alphas = (None,)
    elif isinstance(alpha, str):
        if alpha != "sweep":
            raise ValueError(f"alpha must be None, 'sweep' or a number, got {alpha!r}")
        alphas = DEFAULT_ALPHA_SWEEP
    else:
        alphas = (float(alpha),)

    attempts: dict[str, dict] = {}
    for a in alphas:
        inst = polytopic_instance(A, A_d, A_e, Gcal, vertices, delta_M, sigma,
                                  a, eps)
        inst.check_affine()
        res = engine.solve(inst)
        key = "exact" if a is None else f"{a:g}"
        attempts[key] = {"outcome": res.status,
                         "solver_status": res.info.get("solver_status"),
                         "slack": res.info.get("slack"),
                         "solve_time": res.info.get("solve_time")}
        if res.status == FEASIBLE:
            ok, margins = verify_witness(inst, res.witness)
            if not ok:
                attempts[key]["outcome"] = "verification_failed"
                continue
            if a is not None:
                # The surrogate's witness must also satisfy the 4x4 form at
                # each vertex (implied by soundness; recorded for consumers).
                for j, Hj in enumerate(vertices):
                    xi = build_xi(A, A_d, A_e, Gcal, Hj, delta_M, sigma,
                                  res.witness["P"], res.witness["Q"],
                                  res.witness["Omega"])
                    margins[f"xi_vertex_{j}"] = -float(np.linalg.eigvalsh(xi)[-1])
            info = dict(res.info)
            info["alpha_attempts"] = attempts
            return Certificate(FEASIBLE, float(delta_M), float(sigma), eps,
                               alpha=a, P=res.witness["P"], Q=res.witness["Q"],
                               Omega=res.witness["Omega"], margins=margins,
                               info=info, validity_radius=validity_radius)

    outcomes = {v["outcome"] for v in attempts.values()}
    verdict = INFEASIBLE if outcomes == {INFEASIBLE} else UNDECIDED
    return Certificate(verdict, float(delta_M), float(sigma), eps,
                       info={"alpha_attempts": attempts},
                       validity_radius=validity_radius)


def certify_linear(M, A, A_d, A_e, Gcal, delta_M: float, sigma: float,
                   eps: float | None = None,
                   engine: FeasibilityEngine | None = None) -> Certificate:
    """Certify a loop with quadratic energy 0.5 xi^T M xi (constant Hessian).

    One negative-definiteness constraint on the 4x4 form with the Hessian
    fixed to M, plus positivity of the certificate matrices; no corner
    surrogate is involved, so there is no alpha.
    """
    M = np.atleast_2d(np.asarray(M, float))
    scale = max(1.0, float(np.abs(M).max()))
    if float(np.abs(M - M.T).max()) > 1e-12 * scale:
        raise ValueError("M must be symmetric")
    if np.linalg.eigvalsh(M).min() <= 0:
        raise ValueError("M must be positive definite")
    A = np.atleast_2d(np.asarray(A, float))
    eps = default_epsilon(A) if eps is None else float(eps)
    n = A.shape[0]
    m = np.atleast_2d(np.asarray(Gcal, float)).shape[0]

    constraints = [
        LmiConstraint("P_pos", lambda v: v["P"], "pos", eps),
        LmiConstraint("Q_pos", lambda v: v["Q"], "pos", eps),
        LmiConstraint("Omega_pos", lambda v: v["Omega"], "pos", eps),
        LmiConstraint("xi_linear",
                      lambda v: build_xi(A, A_d, A_e, Gcal, M, delta_M, sigma,
                                         v["P"], v["Q"], v["Omega"]),
                      "neg", eps),
    ]
    inst = LmiInstance(variables={"P": n, "Q": n, "Omega": m},
                       constraints=constraints,
                       data={"delta_M": float(delta_M), "sigma": float(sigma),
                             "eps": float(eps), "linear": True})
    inst.check_affine()
    engine = engine or CvxpyEngine()
    res = engine.solve(inst)
    if res.status == FEASIBLE:
        ok, margins = verify_witness(inst, res.witness)
        if ok:
            return Certificate(FEASIBLE, float(delta_M), float(sigma), eps,
                               P=res.witness["P"], Q=res.witness["Q"],
                               Omega=res.witness["Omega"], margins=margins,
                               info=res.info)
        return Certificate(UNDECIDED, float(delta_M), float(sigma), eps,
                           info=dict(res.info, outcome="verification_failed"))
    return Certificate(INFEASIBLE if res.status == INFEASIBLE else UNDECIDED,
                       float(delta_M), float(sigma), eps, info=res.info)


def sigma_max(model: ClosedLoopModel, delta_M: float, tol: float = 0.01,
              sigma_hi: float = 10.0, vertex_bounds=None,
              alpha=None, eps: float | None = None,
              engine: FeasibilityEngine | None = None) -> float:
    """Largest certified-feasible trigger threshold at one delay bound.

    Bisection on [0, sigma_hi] down to width tol, certifying through the
    route selected by alpha (exact per-vertex form by default). Feasibility
    is monotone in sigma (a witness for some sigma also works for any
    smaller one); this is additionally spot-checked at three random interior
    points, and a violation raises SolverFailure. Raises NoFeasiblePoint
    when even sigma = 0 cannot be certified.
    """

    def feasible(s: float) -> bool:
        return certify_polytopic(model, delta_M, s, vertex_bounds,
                                 alpha=alpha, eps=eps, engine=engine).feasible

    if not feasible(0.0):
        raise NoFeasiblePoint(
            f"no certificate exists even at sigma = 0 for delta_M = {delta_M}"
        )
    if feasible(sigma_hi):
        lo = float(sigma_hi)
    else:
        lo, hi = 0.0, float(sigma_hi)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
    if lo > 0.0:
        rng = np.random.default_rng(20)
        for u in rng.uniform(0.05, 0.95, size=3):
            s = float(u * lo)
            if not feasible(s):
                raise SolverFailure(
                    f"feasibility is not monotone: sigma = {s:.6f} failed "
                    f"below the certified {lo:.6f}"
                )
    return lo
