"""Semidefinite feasibility engine.

The certifier hands over an instance (symmetric matrix variables plus a list
of affine matrix constraints, each required definite with a stated margin)
and gets back a verdict with a witness. The engine decides feasibility by
maximising a common slack t added to every margin: a nonnegative optimum
means the margins hold strictly, a negative optimum means even the shifted
system is infeasible. Any other outcome stays undecided; candidates are
re-verified outside the solver, so the engine never has the last word on
"feasible".
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

# Upper bound on the feasibility slack, only there to keep the LP in t
# bounded; any nonnegative value certifies.
SLACK_CAP = 1.0


@dataclass
class EngineResult:
    status: str  # "feasible" | "infeasible" | "undecided"
    witness: dict[str, np.ndarray] | None
    info: dict


class FeasibilityEngine(ABC):
    """Interface the certifier programs against.

    solve() receives an object exposing `variables` (name -> symmetric
    dimension) and `constraints` (objects with build(vars), sense, margin)
    and returns an EngineResult. Implementations must never report
    "feasible" without a witness.
    """

    @abstractmethod
    def solve(self, instance) -> "EngineResult":
        ...


class CvxpyEngine(FeasibilityEngine):
    """cvxpy-backed engine trying a fixed solver preference order.

    Solvers that error out or leave the problem undecided fall through to
    the next one; a definite verdict stops the chain.
    """

    def __init__(self, solver_order=("CLARABEL", "SCS", "CVXOPT")):
        self.solver_order = tuple(solver_order)

    def solve(self, instance) -> EngineResult:
        import cvxpy as cp

        variables = {
            name: cp.Variable((d, d), symmetric=True)
            for name, d in instance.variables.items()
        }
        t = cp.Variable()
        constraints = [t <= SLACK_CAP]
        for con in instance.constraints:
            expr = con.build(variables)
            eye = np.eye(expr.shape[0])
            if con.sense == "neg":
                constraints.append(expr << -(con.margin * eye) - t * eye)
            elif con.sense == "pos":
                constraints.append(expr >> con.margin * eye + t * eye)
            else:
                raise ValueError(f"unknown constraint sense {con.sense!r}")
        problem = cp.Problem(cp.Maximize(t), constraints)

        attempts: dict[str, str] = {}
        last_undecided: EngineResult | None = None
        for solver in self.solver_order:
            try:
                tick = time.perf_counter()
                problem.solve(solver=solver)
                elapsed = time.perf_counter() - tick
            except cp.error.SolverError as exc:
                attempts[solver] = f"error: {exc}"
                continue

            info = {
                "solver": solver,
                "solver_status": problem.status,
                "solve_time": elapsed,
                "attempts": dict(attempts),
            }
            stats = problem.solver_stats
            if stats is not None and stats.num_iters is not None:
                info["num_iters"] = int(stats.num_iters)
            slack = None if t.value is None else float(t.value)
            info["slack"] = slack

            if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and slack is not None:
                if slack >= 0.0:
                    witness = {
                        name: 0.5 * (np.asarray(v.value) + np.asarray(v.value).T)
                        for name, v in variables.items()
                    }
                    return EngineResult("feasible", witness, info)
                if problem.status == cp.OPTIMAL:
                    return EngineResult("infeasible", None, info)
            if problem.status == cp.INFEASIBLE:
                # Cannot happen while t is free below the cap, but a solver
                # that says so is reporting the shifted system infeasible.
                return EngineResult("infeasible", None, info)

            attempts[solver] = f"undecided: {problem.status}"
            last_undecided = EngineResult("undecided", None, info)

        if last_undecided is not None:
            return last_undecided
        return EngineResult("undecided", None,
                            {"solver_status": "no_solver_succeeded",
                             "attempts": attempts})
