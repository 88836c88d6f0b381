"""Solver backends behind a small common contract.

``MilpBackend`` hands the model to HiGHS through scipy and is the default.
``BranchBoundBackend`` is a self-contained exact fallback: LP relaxations
via scipy's simplex/IPM HiGHS interface, best-bound node selection, and
branching on the most fractional binary.  Both are deterministic run to
run; select one explicitly, or through the ``SOLVER_BACKEND`` environment
variable.

A result is ``optimal`` only when the incumbent and the proven bound agree
within the requested relative gap; ``time_limit`` results may still carry
an incumbent.
"""

from __future__ import annotations

import heapq
import math
import os
import time
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .models import MipModel

__all__ = [
    "SolveResult",
    "SolverBackend",
    "MilpBackend",
    "BranchBoundBackend",
    "get_backend",
    "BACKENDS",
]

INT_TOL = 1e-6


@dataclass
class SolveResult:
    status: str  # "optimal" | "feasible" | "infeasible" | "time_limit"
    objective: float | None
    values: np.ndarray | None
    bound: float | None
    wall_s: float

    @property
    def has_solution(self) -> bool:
        return self.values is not None


class SolverBackend(Protocol):
    def solve(
        self,
        model: MipModel,
        *,
        time_limit_s: float | None = None,
        rel_gap: float = 0.0,
        relax_integrality: bool = False,
    ) -> SolveResult:
        ...


def _assemble(model: MipModel):
    n = len(model.variables)
    lb = np.array([v.lb for v in model.variables], dtype=float)
    ub = np.array([v.ub for v in model.variables], dtype=float)
    integrality = np.array(
        [1 if v.kind == "binary" else 0 for v in model.variables], dtype=np.uint8
    )
    c = np.zeros(n)
    c[model.objective] = 1.0
    rows_i, cols_j, vals = [], [], []
    con_lb, con_ub = [], []
    for r_idx, row in enumerate(model.rows):
        for j, coef in row.coeffs:
            rows_i.append(r_idx)
            cols_j.append(j)
            vals.append(coef)
        if row.sense == "L":
            con_lb.append(-np.inf)
            con_ub.append(row.rhs)
        elif row.sense == "G":
            con_lb.append(row.rhs)
            con_ub.append(np.inf)
        else:
            con_lb.append(row.rhs)
            con_ub.append(row.rhs)
    a = sparse.csr_matrix(
        (vals, (rows_i, cols_j)), shape=(len(model.rows), n), dtype=float
    )
    return c, a, np.array(con_lb), np.array(con_ub), lb, ub, integrality


class MilpBackend:
    """HiGHS via :func:`scipy.optimize.milp`."""

    name = "milp"

    def solve(
        self,
        model: MipModel,
        *,
        time_limit_s: float | None = None,
        rel_gap: float = 0.0,
        relax_integrality: bool = False,
    ) -> SolveResult:
        start = time.perf_counter()
        c, a, con_lb, con_ub, lb, ub, integrality = _assemble(model)
        if relax_integrality:
            integrality = np.zeros_like(integrality)
        constraints = (
            LinearConstraint(a, con_lb, con_ub) if model.rows else None
        )
        options: dict = {"presolve": True}
        if time_limit_s is not None:
            options["time_limit"] = max(float(time_limit_s), 0.01)
        if rel_gap:
            options["mip_rel_gap"] = float(rel_gap)
        res = milp(
            c,
            constraints=constraints,
            bounds=Bounds(lb, ub),
            integrality=integrality,
            options=options,
        )
        wall = time.perf_counter() - start
        if res.status == 2:
            return SolveResult("infeasible", None, None, None, wall)
        if res.status == 1:  # hit a limit
            if res.x is not None:
                bound = getattr(res, "mip_dual_bound", None)
                return SolveResult("time_limit", float(res.fun), res.x, bound, wall)
            return SolveResult("time_limit", None, None, None, wall)
        if res.status != 0 or res.x is None:
            raise RuntimeError(f"solver failure: {res.message}")
        bound = getattr(res, "mip_dual_bound", None)
        if bound is None or integrality.sum() == 0:
            bound = float(res.fun)
        return SolveResult("optimal", float(res.fun), res.x, float(bound), wall)


class BranchBoundBackend:
    """Bundled exact solver: LP-based branch and bound.

    Open nodes are explored best-bound first; branching fixes the most
    fractional binary to 0 and 1.  Intended for desk-scale models and as a
    reference oracle for other backends.
    """

    name = "bnb"

    def __init__(self, node_limit: int = 200_000):
        self.node_limit = node_limit

    def _lp(self, c, a_ub, b_ub, a_eq, b_eq, lb, ub):
        bounds = np.column_stack([lb, ub])
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=b_ub,
            A_eq=a_eq,
            b_eq=b_eq,
            bounds=bounds,
            method="highs",
        )
        if res.status == 2:
            return None
        if res.status != 0:
            raise RuntimeError(f"LP failure: {res.message}")
        return res

    def solve(
        self,
        model: MipModel,
        *,
        time_limit_s: float | None = None,
        rel_gap: float = 0.0,
        relax_integrality: bool = False,
    ) -> SolveResult:
        start = time.perf_counter()
        deadline = None if time_limit_s is None else start + time_limit_s
        c, a, con_lb, con_ub, lb0, ub0, integrality = _assemble(model)

        finite_ub = np.isfinite(con_ub)
        finite_lb = np.isfinite(con_lb)
        eq_mask = finite_lb & finite_ub
        le_mask = finite_ub & ~eq_mask
        ge_mask = finite_lb & ~eq_mask
        a_ub_parts, b_ub_parts = [], []
        if le_mask.any():
            a_ub_parts.append(a[le_mask])
            b_ub_parts.append(con_ub[le_mask])
        if ge_mask.any():
            a_ub_parts.append(-a[ge_mask])
            b_ub_parts.append(-con_lb[ge_mask])
        a_ub = sparse.vstack(a_ub_parts).tocsr() if a_ub_parts else None
        b_ub = np.concatenate(b_ub_parts) if b_ub_parts else None
        a_eq = a[eq_mask].tocsr() if eq_mask.any() else None
        b_eq = con_ub[eq_mask] if eq_mask.any() else None

        frac_mask = integrality.astype(bool)
        if relax_integrality:
            frac_mask = np.zeros_like(frac_mask)

        root = self._lp(c, a_ub, b_ub, a_eq, b_eq, lb0, ub0)
        wall = lambda: time.perf_counter() - start
        if root is None:
            return SolveResult("infeasible", None, None, None, wall())
        if relax_integrality or not frac_mask.any():
            return SolveResult(
                "optimal", float(root.fun), root.x, float(root.fun), wall()
            )

        counter = 0
        heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
        heapq.heappush(heap, (float(root.fun), counter, root.x, lb0, ub0))
        incumbent_x = None
        incumbent_obj = math.inf
        nodes = 0

        def gap_closed() -> bool:
            if incumbent_x is None:
                return False
            best_bound = heap[0][0] if heap else incumbent_obj
            return (incumbent_obj - best_bound) <= rel_gap * max(
                1.0, abs(incumbent_obj)
            ) + 1e-9

        def global_bound() -> float:
            # open-node bounds can only exceed the incumbent after pruning
            if heap:
                return min(incumbent_obj, heap[0][0])
            return incumbent_obj

        while heap:
            if gap_closed():
                break
            if deadline is not None and time.perf_counter() > deadline:
                bound = heap[0][0] if heap else incumbent_obj
                if incumbent_x is not None:
                    return SolveResult(
                        "time_limit", incumbent_obj, incumbent_x, bound, wall()
                    )
                return SolveResult("time_limit", None, None, bound, wall())
            node_bound, _, x, lb, ub = heapq.heappop(heap)
            if node_bound >= incumbent_obj - 1e-9:
                continue
            frac = np.abs(x - np.round(x))
            frac[~frac_mask] = 0.0
            j = int(np.argmax(frac))
            if frac[j] <= INT_TOL:
                # integral: candidate incumbent
                if node_bound < incumbent_obj:
                    incumbent_obj = float(node_bound)
                    incumbent_x = x
                continue
            nodes += 1
            if nodes > self.node_limit:
                raise RuntimeError("branch-and-bound node limit exceeded")
            for fix in (0.0, 1.0):
                lb2, ub2 = lb.copy(), ub.copy()
                if fix == 0.0:
                    ub2[j] = 0.0
                else:
                    lb2[j] = 1.0
                res = self._lp(c, a_ub, b_ub, a_eq, b_eq, lb2, ub2)
                if res is None:
                    continue
                if res.fun >= incumbent_obj - 1e-9:
                    continue
                counter += 1
                heapq.heappush(heap, (float(res.fun), counter, res.x, lb2, ub2))

        if incumbent_x is None:
            return SolveResult("infeasible", None, None, None, wall())
        return SolveResult(
            "optimal", incumbent_obj, incumbent_x, float(global_bound()), wall()
        )


BACKENDS = {"milp": MilpBackend, "bnb": BranchBoundBackend}


def get_backend(name: str | None = None) -> SolverBackend:
    """Instantiate a backend by name, env var ``SOLVER_BACKEND``, or default."""
    if name is None:
        name = os.environ.get("SOLVER_BACKEND", "milp")
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(
            f"unknown solver backend {name!r}; known: {sorted(BACKENDS)}"
        ) from None
