"""Solver backend registry.

An adapter is any object with ``solve_lp(model, options)`` and
``solve_milp(model, options)`` returning :class:`SolveOutcome`.  Adapters
are wrapped so that every ``Optimal`` answer is re-checked against the
model rows before it reaches the caller.
"""
from __future__ import annotations

import os
import time

import numpy as np
import scipy.sparse as sp

from . import embedded
from .embedded import SolverOptions
from .model import EQ, GE, LE, LinearModel, SolveOutcome, Status

DEFAULT_BACKEND = "embedded"
ENV_VAR = "WINDCAP_SOLVER"


class BackendError(ValueError):
    pass


class ContractViolation(RuntimeError):
    """A backend reported Optimal for a point that does not satisfy the model."""


class EmbeddedBackend:
    name = "embedded"

    def solve_lp(self, model, options=None):
        return embedded.solve_lp(model, options)

    def solve_milp(self, model, options=None):
        return embedded.solve_milp(model, options)


class HighsBackend:
    """HiGHS through scipy.optimize (``linprog`` / ``milp``)."""

    name = "highs"

    @staticmethod
    def _split(model: LinearModel):
        A = model.matrix()
        rel = np.asarray(model.relation)
        rhs = np.asarray(model.rhs, float)
        le, ge, eq = rel == LE, rel == GE, rel == EQ
        A_ub = sp.vstack([A[le], -A[ge]], format="csr")
        b_ub = np.concatenate([rhs[le], -rhs[ge]])
        order_ub = np.concatenate([np.nonzero(le)[0], np.nonzero(ge)[0]])
        return A_ub, b_ub, order_ub, A[eq], rhs[eq], np.nonzero(eq)[0]

    def solve_lp(self, model, options=None):
        from scipy.optimize import linprog

        t0 = time.perf_counter()
        sign = 1.0 if model.sense == "min" else -1.0
        A_ub, b_ub, o_ub, A_eq, b_eq, o_eq = self._split(model)
        lb, ub = model.bounds()
        res = linprog(sign * model.objective_vector(),
                      A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                      A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                      bounds=np.column_stack([lb, ub]), method="highs")
        stats = {"time": time.perf_counter() - t0, "backend": self.name,
                 "iterations": int(getattr(res, "nit", 0))}
        if res.status == 2:
            return SolveOutcome(Status.INFEASIBLE, stats=stats)
        if res.status == 3:
            return SolveOutcome(Status.UNBOUNDED, stats=stats)
        if res.status != 0:
            return SolveOutcome(Status.ITERATION_LIMIT, stats=stats)
        duals = np.zeros(model.num_rows)
        if o_ub.size:
            duals[o_ub] = -res.ineqlin.marginals
        if o_eq.size:
            duals[o_eq] = -res.eqlin.marginals
        return SolveOutcome(Status.OPTIMAL, objective_value=sign * res.fun, primal=res.x,
                            duals=duals, stats=stats)

    def solve_milp(self, model, options=None):
        from scipy.optimize import Bounds, LinearConstraint, milp

        options = options or SolverOptions()
        t0 = time.perf_counter()
        sign = 1.0 if model.sense == "min" else -1.0
        A = model.matrix()
        rel = np.asarray(model.relation)
        rhs = np.asarray(model.rhs, float)
        lo = np.where(rel == LE, -np.inf, rhs)
        hi = np.where(rel == GE, np.inf, rhs)
        lb, ub = model.bounds()
        cons = [LinearConstraint(A, lo, hi)] if model.num_rows else []
        opts = {"mip_rel_gap": options.gap, "disp": False}
        if options.time_limit:
            opts["time_limit"] = options.time_limit
        res = milp(sign * model.objective_vector(), constraints=cons,
                   integrality=model.integer_mask().astype(int), bounds=Bounds(lb, ub),
                   options=opts)
        stats = {"time": time.perf_counter() - t0, "backend": self.name,
                 "nodes": int(getattr(res, "mip_node_count", 0) or 0)}
        if res.status == 2:
            return SolveOutcome(Status.INFEASIBLE, stats=stats)
        if res.status == 3:
            return SolveOutcome(Status.UNBOUNDED, stats=stats)
        if res.x is None:
            return SolveOutcome(Status.ITERATION_LIMIT, stats=stats)
        x = res.x.copy()
        ints = model.integer_mask()
        x[ints] = np.round(x[ints])
        bound = getattr(res, "mip_dual_bound", None)
        gap = getattr(res, "mip_gap", None)
        status = Status.OPTIMAL if res.status == 0 else Status.ITERATION_LIMIT
        return SolveOutcome(status, objective_value=sign * res.fun, primal=x,
                            gap=0.0 if gap is None else float(gap),
                            bound=None if bound is None else sign * float(bound), stats=stats)


class ValidatedBackend:
    """Re-checks row/bound feasibility and integrality of Optimal answers."""

    def __init__(self, name: str, adapter, check_tol: float = 1e-7, int_tol: float = 1e-6):
        self.name = name
        self.adapter = adapter
        self.check_tol = check_tol
        self.int_tol = int_tol

    def _check(self, model: LinearModel, out: SolveOutcome, milp: bool) -> SolveOutcome:
        if out.status != Status.OPTIMAL:
            return out
        x = out.primal
        if x is None or len(x) != model.num_vars:
            raise ContractViolation(f"backend {self.name!r}: primal has wrong length")
        scale = max(1.0, float(np.max(np.abs(model.rhs), initial=0.0)) * 1e-3)
        viol = model.max_violation(x)
        if viol > self.check_tol * scale:
            raise ContractViolation(
                f"backend {self.name!r} returned Optimal with row violation {viol:.3g}")
        if milp and model.binary:
            xi = x[sorted(model.binary)]
            if np.max(np.abs(xi - np.round(xi))) > self.int_tol:
                raise ContractViolation(f"backend {self.name!r}: binary variable not integral")
        return out

    def solve_lp(self, model, options=None) -> SolveOutcome:
        return self._check(model, self.adapter.solve_lp(model, options), milp=False)

    def solve_milp(self, model, options=None) -> SolveOutcome:
        return self._check(model, self.adapter.solve_milp(model, options), milp=True)


_REGISTRY: dict[str, object] = {}


def backend_register(name: str, adapter) -> None:
    if name in _REGISTRY:
        raise BackendError(f"solver backend {name!r} is already registered")
    for attr in ("solve_lp", "solve_milp"):
        if not callable(getattr(adapter, attr, None)):
            raise BackendError(f"adapter for {name!r} lacks {attr}()")
    _REGISTRY[name] = adapter


def backend_unregister(name: str) -> None:
    _REGISTRY.pop(name, None)


def available_backends() -> list[str]:
    return sorted(_REGISTRY)


def get_backend(name: str | None = None) -> ValidatedBackend:
    name = name or os.environ.get(ENV_VAR) or DEFAULT_BACKEND
    try:
        adapter = _REGISTRY[name]
    except KeyError:
        raise BackendError(
            f"unknown solver backend {name!r}; registered: {', '.join(available_backends())}"
        ) from None
    return ValidatedBackend(name, adapter)


backend_register("embedded", EmbeddedBackend())
backend_register("highs", HighsBackend())
