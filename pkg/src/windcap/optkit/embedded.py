"""Embedded LP and branch-and-bound MILP solvers."""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .model import LinearModel, SolveOutcome, Status
from .simplex import LPEngine, SimplexOptions, row_duals

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    """Knobs shared by every backend (backends ignore what they cannot use)."""

    gap: float = 1e-6
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    pivot_tol: float = 1e-10
    max_iter: int | None = None
    node_limit: int = 200_000
    time_limit: float | None = None
    refactor_every: int = 50
    extra: dict = field(default_factory=dict)

    def simplex(self) -> SimplexOptions:
        return SimplexOptions(feas_tol=self.feas_tol, pivot_tol=self.pivot_tol,
                              max_iter=self.max_iter, refactor_every=self.refactor_every)


def _sense_sign(model: LinearModel) -> float:
    return 1.0 if model.sense == "min" else -1.0


def solve_lp(model: LinearModel, options: SolverOptions | None = None) -> SolveOutcome:
    options = options or SolverOptions()
    t0 = time.perf_counter()
    eng = LPEngine(model, options.simplex())
    res = eng.solve()
    stats = {"iterations": res.iterations, "time": time.perf_counter() - t0,
             "backend": "embedded"}
    if res.status != Status.OPTIMAL:
        return SolveOutcome(res.status, stats=stats)
    obj = _sense_sign(model) * res.objective
    return SolveOutcome(Status.OPTIMAL, objective_value=obj, primal=res.x,
                        duals=row_duals(eng, res), stats=stats)


class _Node:
    __slots__ = ("bound", "depth", "lb", "ub", "state")

    def __init__(self, bound, depth, lb, ub, state):
        self.bound, self.depth, self.lb, self.ub, self.state = bound, depth, lb, ub, state


def solve_milp(model: LinearModel, options: SolverOptions | None = None) -> SolveOutcome:
    """Branch-and-bound over binary variables.

    Depth-first plunge until the first incumbent, best-bound afterwards;
    branching on the most fractional binary with ties to the lowest index.
    The gap is measured as ``(incumbent - bound) / max(1, |incumbent|)``.
    """
    options = options or SolverOptions()
    t0 = time.perf_counter()
    sign = _sense_sign(model)
    eng = LPEngine(model, options.simplex())
    ints = np.array(sorted(model.binary), dtype=int)
    lp_iters = 0

    def relax(lb, ub, warm):
        nonlocal lp_iters
        res = eng.solve(lb, ub, warm)
        lp_iters += res.iterations
        if res.status == Status.ITERATION_LIMIT and warm is not None:
            res = eng.solve(lb, ub, None)
            lp_iters += res.iterations
        return res

    def stats(nodes):
        return {"nodes": nodes, "iterations": lp_iters,
                "time": time.perf_counter() - t0, "backend": "embedded"}

    root = relax(eng.lb0.copy(), eng.ub0.copy(), None)
    if root.status != Status.OPTIMAL:
        return SolveOutcome(root.status, stats=stats(1))

    inc_x: np.ndarray | None = None
    inc_obj = math.inf
    seq = itertools.count()
    heap: list = []
    lost_bound = math.inf
    nodes = 1
    limit_hit = False

    def cutoff():
        if not math.isfinite(inc_obj):
            return math.inf
        return inc_obj - options.gap * max(1.0, abs(inc_obj))

    def fractional(x):
        if ints.size == 0:
            return -1
        f = x[ints] - np.floor(x[ints])
        dist = np.minimum(f, 1.0 - f)
        frac = dist > options.int_tol
        if not frac.any():
            return -1
        # most fractional; argmax returns the first (lowest index) on ties
        score = np.where(frac, dist, -1.0)
        return int(ints[int(np.argmax(score))])

    def polish(lb, ub, x, state):
        lb, ub = lb.copy(), ub.copy()
        r = np.round(x[ints])
        lb[ints] = r
        ub[ints] = r
        res = relax(lb, ub, state)
        if res.status == Status.OPTIMAL:
            return res.x, res.objective
        return None, math.inf

    # plunge stack entries are processed before the heap while no incumbent
    current = (_Node(root.objective, 0, eng.lb0.copy(), eng.ub0.copy(), root.state), root)
    while True:
        if current is None:
            # best-bound selection
            while heap:
                bound, _, node = heapq.heappop(heap)
                if bound < cutoff():
                    break
            else:
                break
            res = relax(node.lb, node.ub, node.state)
            nodes += 1
            current = (node, res)
        node, res = current
        current = None
        if res.status == Status.ITERATION_LIMIT:
            lost_bound = min(lost_bound, node.bound)
            limit_hit = True
            continue
        if res.status != Status.OPTIMAL:
            continue
        if res.objective >= cutoff():
            continue
        j = fractional(res.x)
        if j < 0:
            x_p, obj_p = polish(node.lb, node.ub, res.x, res.state)
            if x_p is not None and obj_p < inc_obj:
                inc_x, inc_obj = x_p, obj_p
                log.debug("incumbent %.10g at node %d", sign * inc_obj, nodes)
            continue
        if nodes >= options.node_limit or (
                options.time_limit is not None and time.perf_counter() - t0 > options.time_limit):
            lost_bound = min(lost_bound, res.objective)
            limit_hit = True
            break
        children = []
        for val in (0.0, 1.0):
            lb, ub = node.lb.copy(), node.ub.copy()
            lb[j] = ub[j] = val
            children.append(_Node(res.objective, node.depth + 1, lb, ub, res.state))
        if inc_x is None:
            # plunge toward the nearer integer, queue the sibling
            first = 1 if res.x[j] >= 0.5 else 0
            sib = children[1 - first]
            heapq.heappush(heap, (sib.bound, next(seq), sib))
            child = children[first]
            cres = relax(child.lb, child.ub, child.state)
            nodes += 1
            current = (child, cres)
        else:
            for ch in children:
                heapq.heappush(heap, (ch.bound, next(seq), ch))

    open_bound = min([b for b, _, _ in heap] + [lost_bound])
    best_bound = min(open_bound, inc_obj)
    if inc_x is None:
        if limit_hit:
            return SolveOutcome(Status.ITERATION_LIMIT, bound=sign * best_bound, stats=stats(nodes))
        return SolveOutcome(Status.INFEASIBLE, stats=stats(nodes))
    gap = max(0.0, inc_obj - best_bound) / max(1.0, abs(inc_obj))
    status = Status.OPTIMAL if gap <= options.gap else Status.ITERATION_LIMIT
    x = inc_x.copy()
    x[ints] = np.round(x[ints])
    return SolveOutcome(status, objective_value=sign * inc_obj, primal=x, gap=gap,
                        bound=sign * best_bound, stats=stats(nodes))
