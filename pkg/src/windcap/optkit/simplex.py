"""Bounded-variable revised simplex (primal and dual) on sparse LU factors.

The engine works on ``A x + s = b`` with one slack per row and one
artificial per row (used only during phase 1).  The basis inverse is kept
as a sparse LU of the last refactorized basis plus a product-form eta file.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import EQ, GE, LE, LinearModel, Status

log = logging.getLogger(__name__)

BASIC, AT_LB, AT_UB, FREE = 0, 1, 2, 3


class NumericalError(RuntimeError):
    pass


@dataclass
class SimplexOptions:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-10
    max_iter: int | None = None
    refactor_every: int = 50
    # consecutive degenerate pivots before switching to Bland's rule;
    # None means 10 * number of variables
    bland_after: int | None = None
    presolve: bool = True


@dataclass
class BasisState:
    basis: np.ndarray
    status: np.ndarray
    sigma: np.ndarray


@dataclass
class EngineResult:
    status: Status
    x: np.ndarray | None = None
    objective: float = math.nan
    y: np.ndarray | None = None
    d: np.ndarray | None = None
    state: BasisState | None = None
    iterations: int = 0


class _Factor:
    """LU of a basis matrix with product-form updates."""

    def __init__(self, B: sp.csc_matrix):
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise NumericalError(str(exc)) from exc
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, rhs: np.ndarray) -> np.ndarray:
        v = self.lu.solve(rhs)
        for r, col in self.etas:
            vr = v[r] / col[r]
            v -= col * vr
            v[r] = vr
        return v

    def btran(self, rhs: np.ndarray) -> np.ndarray:
        v = np.array(rhs, dtype=float)
        for r, col in reversed(self.etas):
            v[r] = (v[r] - (col @ v - col[r] * v[r])) / col[r]
        return self.lu.solve(v, trans="T")

    def update(self, r: int, col: np.ndarray) -> None:
        self.etas.append((r, col.copy()))


class LPEngine:
    """Reusable simplex engine for one constraint matrix.

    Variable bounds may be changed between calls to :meth:`solve`, which
    is what branch-and-bound relies on: a previous optimal basis stays dual
    feasible and is re-optimized with the dual simplex.
    """

    def __init__(self, model: LinearModel, options: SimplexOptions | None = None):
        self.opt = options or SimplexOptions()
        model.validate()
        self.model = model
        self.n = model.num_vars
        sign = 1.0 if model.sense == "min" else -1.0
        self.c_struct = sign * model.objective_vector()
        lb, ub = model.bounds()
        self.lb0, self.ub0 = lb.copy(), ub.copy()
        self.presolve_infeasible = False
        # row i of the model -> kept row index or -1
        self.row_map = np.full(model.num_rows, -1, dtype=int)
        # (row, coef) that produced each tightened structural bound
        self.lb_src: dict[int, tuple[int, float]] = {}
        self.ub_src: dict[int, tuple[int, float]] = {}

        A = model.matrix()
        rel = list(model.relation)
        rhs = np.asarray(model.rhs, float)
        keep = []
        nnz = np.diff(A.indptr)
        for i in range(model.num_rows):
            if self.opt.presolve and nnz[i] <= 1:
                self._absorb_row(i, A, rel[i], rhs[i])
            else:
                keep.append(i)
        keep = np.asarray(keep, dtype=int)
        self.row_map[keep] = np.arange(keep.size)
        self.kept = keep
        self.A = A[keep].tocsc() if keep.size else sp.csc_matrix((0, self.n))
        self.A_csr = self.A.tocsr()
        self.b = rhs[keep]
        self.rel = [rel[i] for i in keep]
        self.m = keep.size
        m, n = self.m, self.n
        self.N = n + 2 * m
        slo = np.array([0.0 if r in (LE, EQ) else -np.inf for r in self.rel])
        shi = np.array([np.inf if r == LE else 0.0 for r in self.rel])
        self.slack_lb, self.slack_ub = slo, shi
        self.sigma = np.ones(m)
        self.c = np.concatenate([self.c_struct, np.zeros(2 * m)])
        self._build_full()
        self.bland_after = (self.opt.bland_after if self.opt.bland_after is not None
                            else 10 * max(self.n, 1))

    # -- presolve ---------------------------------------------------------
    def _absorb_row(self, i: int, A, rel: str, rhs: float) -> None:
        tol = self.opt.feas_tol
        start, end = A.indptr[i], A.indptr[i + 1]
        if end == start:
            ok = ((rel == LE and rhs >= -tol) or (rel == GE and rhs <= tol)
                  or (rel == EQ and abs(rhs) <= tol))
            if not ok:
                self.presolve_infeasible = True
            return
        j, a = int(A.indices[start]), float(A.data[start])
        val = rhs / a
        if rel == EQ:
            lo_new = hi_new = val
        elif (rel == LE) == (a > 0):
            lo_new, hi_new = -np.inf, val
        else:
            lo_new, hi_new = val, np.inf
        if lo_new >= self.lb0[j]:
            self.lb0[j] = lo_new
            self.lb_src[j] = (i, a)
        if hi_new <= self.ub0[j]:
            self.ub0[j] = hi_new
            self.ub_src[j] = (i, a)
        if self.lb0[j] > self.ub0[j] + tol:
            self.presolve_infeasible = True
        elif self.lb0[j] > self.ub0[j]:
            self.ub0[j] = self.lb0[j]

    def _build_full(self) -> None:
        m = self.m
        eye = sp.identity(m, format="csc")
        self.A_full = sp.hstack([self.A, eye, sp.diags(self.sigma, format="csc")],
                                format="csc")

    def _column(self, q: int) -> np.ndarray:
        col = np.zeros(self.m)
        n, m = self.n, self.m
        if q < n:
            s, e = self.A.indptr[q], self.A.indptr[q + 1]
            col[self.A.indices[s:e]] = self.A.data[s:e]
        elif q < n + m:
            col[q - n] = 1.0
        else:
            col[q - n - m] = self.sigma[q - n - m]
        return col

    def _At_y(self, y: np.ndarray) -> np.ndarray:
        out = np.empty(self.N)
        n, m = self.n, self.m
        out[:n] = self.A_csr.T @ y
        out[n:n + m] = y
        out[n + m:] = self.sigma * y
        return out

    # -- state helpers ----------------------------------------------------
    def _refactor(self) -> None:
        B = self.A_full[:, self.basis]
        self.factor = _Factor(sp.csc_matrix(B))
        self.since_refactor = 0
        self._recompute_xb()

    def _recompute_xb(self) -> None:
        xn = self.x.copy()
        xn[self.basis] = 0.0
        rhs = self.b - self.A_full @ xn
        self.x[self.basis] = self.factor.ftran(rhs)

    def _place_nonbasic(self, j: int) -> None:
        lo, hi = self.L[j], self.U[j]
        st = self.status[j]
        if st == AT_UB and np.isfinite(hi):
            self.x[j] = hi
        elif np.isfinite(lo) and st != AT_UB:
            self.status[j], self.x[j] = AT_LB, lo
        elif np.isfinite(hi):
            self.status[j], self.x[j] = AT_UB, hi
        elif np.isfinite(lo):
            self.status[j], self.x[j] = AT_LB, lo
        else:
            self.status[j], self.x[j] = FREE, 0.0

    def _set_bounds(self, lb: np.ndarray, ub: np.ndarray) -> None:
        self.L = np.concatenate([lb, self.slack_lb, np.zeros(self.m)])
        self.U = np.concatenate([ub, self.slack_ub, np.zeros(self.m)])

    # -- public -----------------------------------------------------------
    def solve(self, lb: np.ndarray | None = None, ub: np.ndarray | None = None,
              warm: BasisState | None = None, max_iter: int | None = None) -> EngineResult:
        lb = self.lb0 if lb is None else np.maximum(lb, self.lb0)
        ub = self.ub0 if ub is None else np.minimum(ub, self.ub0)
        if self.presolve_infeasible or np.any(lb > ub + self.opt.feas_tol):
            return EngineResult(Status.INFEASIBLE)
        ub = np.maximum(ub, lb)
        limit = max_iter or self.opt.max_iter or (20 * (self.m + self.n) + 5000)
        self.iters = 0
        self.limit = limit
        if self.m == 0:
            return self._solve_bounds_only(lb, ub)
        if warm is not None:
            try:
                res = self._warm(lb, ub, warm)
                if res is not None:
                    return res
            except NumericalError:
                log.debug("warm start failed numerically; cold start")
        try:
            return self._cold(lb, ub)
        except NumericalError:
            if self.opt.refactor_every > 1:
                log.debug("retrying cold start with refactor every pivot")
                saved = self.opt.refactor_every
                self.opt.refactor_every = 1
                try:
                    return self._cold(lb, ub)
                finally:
                    self.opt.refactor_every = saved
            raise

    def _solve_bounds_only(self, lb, ub) -> EngineResult:
        c = self.c_struct
        x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb,
                                                               np.where(np.isfinite(ub), ub, 0.0))))
        if not np.all(np.isfinite(x)):
            return EngineResult(Status.UNBOUNDED)
        return EngineResult(Status.OPTIMAL, x=x, objective=float(c @ x),
                            y=np.zeros(0), d=c.copy(), iterations=0)

    def _cold(self, lb, ub) -> EngineResult:
        n, m = self.n, self.m
        self._set_bounds(lb, ub)
        self.x = np.zeros(self.N)
        self.status = np.full(self.N, AT_LB, dtype=np.int8)
        for j in range(n):
            self._place_nonbasic(j)
        r = self.b - self.A @ self.x[:n]
        tol = self.opt.feas_tol
        basis = np.empty(m, dtype=int)
        sigma = np.ones(m)
        use_art = np.zeros(m, bool)
        for i in range(m):
            s_lo, s_hi = self.slack_lb[i], self.slack_ub[i]
            if s_lo - tol <= r[i] <= s_hi + tol and self.rel[i] != EQ:
                basis[i] = n + i
                self.x[n + i] = r[i]
            else:
                sval = min(max(r[i], s_lo), s_hi)
                self.x[n + i] = sval
                self.status[n + i] = AT_LB if sval == s_lo else AT_UB
                resid = r[i] - sval
                sigma[i] = 1.0 if resid >= 0 else -1.0
                use_art[i] = True
                basis[i] = n + m + i
                self.x[n + m + i] = abs(resid)
        self.sigma = sigma
        self._build_full()
        self.basis = basis
        self.status[basis] = BASIC
        self.U[n + m:][use_art] = np.inf
        art_cols = n + m + np.nonzero(use_art)[0]
        self.status[n + m:][~use_art] = AT_LB
        self._refactor()

        if use_art.any():
            c1 = np.zeros(self.N)
            c1[art_cols] = 1.0
            st = self._primal(c1)
            if st == Status.ITERATION_LIMIT:
                return EngineResult(Status.ITERATION_LIMIT, iterations=self.iters)
            infeas = self.x[art_cols].sum()
            if infeas > tol * max(1.0, math.sqrt(m)):
                return EngineResult(Status.INFEASIBLE, iterations=self.iters)
            self.U[n + m:] = 0.0
            self.L[n + m:] = 0.0
            arts = np.arange(n + m, self.N)
            nb_art = arts[self.status[arts] != BASIC]
            self.x[nb_art] = 0.0
            self.status[nb_art] = AT_LB
            self._recompute_xb()
        st = self._primal(self.c)
        return self._finish(st)

    def _warm(self, lb, ub, warm: BasisState) -> EngineResult | None:
        m = self.m
        if warm.basis.size != m:
            return None
        self._set_bounds(lb, ub)
        self.sigma = warm.sigma.copy()
        self._build_full()
        self.basis = warm.basis.copy()
        self.status = warm.status.copy()
        self.x = np.zeros(self.N)
        for j in np.nonzero(self.status != BASIC)[0]:
            self._place_nonbasic(j)
        self._refactor()
        st = self._dual(self.c)
        if st == Status.INFEASIBLE:
            return EngineResult(Status.INFEASIBLE, iterations=self.iters)
        if st != Status.OPTIMAL:
            return EngineResult(st, iterations=self.iters) if st == Status.ITERATION_LIMIT else None
        st = self._primal(self.c)
        return self._finish(st)

    def _finish(self, st: Status) -> EngineResult:
        if st != Status.OPTIMAL:
            return EngineResult(st, iterations=self.iters)
        self._refactor()
        y = self.factor.btran(self.c[self.basis])
        d = self.c - self._At_y(y)
        x = self.x[:self.n].copy()
        # snap nonbasic structurals exactly onto bounds
        state = BasisState(self.basis.copy(), self.status.copy(), self.sigma.copy())
        return EngineResult(Status.OPTIMAL, x=x, objective=float(self.c_struct @ x),
                            y=y, d=d, state=state, iterations=self.iters)

    # -- primal simplex ---------------------------------------------------
    def _primal(self, c: np.ndarray) -> Status:
        opt = self.opt
        degenerate = 0
        while True:
            if self.iters >= self.limit:
                return Status.ITERATION_LIMIT
            if self.since_refactor >= opt.refactor_every:
                self._refactor()
            y = self.factor.btran(c[self.basis])
            d = c - self._At_y(y)
            st = self.status
            movable = (st != BASIC) & (self.L < self.U)
            score = np.where(movable & (st == AT_LB) & (d < -opt.opt_tol), -d, 0.0)
            score = np.where(movable & (st == AT_UB) & (d > opt.opt_tol), d, score)
            score = np.where(movable & (st == FREE) & (np.abs(d) > opt.opt_tol), np.abs(d), score)
            cand = np.nonzero(score > 0)[0]
            if cand.size == 0:
                return Status.OPTIMAL
            bland = degenerate > self.bland_after
            q = int(cand[0]) if bland else int(cand[np.argmax(score[cand])])
            direction = 1.0 if d[q] < 0 else -1.0
            col = self.factor.ftran(self._column(q))
            delta = direction * col
            r, theta = self._ratio(delta, bland)
            span = self.U[q] - self.L[q]
            self.iters += 1
            if r < 0 and not np.isfinite(span):
                return Status.UNBOUNDED
            if r < 0 or span <= theta:
                # bound flip
                self.x[q] = self.U[q] if direction > 0 else self.L[q]
                self.status[q] = AT_UB if direction > 0 else AT_LB
                self.x[self.basis] -= span * delta
                degenerate = 0
                continue
            self.x[q] += direction * theta
            self.x[self.basis] -= theta * delta
            self._pivot(r, q, col, leave_to_lb=delta[r] > 0)
            degenerate = degenerate + 1 if theta <= 1e-12 else 0

    def _ratio(self, delta: np.ndarray, bland: bool) -> tuple[int, float]:
        """Two-pass (Harris) ratio test; returns (row, step) or (-1, inf)."""
        opt = self.opt
        xb = self.x[self.basis]
        lo = self.L[self.basis]
        hi = self.U[self.basis]
        dec = delta > opt.pivot_tol
        inc = delta < -opt.pivot_tol
        dec &= np.isfinite(lo)
        inc &= np.isfinite(hi)
        idx = np.nonzero(dec | inc)[0]
        if idx.size == 0:
            return -1, np.inf
        dl = delta[idx]
        room = np.where(dl > 0, xb[idx] - lo[idx], hi[idx] - xb[idx])
        room = np.maximum(room, 0.0)
        exact = room / np.abs(dl)
        relaxed = (room + opt.feas_tol) / np.abs(dl)
        tmax = relaxed.min()
        ok = exact <= tmax
        if bland:
            tmin = exact.min()
            ties = idx[exact <= tmin + 1e-12]
            r = int(ties[np.argmin(self.basis[ties])])
            return r, float(exact[np.searchsorted(idx, r)])
        sub = np.nonzero(ok)[0]
        k = sub[np.argmax(np.abs(dl[sub]))]
        return int(idx[k]), float(exact[k])

    def _pivot(self, r: int, q: int, col: np.ndarray, leave_to_lb: bool) -> None:
        if abs(col[r]) < self.opt.pivot_tol:
            raise NumericalError("pivot element below tolerance")
        leaving = self.basis[r]
        if leave_to_lb:
            self.status[leaving] = AT_LB
            self.x[leaving] = self.L[leaving]
        else:
            self.status[leaving] = AT_UB
            self.x[leaving] = self.U[leaving]
        self.basis[r] = q
        self.status[q] = BASIC
        self.factor.update(r, col)
        self.since_refactor += 1

    # -- dual simplex -----------------------------------------------------
    def _dual(self, c: np.ndarray) -> Status:
        opt = self.opt
        while True:
            if self.iters >= self.limit:
                return Status.ITERATION_LIMIT
            if self.since_refactor >= opt.refactor_every:
                self._refactor()
            xb = self.x[self.basis]
            lo = self.L[self.basis]
            hi = self.U[self.basis]
            infeas = np.maximum(lo - xb, xb - hi)
            r = int(np.argmax(infeas))
            if infeas[r] <= opt.feas_tol:
                return Status.OPTIMAL
            need = 1.0 if xb[r] < lo[r] else -1.0
            target = lo[r] if need > 0 else hi[r]
            y = self.factor.btran(c[self.basis])
            d = c - self._At_y(y)
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self.factor.btran(e)
            arow = self._At_y(rho)
            st = self.status
            movable = (st != BASIC) & (self.L < self.U)
            piv = opt.pivot_tol * 10
            elig = movable & (
                ((st == AT_LB) & (need * arow < -piv))
                | ((st == AT_UB) & (need * arow > piv))
                | ((st == FREE) & (np.abs(arow) > piv)))
            cand = np.nonzero(elig)[0]
            self.iters += 1
            if cand.size == 0:
                return Status.INFEASIBLE
            dd = np.abs(d[cand])
            # sign-violating reduced costs count as zero
            wrong = ((st[cand] == AT_LB) & (d[cand] < 0)) | ((st[cand] == AT_UB) & (d[cand] > 0))
            dd[wrong] = 0.0
            aa = np.abs(arow[cand])
            tmax = ((dd + opt.opt_tol) / aa).min()
            sub = np.nonzero(dd / aa <= tmax)[0]
            k = sub[np.argmax(aa[sub])]
            q = int(cand[k])
            col = self.factor.ftran(self._column(q))
            if abs(col[r]) < opt.pivot_tol:
                raise NumericalError("dual pivot element below tolerance")
            step = (xb[r] - target) / col[r]
            self.x[q] += step
            self.x[self.basis] -= col * step
            self._pivot(r, q, col, leave_to_lb=need > 0)


def solve_lp_engine(model: LinearModel, options: SimplexOptions | None = None):
    """Solve ``model`` as an LP; returns (SolveOutcome fields as dict)."""
    t0 = time.perf_counter()
    eng = LPEngine(model, options)
    res = eng.solve()
    return eng, res, time.perf_counter() - t0


def row_duals(engine: LPEngine, res: EngineResult) -> np.ndarray:
    """Map internal shadow prices onto the ``<=``-form multiplier convention."""
    model = engine.model
    y_full = np.zeros(model.num_rows)
    kept = engine.row_map >= 0
    y_full[kept] = res.y[engine.row_map[kept]]
    d = res.d[:engine.n]
    x = res.x
    tol = engine.opt.feas_tol
    for j, (i, a) in engine.lb_src.items():
        if abs(x[j] - engine.lb0[j]) <= tol and d[j] > 0:
            y_full[i] = d[j] / a
    for j, (i, a) in engine.ub_src.items():
        if abs(x[j] - engine.ub0[j]) <= tol and d[j] < 0:
            y_full[i] = d[j] / a
    s_rel = np.array([-1.0 if r == GE else 1.0 for r in model.relation])
    return -s_rel * y_full
