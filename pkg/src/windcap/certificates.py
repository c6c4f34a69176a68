"""Certified bounds on the worst-case check value over a box.

The corner MILP can stall on long horizons: with valid bounds on ``rho`` that
are symmetric, its relaxation credits every undecided corner coordinate with
the full width of the bound, so the gap only closes after nearly every
binary is fixed.  These bounds settle the value independently.

* Lower: the check value at any box corner is attained, so the maximum over
  a pool of corners bounds ``F_w`` from below.  For a fixed sign pattern the
  corner moves outward along a ray as alpha grows, and the check value (a
  convex function that is zero at the forecast) can only grow along it.
* Upper: dispatch that follows ``p = p0 + beta * (hourly wind deviation)``
  is one admissible response to every realization; if it keeps row ``r``'s
  violation below ``s_r`` on the whole box then no realization needs more
  than ``sum(s)`` total slack.  Finding the best such policy is an LP.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

try:
    import highspy
except ImportError:  # pragma: no cover - optional fast path
    highspy = None

from .optkit import INF, LinearModel, SolverOptions, Status, get_backend
from .uncertainty import BoxSet, UncertaintyModel, box_corner

_PARALLEL_RTOL = 1e-10


def _coords(sf, model: UncertaintyModel) -> np.ndarray:
    return model.coords if model.coords is not None else np.arange(sf.T.shape[1])


class FixedMatrixLP:
    """``min c.x`` over ``A x <= b``, ``lb <= x <= ub`` re-solved for many ``b``.

    With the ``highs`` backend the model stays loaded and each new right-hand
    side is a warm start from the previous basis; other backends get a fresh
    :class:`LinearModel` per solve.
    """

    def __init__(self, A, obj, lb, ub, backend=None, name=""):
        self.A = sp.csr_matrix(A)
        self.obj = np.asarray(obj, float)
        self.lb = np.broadcast_to(np.asarray(lb, float), self.obj.shape).copy()
        self.ub = np.broadcast_to(np.asarray(ub, float), self.obj.shape).copy()
        self.backend = get_backend(backend)
        self.name = name
        self._highs = None
        if self.backend.name == "highs" and highspy is not None:
            self._highs = self._load()

    def _load(self):
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        lp = highspy.HighsLp()
        lp.num_col_, lp.num_row_ = self.A.shape[1], self.A.shape[0]
        lp.col_cost_, lp.col_lower_, lp.col_upper_ = self.obj, self.lb, self.ub
        lp.row_lower_ = np.full(self.A.shape[0], -np.inf)
        lp.row_upper_ = np.zeros(self.A.shape[0])
        csc = self.A.tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_, lp.a_matrix_.index_, lp.a_matrix_.value_ = (
            csc.indptr, csc.indices, csc.data)
        h.passModel(lp)
        self._rows = np.arange(self.A.shape[0], dtype=np.int32)
        self._free = np.full(self.A.shape[0], -np.inf)
        return h

    def solve(self, rhs, options: SolverOptions | None = None):
        """Primal optimum for ``rhs``, or ``None`` if the solve did not reach optimality."""
        rhs = np.asarray(rhs, float)
        if self._highs is None:
            mdl = LinearModel.from_matrix("min", self.A, "<=", rhs, self.obj, self.lb, self.ub,
                                          name=self.name)
            out = self.backend.solve_lp(mdl, options)
            return out.primal if out.status == Status.OPTIMAL else None
        h = self._highs
        h.changeRowsBounds(len(rhs), self._rows, self._free, rhs)
        h.run()
        if h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
            return None
        return np.asarray(h.getSolution().col_value, float)



def structured_patterns(model: UncertaintyModel) -> list[np.ndarray]:
    """Corner selectors (1 = upper face) aimed at single coordinates and at hour-to-hour steps.

    The corner that pushes coordinate ``n`` furthest is ``sign(L^{1/2}[n])``;
    the one that stretches the step between consecutive coordinates furthest
    is ``sign(L^{1/2}[n+1] - L^{1/2}[n])``.  Both signs of each are kept.
    """
    L = model.lam_sqrt
    dirs = [np.ones(model.m)]
    dirs += [L[n] for n in range(model.m)]
    dirs += [L[n + 1] - L[n] for n in range(model.m - 1)]
    seen, out = set(), []
    for d in dirs:
        for sgn in (-1.0, 1.0):
            tau = (sgn * d >= 0).astype(float)
            key = tau.tobytes()
            if key not in seen:
                seen.add(key)
                out.append(tau)
    return out


class CornerPool:
    """Box corners whose check values give a lower bound on the worst case."""

    def __init__(self, sf, model: UncertaintyModel, w_full_e: np.ndarray, backend=None,
                 patterns: list[np.ndarray] | None = None):
        self.sf = sf
        self.model = model
        self.w_full_e = np.asarray(w_full_e, float)
        self.coords = _coords(sf, model)
        self.patterns = list(structured_patterns(model) if patterns is None else patterns)
        self._keys = {p.tobytes() for p in self.patterns}
        n_p, n_z = sf.M.shape[1], sf.Q.shape[1]
        self.lp = FixedMatrixLP(sp.hstack([sf.M, sf.Q], format="csr"),
                                np.r_[np.zeros(n_p), np.ones(n_z)],
                                np.r_[np.full(n_p, -INF), np.zeros(n_z)], INF, backend, "ck_compact")
        self._n_p = n_p

    def add(self, tau) -> None:
        tau = (np.asarray(tau, float) > 0.5).astype(float)
        key = tau.tobytes()
        if key not in self._keys:
            self._keys.add(key)
            # newest first: MILP incumbents are the likeliest maximizers
            self.patterns.insert(0, tau)

    def corner_value(self, box: BoxSet, tau, options=None) -> float:
        w = self.w_full_e.copy()
        w[self.coords] = box_corner(self.model, box, tau)
        x = self.lp.solve(self.sf.m_vec - self.sf.T @ w, options)
        if x is None:
            return -np.inf
        return max(float(x[self._n_p:].sum()) + 0.0, 0.0)

    def lower_bound(self, box: BoxSet, stop_at: float = np.inf, options=None):
        """Best corner value in the pool; stops as soon as ``stop_at`` is reached."""
        best, best_tau = -np.inf, None
        for tau in self.patterns:
            v = self.corner_value(box, tau, options)
            if v > best:
                best, best_tau = v, tau
            if best >= stop_at:
                break
        return best, best_tau


class AffineRecourseBound:
    """Upper bound on the worst-case check value from an hourly participation-factor policy.

    Boxes are cubes (``u = z * 1``), so after scaling the slopes and the
    absolute-value auxiliaries by ``z`` the constraint matrix no longer
    depends on the box and only the right-hand side moves, linearly in ``z``.
    """

    def __init__(self, sf, model: UncertaintyModel, w_full_e: np.ndarray, horizon: int,
                 backend=None):
        H = horizon
        coords = _coords(sf, model)
        L = model.lam_sqrt
        m = model.m
        # direction in v-space of each hour's total wind deviation
        A = np.zeros((H, m))
        for j, c in enumerate(coords):
            A[c % H] += L[j]
        norms = np.abs(A).sum(axis=1)
        TL = np.asarray(sf.T[:, coords] @ L)
        M = sf.M.tocsr()
        R, NP = M.shape
        base = sf.m_vec - sf.T @ np.asarray(w_full_e, float)
        rows, cols, vals = [], [], []
        rhs0, rhs1 = [], []
        aux_rows, aux_of_row = [], []
        n_rows = 0
        n_vars = 2 * NP + R

        def entry(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        def abs_pair(coef, const, weight, robust):
            # aux >= |sum(coef * beta) + const|, entering the robust row with ``weight``
            nonlocal n_rows, n_vars
            aux = n_vars
            n_vars += 1
            entry(robust, aux, weight)
            for sgn in (1.0, -1.0):
                for c, v in coef:
                    entry(n_rows, c, sgn * v)
                entry(n_rows, aux, -1.0)
                rhs0.append(0.0)
                rhs1.append(-sgn * const)
                aux_rows.append(n_rows)
                aux_of_row.append(aux)
                n_rows += 1

        robust_rows = []
        for r in range(R):
            s, e = M.indptr[r], M.indptr[r + 1]
            pc, pv = M.indices[s:e], M.data[s:e]
            tl = TL[r]
            hours = np.unique(pc % H)
            robust = n_rows
            robust_rows.append(robust)
            n_rows += 1
            for q, v in zip(pc, pv):
                entry(robust, int(q), float(v))
            entry(robust, 2 * NP + r, -1.0)
            rhs0.append(base[r])
            rhs1.append(0.0)
            if hours.size == 1 and np.any(A[hours[0]]):
                h = int(hours[0])
                a = A[h]
                t = float(tl @ a / (a @ a))
                if np.linalg.norm(tl - t * a) <= _PARALLEL_RTOL * max(1.0, np.linalg.norm(tl)):
                    # coefficient on v is kappa * A_h with kappa linear in beta
                    abs_pair([(NP + int(q), float(v)) for q, v in zip(pc, pv)], t, norms[h], robust)
                    continue
            if pc.size == 0 or not np.any(A[hours]):
                # no recourse reaches this row: its worst case is a constant
                rhs1[robust] = -float(np.abs(tl).sum())
                continue
            for n in range(m):
                coef = [(NP + int(q), float(v) * A[q % H, n]) for q, v in zip(pc, pv)]
                coef = [(c, v) for c, v in coef if v != 0.0]
                if coef or tl[n] != 0.0:
                    abs_pair(coef, tl[n], 1.0, robust)
        self.n_rows, self.n_vars = n_rows, n_vars
        self.n_p, self.n_slack = NP, R
        self._rhs0 = np.asarray(rhs0, float)
        self._rhs1 = np.asarray(rhs1, float)
        self._robust = np.asarray(robust_rows, int)
        self._aux_rows = np.asarray(aux_rows, int)
        self._aux_of_row = np.asarray(aux_of_row, int)
        obj = np.zeros(n_vars)
        obj[2 * NP:2 * NP + R] = 1.0
        lb = np.r_[np.full(2 * NP, -INF), np.zeros(n_vars - 2 * NP)]
        A_mat = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_vars))
        self.lp = FixedMatrixLP(A_mat, obj, lb, INF, backend, "affine_recourse")

    def rhs(self, box: BoxSet) -> np.ndarray:
        u = np.asarray(box.u, float)
        if u.size and np.ptp(u) > 1e-12 * max(1.0, float(u.max())):
            raise ValueError("affine recourse bound needs a cubic box")
        z = float(u[0]) if u.size else 0.0
        return self._rhs0 + z * self._rhs1

    def evaluate(self, x: np.ndarray, box: BoxSet) -> float:
        """Total slack the policy ``(p0, z * beta)`` in ``x`` needs on the whole box.

        The auxiliaries and slacks are recomputed exactly from the policy,
        so the result is a valid bound however loosely the LP was solved.
        """
        rhs = self.rhs(box)
        A = self.lp.A
        y = np.array(x, float)
        y[2 * self.n_p:] = 0.0
        res = A @ y - rhs
        aux = np.zeros(self.n_vars)
        np.maximum.at(aux, self._aux_of_row, res[self._aux_rows])
        y[2 * self.n_p + self.n_slack:] = aux[2 * self.n_p + self.n_slack:]
        res = A @ y - rhs
        return float(np.maximum(res[self._robust], 0.0).sum())

    def upper_bound(self, box: BoxSet, options: SolverOptions | None = None) -> float:
        x = self.lp.solve(self.rhs(box), options)
        if x is None:
            return np.inf
        return self.evaluate(x, box)


class Certifier:
    """Both bounds for one (standard form, uncertainty model) pair, reusable across alphas."""

    def __init__(self, sf, model: UncertaintyModel, w_full_e: np.ndarray, horizon: int,
                 backend=None):
        self.pool = CornerPool(sf, model, w_full_e, backend)
        self.recourse = AffineRecourseBound(sf, model, w_full_e, horizon, backend)
