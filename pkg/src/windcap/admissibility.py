"""Feasibility check of a wind realization under fixed commitments, and its worst case over a box.

``solve_ck`` measures the least total constraint violation of real-time
dispatch for one wind vector.  ``solve_fw`` maximizes that measure over all
vectors in an uncertainty box by dualizing the check and enumerating box
corners with binaries.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .commitment import CkConstants, NonConclusiveSolve
from .model import SystemCase, bus_map, compute_ptdf
from .optkit import INF, LinearModel, SolverOptions, Status, get_backend
from .uncertainty import BoxSet, UncertaintyModel, box_corner, build_box

FAMILIES = ("a-", "a+", "b+", "b-", "c+", "c-", "d-", "d+", "e-", "e+")
# report categories per slack family
CATEGORY = {"a-": "capacity", "a+": "capacity", "b+": "ramp", "b-": "ramp",
            "c+": "balance", "c-": "balance", "d-": "reserve", "d+": "reserve",
            "e-": "line", "e+": "line"}


class CrossCheckError(RuntimeError):
    """The dual MILP value disagrees with the primal check at the recovered corner."""


@dataclass
class CkProblem:
    """Feasibility-check LP plus the bookkeeping needed to re-read it in compact form."""

    model: LinearModel
    case: SystemCase
    constants: CkConstants
    w: np.ndarray              # full wind vector (farm-major)
    ptdf: np.ndarray
    n_p: int
    slack_cols: dict[str, np.ndarray]
    family_rows: dict[str, np.ndarray]


def _sizes(case):
    N, H, K = case.n_units, case.horizon, case.n_lines
    return {"a-": N * H, "a+": N * H, "b+": N * (H - 1), "b-": N * (H - 1), "c+": H, "c-": H,
            "d-": H, "d+": H, "e-": K * H, "e+": K * H}


def build_ck(case: SystemCase, constants: CkConstants, w, ptdf: np.ndarray | None = None) -> CkProblem:
    """Slack-relaxed real-time dispatch LP for wind ``w`` (full farm-major vector)."""
    N, H = case.n_units, case.horizon
    ptdf = compute_ptdf(case) if ptdf is None else ptdf
    w = np.asarray(w, float)
    if w.shape != (case.n_wind * H,):
        raise ValueError(f"wind vector must have length {case.n_wind * H}")
    wind = w.reshape(case.n_wind, H)
    mdl = LinearModel("min", name="ck")
    names = [f"p[{g.id},{h + 1}]" for g in case.units for h in range(H)]
    mdl.add_vars(N * H, lb=-INF, ub=INF, names=names)
    sizes = _sizes(case)
    slack_cols = {f: mdl.add_vars(n, lb=0.0, obj=1.0, names=[f"z{f}[{k}]" for k in range(n)])
                  for f, n in sizes.items()}
    family_rows: dict[str, list[int]] = {f: [] for f in FAMILIES}
    c = constants

    def p(i, h):
        return i * H + h

    def z(f, k):
        return int(slack_cols[f][k])

    for i, g in enumerate(case.units):
        for h in range(H):
            k = i * H + h
            family_rows["a-"].append(mdl.add_row([p(i, h), z("a-", k)], [1, 1], ">=", c.p_lo[i, h],
                                                 f"cap_lo[{g.id},{h + 1}]"))
            family_rows["a+"].append(mdl.add_row([p(i, h), z("a+", k)], [1, -1], "<=", c.p_hi[i, h],
                                                 f"cap_hi[{g.id},{h + 1}]"))
    for i, g in enumerate(case.units):
        for h in range(H - 1):
            k = i * (H - 1) + h
            family_rows["b+"].append(mdl.add_row([p(i, h + 1), p(i, h), z("b+", k)], [1, -1, -1], "<=",
                                                 c.dp_hi[i, h], f"ramp_up[{g.id},{h + 1}]"))
            family_rows["b-"].append(mdl.add_row([p(i, h), p(i, h + 1), z("b-", k)], [1, -1, -1], "<=",
                                                 c.dp_lo[i, h], f"ramp_dn[{g.id},{h + 1}]"))
    D = case.total_load
    for h in range(H):
        cols = [p(i, h) for i in range(N)]
        r = mdl.add_row(cols + [z("c+", h), z("c-", h)], [1.0] * N + [1, -1], "=",
                        D[h] - wind[:, h].sum(), f"balance[{h + 1}]")
        family_rows["c+"].append(r)
        family_rows["c-"].append(r)
    for h in range(H):
        cols = [p(i, h) for i in range(N)]
        family_rows["d-"].append(mdl.add_row(cols + [z("d-", h)], [1.0] * N + [1], ">=", c.r_lo[h],
                                             f"res_lo[{h + 1}]"))
        family_rows["d+"].append(mdl.add_row(cols + [z("d+", h)], [1.0] * N + [-1], "<=", c.r_hi[h],
                                             f"res_hi[{h + 1}]"))
    G, Wm = bus_map(case)
    Hg = ptdf @ G
    fixed = ptdf @ (Wm @ wind - case.loads)
    for k, ln in enumerate(case.lines):
        for h in range(H):
            cols = [p(i, h) for i in range(N)]
            j = k * H + h
            family_rows["e-"].append(mdl.add_row(cols + [z("e-", j)], list(Hg[k]) + [1], ">=",
                                                 -ln.limit - fixed[k, h], f"flow_lo[{ln.id},{h + 1}]"))
            family_rows["e+"].append(mdl.add_row(cols + [z("e+", j)], list(Hg[k]) + [-1], "<=",
                                                 ln.limit - fixed[k, h], f"flow_hi[{ln.id},{h + 1}]"))
    return CkProblem(mdl, case, constants, w, ptdf, N * H, slack_cols,
                     {f: np.asarray(v, int) for f, v in family_rows.items()})


@dataclass
class CkReport:
    value: float
    slack_breakdown: dict[str, float]
    dispatch: np.ndarray | None
    slacks: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.value <= 1e-9


def solve_ck(case, constants, w, options=None, backend=None, ptdf=None) -> CkReport:
    ck = build_ck(case, constants, w, ptdf)
    out = get_backend(backend).solve_lp(ck.model, options)
    if out.status != Status.OPTIMAL:
        # every row carries its own slack so the LP is always feasible and bounded
        raise NonConclusiveSolve(f"feasibility check ended with status {out.status.value}")
    x = out.primal
    slacks = {f: np.maximum(x[cols], 0.0) for f, cols in ck.slack_cols.items()}
    breakdown = {cat: 0.0 for cat in dict.fromkeys(CATEGORY.values())}
    for f, vals in slacks.items():
        breakdown[CATEGORY[f]] += float(vals.sum())
    value = max(float(out.objective_value) + 0.0, 0.0)
    dispatch = x[:ck.n_p].reshape(case.n_units, case.horizon)
    return CkReport(value, breakdown, dispatch, slacks)


# -- compact form -----------------------------------------------------------------

@dataclass
class StandardFormCK:
    """Rows ``M p + T w + Q z <= m_vec`` of the feasibility check."""

    M: sp.csr_matrix
    T: sp.csr_matrix
    Q: sp.csr_matrix
    m_vec: np.ndarray
    row_labels: list[str]
    slack_map: np.ndarray     # slack index -> row index

    @property
    def n_rows(self) -> int:
        return self.m_vec.size

    def residual(self, p, w, z) -> np.ndarray:
        return self.M @ p + self.T @ w + self.Q @ z - self.m_vec


def _wind_coefficients(ck: CkProblem) -> dict[str, sp.csr_matrix]:
    """Coefficient of each wind coordinate in the natural orientation of each row family."""
    case = ck.case
    H, W, K = case.horizon, case.n_wind, case.n_lines
    m = W * H
    bal = sp.lil_matrix((H, m))
    for f in range(W):
        for h in range(H):
            bal[h, f * H + h] = 1.0
    G, Wm = bus_map(case)
    Hw = ck.ptdf @ Wm  # lines x farms
    line = sp.lil_matrix((K * H, m))
    for k in range(K):
        for f in range(W):
            if Hw[k, f] != 0.0:
                for h in range(H):
                    line[k * H + h, f * H + h] = Hw[k, f]
    return {"balance": bal.tocsr(), "line": line.tocsr()}


def assemble_standard_form(ck: CkProblem) -> StandardFormCK:
    """Compact single-inequality form: ``>=`` rows negated, the balance equality split in two.

    Each resulting row keeps exactly one slack with coefficient -1.
    """
    A = ck.model.matrix().tocsr()
    rhs = np.asarray(ck.model.rhs)
    n_p = ck.n_p
    n_z = ck.model.num_vars - n_p
    m_w = ck.case.n_wind * ck.case.horizon
    wc = _wind_coefficients(ck)
    zero_w = sp.csr_matrix((1, m_w))
    rows_M, rows_T, rows_Q, m_vec, labels, slack_row = [], [], [], [], [], {}

    def emit(row_i, sign, label, drop_slack=None, wrow=None):
        a = A[row_i]
        if drop_slack is not None:
            a = a.tolil()
            a[0, drop_slack] = 0.0
            a = a.tocsr()
            a.eliminate_zeros()
        a = sign * a
        rows_M.append(a[:, :n_p])
        rows_Q.append(a[:, n_p:])
        t = zero_w if wrow is None else sign * wrow
        rows_T.append(t)
        # rhs in the LP already has T w moved to the right
        wterm = 0.0 if wrow is None else float((wrow @ ck.w)[0])
        m_vec.append(sign * (rhs[row_i] + wterm))
        labels.append(label)

    category_of = {}
    for f, rws in ck.family_rows.items():
        for r in rws:
            category_of.setdefault(int(r), CATEGORY[f])
    for f in FAMILIES:
        if f == "c-":
            continue
        for k, r in enumerate(ck.family_rows[f]):
            r = int(r)
            if f == "c+":
                zp = int(ck.slack_cols["c+"][k])
                zm = int(ck.slack_cols["c-"][k])
                # sum p + sum w - z^{c-} <= D   and   -(sum p + sum w) - z^{c+} <= -D
                emit(r, 1.0, "balance+", drop_slack=zp, wrow=wc["balance"][k])
                slack_row[zm - n_p] = len(m_vec) - 1
                emit(r, -1.0, "balance-", drop_slack=zm, wrow=wc["balance"][k])
                slack_row[zp - n_p] = len(m_vec) - 1
                continue
            sign = -1.0 if ck.model.relation[r] == ">=" else 1.0
            wrow = wc["line"][k] if f in ("e-", "e+") else None
            label = {"capacity": "capacity", "ramp": "ramp", "reserve": "reserve",
                     "line": "line"}[CATEGORY[f]]
            emit(r, sign, label, wrow=wrow)
            slack_row[int(ck.slack_cols[f][k]) - n_p] = len(m_vec) - 1
    M = sp.vstack(rows_M, format="csr")
    T = sp.vstack(rows_T, format="csr")
    Q = sp.vstack(rows_Q, format="csr")
    sf = StandardFormCK(M, T, Q, np.asarray(m_vec), labels,
                        np.array([slack_row[j] for j in range(n_z)], dtype=int))
    _check_slack_structure(sf)
    return sf


def _check_slack_structure(sf: StandardFormCK) -> None:
    Q = sf.Q.tocsr()
    per_row = np.diff(Q.indptr)
    if np.any(per_row != 1) or not np.allclose(Q.data, -1.0):
        raise AssertionError("every compact row must carry exactly one slack with coefficient -1")
    per_col = np.bincount(Q.indices, minlength=Q.shape[1])
    if np.any(per_col != 1):
        raise AssertionError("every slack must appear in exactly one compact row")


# -- dual MILP over box corners -----------------------------------------------------

@dataclass
class DualIndex:
    delta: np.ndarray
    rho: np.ndarray
    t: np.ndarray
    tau: np.ndarray


def _uncertain_split(sf: StandardFormCK, model: UncertaintyModel, w_full_e: np.ndarray):
    """T restricted to uncertain coordinates and rhs with fixed coordinates absorbed."""
    m_full = sf.T.shape[1]
    coords = model.coords if model.coords is not None else np.arange(m_full)
    fixed = np.setdiff1d(np.arange(m_full), coords)
    T_unc = sf.T[:, coords]
    m_eff = sf.m_vec.copy()
    if fixed.size:
        m_eff -= sf.T[:, fixed] @ w_full_e[fixed]
    return T_unc, m_eff


def rho_map(sf: StandardFormCK, model: UncertaintyModel) -> np.ndarray:
    """Dense ``L^{1/2} T^T`` restricted to the model's coordinates (m x rows)."""
    coords = model.coords if model.coords is not None else np.arange(sf.T.shape[1])
    T_unc = sf.T[:, coords]
    return np.asarray((T_unc @ model.lam_sqrt).T)


def estimate_rho_bounds(sf: StandardFormCK, model: UncertaintyModel, method: str = "interval",
                        options=None, backend=None) -> tuple[np.ndarray, np.ndarray]:
    """Bounds on ``rho = L^{1/2} T^T delta`` over dual-feasible ``delta``.

    Dual feasibility gives ``0 <= delta <= 1`` row-wise (each row owns one
    slack of unit cost), so interval arithmetic bounds each component.
    ``method="lp"`` tightens them by optimizing each component over the
    full dual polyhedron.
    """
    A = rho_map(sf, model)
    lo = np.minimum(A, 0.0).sum(axis=1)
    hi = np.maximum(A, 0.0).sum(axis=1)
    if method == "interval":
        return lo, hi
    if method != "lp":
        raise ValueError(f"unknown rho bound method {method!r}")
    R = sf.n_rows
    base = LinearModel("max", name="rho_bound")
    base.add_vars(R, lb=0.0, ub=1.0)
    Mt = sf.M.T.tocsr()
    for j in range(Mt.shape[0]):
        s, e = Mt.indptr[j], Mt.indptr[j + 1]
        base.add_row(Mt.indices[s:e], Mt.data[s:e], "=", 0.0)
    be = get_backend(backend)
    for n in range(A.shape[0]):
        for sense in ("max", "min"):
            mdl = base.copy()
            mdl.sense = sense
            mdl.obj = list(A[n])
            out = be.solve_lp(mdl, options)
            if out.status == Status.OPTIMAL:
                val = out.objective_value
                if sense == "max":
                    hi[n] = min(hi[n], val + 1e-9 * max(1.0, abs(val)))
                else:
                    lo[n] = max(lo[n], val - 1e-9 * max(1.0, abs(val)))
    return lo, hi


def build_dual_milp(sf: StandardFormCK, model: UncertaintyModel, box: BoxSet,
                    w_full_e: np.ndarray | None = None,
                    rho_bounds: tuple[np.ndarray, np.ndarray] | None = None
                    ) -> tuple[LinearModel, DualIndex]:
    """Worst-case feasibility-check value over the corners of ``box`` as one MILP.

    Objective ``sum(t + rho * x_lo) - delta . m_vec``; ``rho . x_lo`` is
    expanded as ``delta . (T w_e) - rho . u`` (identical because
    ``x_lo = L^{-1/2} w_e - u``), which avoids forming ``L^{-1/2} w_e``.
    """
    m = model.m
    if w_full_e is None:
        w_full_e = np.zeros(sf.T.shape[1])
        coords = model.coords if model.coords is not None else np.arange(sf.T.shape[1])
        w_full_e[coords] = model.w_e
    T_unc, m_eff = _uncertain_split(sf, model, w_full_e)
    A = np.asarray((T_unc @ model.lam_sqrt).T)
    rho_lo, rho_hi = rho_bounds if rho_bounds is not None else estimate_rho_bounds(sf, model)
    R = sf.n_rows
    width = box.x_hi - box.x_lo
    mdl = LinearModel("max", name="ck_milp")
    delta_obj = T_unc @ model.w_e - m_eff
    delta = mdl.add_vars(R, lb=0.0, obj=delta_obj, names=[f"delta[{r}]" for r in range(R)])
    rho = mdl.add_vars(m, lb=-INF, ub=INF, obj=-box.u, names=[f"rho[{n}]" for n in range(m)])
    t = mdl.add_vars(m, lb=-INF, ub=INF, obj=1.0, names=[f"t[{n}]" for n in range(m)])
    tau = mdl.add_vars(m, binary=True, names=[f"tau[{n}]" for n in range(m)])
    # 1 + Q^T delta >= 0
    Qt = sf.Q.T.tocsr()
    for j in range(Qt.shape[0]):
        s, e = Qt.indptr[j], Qt.indptr[j + 1]
        mdl.add_row(delta[Qt.indices[s:e]], Qt.data[s:e], ">=", -1.0, f"dualfeas[{j}]")
    # M^T delta = 0
    Mt = sf.M.T.tocsr()
    for j in range(Mt.shape[0]):
        s, e = Mt.indptr[j], Mt.indptr[j + 1]
        mdl.add_row(delta[Mt.indices[s:e]], Mt.data[s:e], "=", 0.0, f"stationary[{j}]")
    for n in range(m):
        nz = np.nonzero(A[n])[0]
        mdl.add_row(np.concatenate([[rho[n]], delta[nz]]), np.concatenate([[1.0], -A[n, nz]]),
                    "=", 0.0, f"rho_def[{n}]")
    for n in range(m):
        if width[n] <= 0.0:
            mdl.set_bounds(int(tau[n]), 0.0, 0.0)
            mdl.set_bounds(int(t[n]), 0.0, 0.0)
            continue
        d = width[n]
        # t <= tau rho^+ (x^+ - x^-)
        mdl.add_row([t[n], tau[n]], [1.0, -rho_hi[n] * d], "<=", 0.0, f"t_on[{n}]")
        # t <= [rho - (1 - tau) rho^-] (x^+ - x^-)
        mdl.add_row([t[n], rho[n], tau[n]], [1.0, -d, -rho_lo[n] * d], "<=", -rho_lo[n] * d,
                    f"t_lin[{n}]")
    return mdl, DualIndex(delta, rho, t, tau)


@dataclass
class WorstCaseResult:
    value: float
    w_worst: np.ndarray          # uncertain coordinates (model order)
    w_full: np.ndarray           # full farm-major wind vector
    tau: np.ndarray
    delta: np.ndarray
    rho: np.ndarray
    t: np.ndarray
    alpha: float
    bound: float | None = None
    conclusive: bool = True
    check_value: float | None = None
    status: str = "Optimal"

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "value": self.value, "bound": self.bound,
                "conclusive": self.conclusive, "check_value": self.check_value,
                "status": self.status, "tau": self.tau.astype(int).tolist(),
                "w_worst": self.w_worst.tolist(), "w_full": self.w_full.tolist()}


def _full_wind(case: SystemCase, model: UncertaintyModel, w_unc: np.ndarray) -> np.ndarray:
    w = case.wind_forecast().copy()
    coords = model.coords if model.coords is not None else np.arange(w.size)
    w[coords] = w_unc
    return w


def _fixed_corner_value(mdl: LinearModel, ix: DualIndex, tau, options, backend) -> float:
    """Dual MILP optimum with the corner binaries pinned to ``tau``."""
    fixed = mdl.copy()
    for n, j in enumerate(ix.tau):
        fixed.lb[j] = fixed.ub[j] = float(tau[n])
    out = get_backend(backend).solve_milp(fixed, options)
    if out.status != Status.OPTIMAL:
        raise NonConclusiveSolve(f"dual MILP with a fixed corner reported {out.status.value}")
    return max(float(out.objective_value) + 0.0, 0.0)


def solve_fw(case: SystemCase, constants: CkConstants, model: UncertaintyModel, alpha: float,
             options: SolverOptions | None = None, backend: str | None = None,
             rho_method: str = "interval", ptdf=None, sf: StandardFormCK | None = None,
             rho_bounds=None, dump_model: str | None = None, check: bool = True,
             time_limit: float | None = None, certifier=None) -> WorstCaseResult:
    """Worst-case total violation over the box of mass ``alpha``.

    The corner recovered from the binaries is always re-evaluated with the
    primal check; a mismatch beyond 1e-5 relative raises
    :class:`CrossCheckError`.

    ``time_limit`` caps the MILP alone.  When it stops short and a
    ``certifier`` (see :mod:`windcap.certificates`) is given, the value is
    settled from a corner-pool lower bound and an affine-recourse upper
    bound instead; ``conclusive`` is set only when the two meet.
    """
    options = options or SolverOptions()
    ptdf = compute_ptdf(case) if ptdf is None else ptdf
    w_e_full = case.wind_forecast()
    if sf is None:
        sf = assemble_standard_form(build_ck(case, constants, w_e_full, ptdf))
    box = build_box(model, alpha)
    if rho_bounds is None:
        rho_bounds = estimate_rho_bounds(sf, model, rho_method, options, backend)
    mdl, ix = build_dual_milp(sf, model, box, w_e_full, rho_bounds)
    if dump_model:
        Path(dump_model).write_text(mdl.to_lp_text())
    milp_opts = options if time_limit is None else replace(options, time_limit=time_limit)
    out = get_backend(backend).solve_milp(mdl, milp_opts)
    if out.status == Status.INFEASIBLE or out.status == Status.UNBOUNDED:
        # delta = 0 is always feasible and rho is bounded, so this is a solver failure
        raise NonConclusiveSolve(f"dual MILP reported {out.status.value}")
    bound = out.bound
    if out.status == Status.OPTIMAL:
        x = out.primal
        tau = np.round(x[ix.tau])
        value = max(float(out.objective_value) + 0.0, 0.0)
        conclusive, status = True, out.status.value
        delta, rho, t = x[ix.delta], x[ix.rho], x[ix.t]
    elif certifier is not None:
        if out.primal is not None:
            certifier.pool.add(out.primal[ix.tau])
        upper = certifier.recourse.upper_bound(box, options)
        if bound is not None:
            upper = min(upper, max(float(bound), 0.0))
        tol = max(1e-7, 1e-6 * abs(upper)) if np.isfinite(upper) else 0.0
        value, tau = certifier.pool.lower_bound(box, upper - tol, options)
        bound = upper
        conclusive = bool(upper - value <= tol)
        status = "Certified" if conclusive else out.status.value
        delta = rho = t = None
        if tau is None:
            value, tau = np.nan, np.zeros(model.m)
    elif out.primal is None:
        return WorstCaseResult(np.nan, model.w_e.copy(), w_e_full.copy(), np.zeros(model.m),
                               np.zeros(sf.n_rows), np.zeros(model.m), np.zeros(model.m), alpha,
                               bound=bound, conclusive=False, status=out.status.value)
    else:
        x = out.primal
        tau = np.round(x[ix.tau])
        value = max(float(out.objective_value) + 0.0, 0.0)
        conclusive, status = False, out.status.value
        delta, rho, t = x[ix.delta], x[ix.rho], x[ix.t]
    w_worst = box_corner(model, box, tau)
    w_full = _full_wind(case, model, w_worst)
    if delta is None:
        delta, rho, t = np.zeros(sf.n_rows), np.zeros(model.m), np.zeros(model.m)
    res = WorstCaseResult(value, w_worst, w_full, tau, delta, rho, t, alpha,
                          bound=bound, conclusive=conclusive, status=status)
    if check and np.isfinite(value):
        ck = solve_ck(case, constants, w_full, options, backend, ptdf)
        res.check_value = ck.value
        ref = value
        if status == "Certified":
            # the pool value came from the primal check, so confirm it through the dual model
            ref = _fixed_corner_value(mdl, ix, tau, options, backend)
        if res.conclusive and abs(ck.value - ref) > 1e-5 * max(1.0, abs(ref)):
            raise CrossCheckError(
                f"dual MILP value {ref:.9g} but primal check at the recovered corner gives "
                f"{ck.value:.9g} (alpha={alpha})")
    return res


def max_over_corners(case, constants, model, alpha, options=None, backend=None):
    """Exhaustive maximum of the primal check over all 2^m box corners."""
    box = build_box(model, alpha)
    ptdf = compute_ptdf(case)
    best, best_tau = -np.inf, None
    for bits in itertools.product((0, 1), repeat=model.m):
        tau = np.array(bits, float)
        w = _full_wind(case, model, box_corner(model, box, tau))
        v = solve_ck(case, constants, w, options, backend, ptdf).value
        if v > best:
            best, best_tau = v, tau
    return best, best_tau


def write_worst_case_csv(path, model: UncertaintyModel, res: WorstCaseResult) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["coordinate", "w_e", "w_worst", "side"])
        for lab, we, ww, tb in zip(model.labels, model.w_e, res.w_worst, res.tau):
            wr.writerow([lab, repr(float(we)), repr(float(ww)), "upper" if tb > 0.5 else "lower"])


def write_breakdown_json(path, report: CkReport) -> None:
    Path(path).write_text(json.dumps({"value": report.value,
                                      "slack_breakdown": report.slack_breakdown}, indent=1))
