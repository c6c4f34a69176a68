"""Reference computations that share no code with the package under test.

Everything here is written directly from the problem statement with scipy's
HiGHS LP and plain enumeration, so agreement with the package is evidence
rather than tautology.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate
from scipy.optimize import linprog


# -- network ------------------------------------------------------------------

def ptdf_oracle(n_bus, lines, slack):
    """Shift factors from the pseudo-inverse of the weighted Laplacian.

    ``lines`` is a list of (from, to, reactance).  Injecting at bus ``b`` and
    withdrawing at the slack gives angles ``pinv(B) (e_b - e_slack)``.
    """
    B = np.zeros((n_bus, n_bus))
    for f, t, x in lines:
        B[f, f] += 1 / x
        B[t, t] += 1 / x
        B[f, t] -= 1 / x
        B[t, f] -= 1 / x
    Bp = np.linalg.pinv(B)
    out = np.zeros((len(lines), n_bus))
    for b in range(n_bus):
        inj = np.zeros(n_bus)
        inj[b] += 1
        inj[slack] -= 1
        theta = Bp @ inj
        for k, (f, t, x) in enumerate(lines):
            out[k, b] = (theta[f] - theta[t]) / x
    return out


def case_ptdf(case):
    return ptdf_oracle(case.buses, [(ln.from_bus, ln.to_bus, ln.reactance) for ln in case.lines],
                       case.slack_bus)


# -- normal quantile ------------------------------------------------------------

def interval_mass(z):
    """P(-z <= N(0,1) <= z) by quadrature of the density."""
    # the density is symmetric, so integrate one side and double
    val, _ = integrate.quad(lambda s: math.exp(-s * s / 2) / math.sqrt(2 * math.pi), 0.0, z,
                            epsabs=1e-13, epsrel=0.0, limit=200)
    return 2 * val


def quantile_oracle(gamma):
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if interval_mass(mid) < gamma:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# -- dispatch check ---------------------------------------------------------------

def _incidence(case):
    N, W = len(case.units), len(case.wind_farms)
    G = np.zeros((case.buses, N))
    for i, g in enumerate(case.units):
        G[g.bus, i] = 1
    Wm = np.zeros((case.buses, W))
    for k, f in enumerate(case.wind_farms):
        Wm[f.bus, k] = 1
    return G, Wm


def _ck_rows(case, u, w_full):
    """Rows ``a . p <= b`` and balance equalities of the real-time dispatch check."""
    N, H = len(case.units), case.horizon
    u = np.asarray(u, float)
    wind = np.asarray(w_full, float).reshape(len(case.wind_farms), H)
    ptdf = case_ptdf(case)
    G, Wm = _incidence(case)
    D = case.loads.sum(axis=0)
    pmin = np.array([g.p_min for g in case.units])
    pmax = np.array([g.p_max for g in case.units])
    rows, rhs = [], []

    def pvec(coef):  # coef: dict (i, h) -> value
        a = np.zeros(N * H)
        for (i, h), v in coef.items():
            a[i * H + h] += v
        return a

    for i, g in enumerate(case.units):
        for h in range(H):
            rows.append(pvec({(i, h): -1}))
            rhs.append(-u[i, h] * g.p_min)
            rows.append(pvec({(i, h): 1}))
            rhs.append(u[i, h] * g.p_max)
        for h in range(H - 1):
            rows.append(pvec({(i, h + 1): 1, (i, h): -1}))
            rhs.append(u[i, h] * g.ramp_up + (1 - u[i, h]) * g.p_max)
            rows.append(pvec({(i, h): 1, (i, h + 1): -1}))
            rhs.append(u[i, h + 1] * g.ramp_down + (1 - u[i, h + 1]) * g.p_max)
    eq_rows = []
    for h in range(H):
        allp = {(i, h): 1 for i in range(N)}
        eq_rows.append((pvec(allp), D[h] - wind[:, h].sum()))
        rows.append(-pvec(allp))
        rhs.append(-(u[:, h] @ pmin + case.reserve_down[h] * D[h]))
        rows.append(pvec(allp))
        rhs.append(u[:, h] @ pmax - case.reserve_up[h] * D[h])
    flow_p = ptdf @ G
    for k, ln in enumerate(case.lines):
        for h in range(H):
            a = pvec({(i, h): flow_p[k, i] for i in range(N)})
            fixed = ptdf[k] @ (Wm @ wind[:, h] - case.loads[:, h])
            rows.append(a)
            rhs.append(ln.limit - fixed)
            rows.append(-a)
            rhs.append(ln.limit + fixed)
    return np.array(rows), np.array(rhs), eq_rows


def ck_residuals_oracle(case, u, p, w_full):
    """Every dispatch row written as ``g(p, w) - b`` (balance as two opposite rows)."""
    A, b, eq_rows = _ck_rows(case, u, w_full)
    out = list(A @ p - b)
    for a, rhs in eq_rows:
        out += [a @ p - rhs, rhs - a @ p]
    return np.array(out)


def fc_oracle(case, u, w_full):
    """Least total violation of the real-time dispatch rows under commitment ``u``.

    Each row ``g(p) <= b`` gets its own slack ``s >= g(p) - b``; the balance
    equality gets a slack on each side.
    """
    N, H = len(case.units), case.horizon
    rows, rhs, eq_rows = _ck_rows(case, u, w_full)
    R, E = len(rows), len(eq_rows)
    n = N * H + R + 2 * E
    A_ub = np.zeros((R, n))
    A_ub[:, :N * H] = rows
    A_ub[np.arange(R), N * H + np.arange(R)] = -1
    A_eq = np.zeros((E, n))
    for e, (a, b) in enumerate(eq_rows):
        A_eq[e, :N * H] = a
        A_eq[e, N * H + R + 2 * e] = 1
        A_eq[e, N * H + R + 2 * e + 1] = -1
    c = np.r_[np.zeros(N * H), np.ones(R + 2 * E)]
    bounds = [(None, None)] * (N * H) + [(0, None)] * (R + 2 * E)
    res = linprog(c, A_ub=A_ub, b_ub=rhs, A_eq=A_eq, b_eq=[b for _, b in eq_rows],
                  bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return max(res.fun, 0.0)


def corner_oracle(case, u, model_w_e, lam_sqrt, coords, z):
    """Largest dispatch violation over the 2^m corners of the cube of half-width ``z``."""
    m = len(model_w_e)
    best = -np.inf
    base = case.wind_forecast().copy()
    for signs in itertools.product((-1.0, 1.0), repeat=m):
        w = base.copy()
        w[coords] = model_w_e + lam_sqrt @ (z * np.array(signs))
        best = max(best, fc_oracle(case, u, w))
    return best


# -- unit commitment ----------------------------------------------------------------

def _runs_ok(history_state, history_len, seq, min_on, min_off):
    """Every run that ends inside the horizon meets its minimum length (history counted)."""
    states = [history_state] * history_len + list(seq)
    run_start = 0
    for h in range(1, len(states)):
        if states[h] != states[h - 1]:
            need = min_on if states[h - 1] == 1 else min_off
            if h - run_start < need:
                return False
            run_start = h
    return True


def uc_bruteforce(case):
    """Cheapest commitment by enumerating every on/off pattern with an LP for dispatch."""
    N, H = len(case.units), case.horizon
    ptdf = case_ptdf(case)
    G, Wm = _incidence(case)
    D = case.loads.sum(axis=0)
    wind = case.wind_forecast().reshape(len(case.wind_farms), H)
    pmin = np.array([g.p_min for g in case.units])
    pmax = np.array([g.p_max for g in case.units])
    best = math.inf
    for bits in itertools.product((0, 1), repeat=N * H):
        u = np.array(bits, float).reshape(N, H)
        ok = True
        for i, g in enumerate(case.units):
            hist = 1 if g.initial_state > 0 else 0
            if not _runs_ok(hist, abs(g.initial_state), u[i].astype(int), g.min_on, g.min_off):
                ok = False
                break
        if not ok:
            continue
        A_ub, b_ub = [], []

        def row(coef):
            a = np.zeros(N * H)
            for (i, h), v in coef.items():
                a[i * H + h] += v
            return a

        for i, g in enumerate(case.units):
            u0 = 1.0 if g.initial_state > 0 else 0.0
            p0 = g.p_initial if g.p_initial is not None else (g.p_min if u0 else 0.0)
            for h in range(H - 1):
                A_ub.append(row({(i, h + 1): 1, (i, h): -1}))
                b_ub.append(u[i, h] * g.ramp_up + (1 - u[i, h]) * g.p_max)
                A_ub.append(row({(i, h): 1, (i, h + 1): -1}))
                b_ub.append(u[i, h + 1] * g.ramp_down + (1 - u[i, h + 1]) * g.p_max)
            A_ub.append(row({(i, 0): 1}))
            b_ub.append(p0 + u0 * g.ramp_up + (1 - u0) * g.p_max)
            A_ub.append(row({(i, 0): -1}))
            b_ub.append(-p0 + u[i, 0] * g.ramp_down + (1 - u[i, 0]) * g.p_max)
        A_eq, b_eq = [], []
        for h in range(H):
            allp = row({(i, h): 1 for i in range(N)})
            A_eq.append(allp)
            b_eq.append(D[h] - wind[:, h].sum())
            A_ub.append(allp)
            b_ub.append(u[:, h] @ pmax - case.reserve_up[h] * D[h])
            A_ub.append(-allp)
            b_ub.append(-(u[:, h] @ pmin + case.reserve_down[h] * D[h]))
            for k, ln in enumerate(case.lines):
                a = row({(i, h): (ptdf @ G)[k, i] for i in range(N)})
                fixed = ptdf[k] @ (Wm @ wind[:, h] - case.loads[:, h])
                A_ub.append(a)
                b_ub.append(ln.limit - fixed)
                A_ub.append(-a)
                b_ub.append(ln.limit + fixed)
        bounds = [(u[i, h] * case.units[i].p_min, u[i, h] * case.units[i].p_max)
                  for i in range(N) for h in range(H)]
        cost = np.array([g.energy_cost for g in case.units for _ in range(H)])
        res = linprog(cost, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=np.array(A_eq), b_eq=b_eq,
                      bounds=bounds, method="highs")
        if res.status != 0:
            continue
        fixed_cost = 0.0
        for i, g in enumerate(case.units):
            prev = 1.0 if g.initial_state > 0 else 0.0
            for h in range(H):
                fixed_cost += g.min_run_cost * u[i, h] + g.startup_cost * max(0.0, u[i, h] - prev)
                prev = u[i, h]
        best = min(best, fixed_cost + res.fun)
    return best
