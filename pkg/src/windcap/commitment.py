"""Day-ahead unit commitment at forecast wind, and the constants it fixes for dispatch checks."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import SystemCase, bus_map, compute_ptdf
from .optkit import LinearModel, SolverOptions, Status, get_backend


class UCInfeasibleError(RuntimeError):
    """No commitment satisfies the case; inspect load, reserves and line limits."""


class NonConclusiveSolve(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass
class CommitmentSchedule:
    u_star: np.ndarray
    v: np.ndarray
    p: np.ndarray
    objective: float

    def to_dict(self) -> dict:
        return {"u": self.u_star.astype(int).tolist(), "v": self.v.round(12).tolist(),
                "p": self.p.tolist(), "objective": self.objective}

    @classmethod
    def from_dict(cls, d: dict) -> "CommitmentSchedule":
        u = np.asarray(d["u"], float)
        p = np.asarray(d["p"], float)
        v = np.asarray(d["v"], float) if "v" in d else np.zeros_like(u)
        return cls(u, v, p, float(d["objective"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "CommitmentSchedule":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def table(self, case: SystemCase) -> str:
        H = self.u_star.shape[1]
        head = "unit  " + "".join(f"{h + 1:>3d}" for h in range(H))
        rows = [head]
        for i, unit in enumerate(case.units):
            rows.append(f"{unit.id:<6s}" + "".join("  #" if x > 0.5 else "  ." for x in self.u_star[i]))
        return "\n".join(rows)


@dataclass
class CkConstants:
    p_lo: np.ndarray   # N x H
    p_hi: np.ndarray   # N x H
    dp_lo: np.ndarray  # N x (H-1), allowed decrease from h to h+1
    dp_hi: np.ndarray  # N x (H-1), allowed increase from h to h+1
    r_lo: np.ndarray   # H
    r_hi: np.ndarray   # H


class UCIndex:
    """Column positions of u, v, p in the UC model."""

    def __init__(self, N: int, H: int):
        self.N, self.H = N, H

    def u(self, i, h):
        return i * self.H + h

    def v(self, i, h):
        return self.N * self.H + i * self.H + h

    def p(self, i, h):
        return 2 * self.N * self.H + i * self.H + h


def _initial_fixings(unit, H):
    """Hours (0-based) at the start of the horizon forced on/off by the initial state."""
    if unit.initial_state > 0:
        return 1.0, max(0, min(H, unit.min_on - unit.initial_state))
    return 0.0, max(0, min(H, unit.min_off + unit.initial_state))


def build_uc(case: SystemCase, ptdf: np.ndarray | None = None,
             initial_ramp: bool = True) -> tuple[LinearModel, UCIndex]:
    N, H = case.n_units, case.horizon
    ptdf = compute_ptdf(case) if ptdf is None else ptdf
    ix = UCIndex(N, H)
    mdl = LinearModel("min", name="uc")
    for i, g in enumerate(case.units):
        for h in range(H):
            mdl.add_var(0, 1, obj=g.min_run_cost, binary=True, name=f"u[{g.id},{h + 1}]")
    for i, g in enumerate(case.units):
        for h in range(H):
            mdl.add_var(0, 1, obj=g.startup_cost, name=f"v[{g.id},{h + 1}]")
    for i, g in enumerate(case.units):
        for h in range(H):
            mdl.add_var(0, g.p_max, obj=g.energy_cost, name=f"p[{g.id},{h + 1}]")

    for i, g in enumerate(case.units):
        state, forced = _initial_fixings(g, H)
        for h in range(forced):
            mdl.set_bounds(ix.u(i, h), state, state)
        u0 = 1.0 if g.initially_on else 0.0
        for h in range(H):
            # startup: v_h >= u_h - u_{h-1}
            if h == 0:
                mdl.add_row([ix.v(i, 0), ix.u(i, 0)], [1, -1], ">=", -u0, f"startup[{g.id},1]")
            else:
                mdl.add_row([ix.v(i, h), ix.u(i, h), ix.u(i, h - 1)], [1, -1, 1], ">=", 0,
                            f"startup[{g.id},{h + 1}]")
            # minimum up: u_k >= u_h - u_{h-1}
            for k in range(h + 1, min(h + g.min_on, H)):
                if h == 0:
                    mdl.add_row([ix.u(i, k), ix.u(i, 0)], [1, -1], ">=", -u0, f"minon[{g.id},1,{k + 1}]")
                else:
                    mdl.add_row([ix.u(i, k), ix.u(i, h), ix.u(i, h - 1)], [1, -1, 1], ">=", 0,
                                f"minon[{g.id},{h + 1},{k + 1}]")
            # minimum down: u_k <= 1 - u_{h-1} + u_h
            for k in range(h + 1, min(h + g.min_off, H)):
                if h == 0:
                    mdl.add_row([ix.u(i, k), ix.u(i, 0)], [1, -1], "<=", 1 - u0,
                                f"minoff[{g.id},1,{k + 1}]")
                else:
                    mdl.add_row([ix.u(i, k), ix.u(i, h - 1), ix.u(i, h)], [1, 1, -1], "<=", 1,
                                f"minoff[{g.id},{h + 1},{k + 1}]")
            mdl.add_row([ix.p(i, h), ix.u(i, h)], [1, -g.p_min], ">=", 0, f"pmin[{g.id},{h + 1}]")
            mdl.add_row([ix.p(i, h), ix.u(i, h)], [1, -g.p_max], "<=", 0, f"pmax[{g.id},{h + 1}]")
        for h in range(H - 1):
            mdl.add_row([ix.p(i, h + 1), ix.p(i, h), ix.u(i, h)], [1, -1, g.p_max - g.ramp_up],
                        "<=", g.p_max, f"rampup[{g.id},{h + 1}]")
            mdl.add_row([ix.p(i, h), ix.p(i, h + 1), ix.u(i, h + 1)], [1, -1, g.p_max - g.ramp_down],
                        "<=", g.p_max, f"rampdn[{g.id},{h + 1}]")
        if initial_ramp:
            p0 = g.p0
            up = u0 * g.ramp_up + (1 - u0) * g.p_max
            mdl.add_row([ix.p(i, 0)], [1], "<=", p0 + up, f"rampup[{g.id},0]")
            mdl.add_row([ix.p(i, 0), ix.u(i, 0)], [-1, g.p_max - g.ramp_down], "<=", g.p_max - p0,
                        f"rampdn[{g.id},0]")

    D = case.total_load
    wind = case.wind_forecast().reshape(case.n_wind, H) if case.n_wind else np.zeros((0, H))
    for h in range(H):
        cols = [ix.p(i, h) for i in range(N)]
        mdl.add_row(cols, np.ones(N), "=", D[h] - wind[:, h].sum(), f"balance[{h + 1}]")
    for h in range(H):
        cols = [ix.u(i, h) for i in range(N)] + [ix.p(i, h) for i in range(N)]
        pmax = [g.p_max for g in case.units]
        pmin = [g.p_min for g in case.units]
        mdl.add_row(cols, pmax + [-1.0] * N, ">=", case.reserve_up[h] * D[h], f"resup[{h + 1}]")
        mdl.add_row(cols, [-x for x in pmin] + [1.0] * N, ">=", case.reserve_down[h] * D[h],
                    f"resdn[{h + 1}]")

    G, Wm = bus_map(case)
    Hg = ptdf @ G                     # lines x units
    net_fixed = ptdf @ (Wm @ wind - case.loads)  # lines x hours
    for k, ln in enumerate(case.lines):
        for h in range(H):
            cols = [ix.p(i, h) for i in range(N)]
            mdl.add_row(cols, Hg[k], "<=", ln.limit - net_fixed[k, h], f"flowmax[{ln.id},{h + 1}]")
            mdl.add_row(cols, Hg[k], ">=", -ln.limit - net_fixed[k, h], f"flowmin[{ln.id},{h + 1}]")
    return mdl, ix


def solve_uc(case: SystemCase, options: SolverOptions | None = None, backend: str | None = None,
             initial_ramp: bool = True, dump_model: str | None = None) -> CommitmentSchedule:
    mdl, ix = build_uc(case, initial_ramp=initial_ramp)
    if dump_model:
        Path(dump_model).write_text(mdl.to_lp_text())
    out = get_backend(backend).solve_milp(mdl, options)
    if out.status == Status.INFEASIBLE:
        raise UCInfeasibleError(
            "unit commitment is infeasible: check load against committed capacity, "
            "reserve fractions and line limits")
    if out.status != Status.OPTIMAL:
        raise NonConclusiveSolve(f"unit commitment solve ended with status {out.status.value}")
    N, H = case.n_units, case.horizon
    x = out.primal
    u = np.where(x[:N * H] > 0.5, 1.0, 0.0).reshape(N, H)
    v = x[N * H:2 * N * H].reshape(N, H)
    p = x[2 * N * H:].reshape(N, H)
    sched = CommitmentSchedule(u, np.clip(v, 0.0, 1.0), p, float(out.objective_value))
    return sched


def check_schedule(case: SystemCase, s: CommitmentSchedule, tol: float = 1e-6,
                   initial_ramp: bool = True) -> list[str]:
    """Direct substitution of a schedule into the UC constraints; returns violations."""
    bad = []
    H = case.horizon
    u, v, p = s.u_star, s.v, s.p
    ptdf = compute_ptdf(case)
    for i, g in enumerate(case.units):
        u0 = 1.0 if g.initially_on else 0.0
        prev = np.concatenate([[u0], u[i, :-1]])
        if np.any(v[i] < u[i] - prev - tol):
            bad.append(f"startup indicator too small for unit {g.id}")
        # run lengths including history
        state, forced = _initial_fixings(g, H)
        if np.any(u[i, :forced] != state):
            bad.append(f"unit {g.id} violates its initial min on/off obligation")
        for h in range(H):
            if u[i, h] - prev[h] > 0.5:
                end = min(h + g.min_on, H)
                if np.any(u[i, h:end] < 0.5):
                    bad.append(f"unit {g.id} min-on violated after start at hour {h + 1}")
            if prev[h] - u[i, h] > 0.5:
                end = min(h + g.min_off, H)
                if np.any(u[i, h:end] > 0.5):
                    bad.append(f"unit {g.id} min-off violated after stop at hour {h + 1}")
            if p[i, h] < u[i, h] * g.p_min - tol or p[i, h] > u[i, h] * g.p_max + tol:
                bad.append(f"unit {g.id} output out of range at hour {h + 1}")
        for h in range(H - 1):
            if p[i, h + 1] - p[i, h] > u[i, h] * g.ramp_up + (1 - u[i, h]) * g.p_max + tol:
                bad.append(f"unit {g.id} ramp-up violated at hour {h + 1}")
            if p[i, h] - p[i, h + 1] > u[i, h + 1] * g.ramp_down + (1 - u[i, h + 1]) * g.p_max + tol:
                bad.append(f"unit {g.id} ramp-down violated at hour {h + 1}")
        if initial_ramp:
            if p[i, 0] - g.p0 > u0 * g.ramp_up + (1 - u0) * g.p_max + tol:
                bad.append(f"unit {g.id} initial ramp-up violated")
            if g.p0 - p[i, 0] > u[i, 0] * g.ramp_down + (1 - u[i, 0]) * g.p_max + tol:
                bad.append(f"unit {g.id} initial ramp-down violated")
    D = case.total_load
    wind = case.wind_forecast().reshape(case.n_wind, H) if case.n_wind else np.zeros((0, H))
    pmax = np.array([g.p_max for g in case.units])
    pmin = np.array([g.p_min for g in case.units])
    G, Wm = bus_map(case)
    for h in range(H):
        if abs(p[:, h].sum() + wind[:, h].sum() - D[h]) > tol:
            bad.append(f"power balance off at hour {h + 1}")
        if (u[:, h] * pmax - p[:, h]).sum() < case.reserve_up[h] * D[h] - tol:
            bad.append(f"up reserve short at hour {h + 1}")
        if (p[:, h] - u[:, h] * pmin).sum() < case.reserve_down[h] * D[h] - tol:
            bad.append(f"down reserve short at hour {h + 1}")
        flow = ptdf @ (G @ p[:, h] + Wm @ wind[:, h] - case.loads[:, h])
        lim = np.array([ln.limit for ln in case.lines])
        if np.any(np.abs(flow) > lim + tol):
            bad.append(f"line limit exceeded at hour {h + 1}")
    return bad


def derive_ck_constants(case: SystemCase, s: CommitmentSchedule) -> CkConstants:
    u = s.u_star
    pmin = np.array([g.p_min for g in case.units])[:, None]
    pmax = np.array([g.p_max for g in case.units])[:, None]
    rup = np.array([g.ramp_up for g in case.units])[:, None]
    rdn = np.array([g.ramp_down for g in case.units])[:, None]
    D = case.total_load
    return CkConstants(
        p_lo=u * pmin,
        p_hi=u * pmax,
        dp_lo=u[:, 1:] * rdn + (1 - u[:, 1:]) * pmax,
        dp_hi=u[:, :-1] * rup + (1 - u[:, :-1]) * pmax,
        r_lo=(u * pmin).sum(axis=0) + case.reserve_down * D,
        r_hi=(u * pmax).sum(axis=0) - case.reserve_up * D,
    )
