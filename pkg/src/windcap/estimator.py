"""Bisection on the box probability, and Monte Carlo checks of the resulting bound."""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .admissibility import (WorstCaseResult, assemble_standard_form, build_ck,
                            estimate_rho_bounds, solve_ck, solve_fw)
from .certificates import Certifier
from .commitment import CommitmentSchedule, NonConclusiveSolve, derive_ck_constants
from .model import SystemCase, compute_ptdf
from .optkit import SolverOptions
from .uncertainty import (ALPHA_CAP, UncertaintyModel, build_box, contains_many,
                          sample_indexed, sample_scenarios)

DEFAULT_EPS_ALPHA = 5e-4
# seconds per corner MILP before falling back to the certified bounds
DEFAULT_TIME_LIMIT = 3.0
LOWER_BOUND_INFEASIBLE = "lower-bound-infeasible"
NON_MONOTONE = "non-monotone"
ABOVE_CAP = "above-alpha-cap"


def default_eps_f(case: SystemCase) -> float:
    return 1e-6 * max(1.0, float(case.loads.sum()))


@dataclass
class FwEval:
    """Outcome of one worst-case evaluation as the bisection sees it."""

    value: float
    bound: float | None = None
    conclusive: bool = True
    detail: WorstCaseResult | None = None


@dataclass
class TraceRow:
    iteration: int
    alpha_lo: float
    alpha_hi: float
    alpha_mid: float
    fw: float
    conclusive: bool


@dataclass
class EstimateResult:
    alpha0: float
    trace: list[TraceRow]
    wall_time: float
    eps_alpha: float
    eps_f: float
    alpha_lo: float
    alpha_hi: float
    flags: list[str] = field(default_factory=list)
    worst_case: WorstCaseResult | None = None

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "alpha_lo": self.alpha_lo,
            "alpha_hi": self.alpha_hi,
            "eps_alpha": self.eps_alpha,
            "eps_f": self.eps_f,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "flags": self.flags,
            "trace": [asdict(r) for r in self.trace],
            "worst_case": None if self.worst_case is None else self.worst_case.to_dict(),
        }


class BisectionAborted(NonConclusiveSolve):
    """A worst-case solve could not decide the sign of F_w - eps_f."""


def _as_eval(r) -> FwEval:
    if isinstance(r, FwEval):
        return r
    return FwEval(float(r))


def _feasible(ev: FwEval, eps_f: float) -> bool | None:
    if ev.conclusive:
        return ev.value <= eps_f
    if ev.bound is not None and ev.bound <= eps_f:
        return True
    if ev.value is not None and not math.isnan(ev.value) and ev.value > eps_f:
        return False
    return None


def bisect(fw: Callable[[float], FwEval | float], eps_alpha: float = DEFAULT_EPS_ALPHA,
           eps_f: float = 0.0, alpha_lo: float = 0.0, alpha_hi: float = ALPHA_CAP,
           alpha_cap: float = ALPHA_CAP, preflight: bool = True) -> EstimateResult:
    """Largest alpha with ``fw(alpha) <= eps_f``, assuming ``fw`` nondecreasing.

    Midpoints above ``alpha_cap`` are treated as infeasible without a solve,
    which can only lower the estimate.
    """
    if not 0.0 <= alpha_lo < alpha_hi <= 1.0:
        raise ValueError("need 0 <= alpha_lo < alpha_hi <= 1")
    if eps_alpha <= 0 or eps_f < 0:
        raise ValueError("eps_alpha must be positive and eps_f nonnegative")
    t0 = time.perf_counter()
    trace: list[TraceRow] = []
    flags: list[str] = []
    evaluated: list[tuple[float, float]] = []
    worst = None
    lo, hi = alpha_lo, alpha_hi

    def result():
        return EstimateResult((lo + hi) / 2, trace, time.perf_counter() - t0, eps_alpha, eps_f,
                              lo, hi, flags, worst)

    if preflight:
        ev = _as_eval(fw(alpha_lo))
        ok = _feasible(ev, eps_f)
        if ok is None:
            raise BisectionAborted(f"non-conclusive worst-case solve at alpha={alpha_lo}", result())
        if ev.detail is not None:
            worst = ev.detail
        if not ok:
            flags.append(LOWER_BOUND_INFEASIBLE)
            res = result()
            res.alpha0 = alpha_lo
            return res
        evaluated.append((alpha_lo, ev.value))

    it = 0
    while hi - lo > eps_alpha:
        it += 1
        mid = (lo + hi) / 2
        if mid > alpha_cap:
            if ABOVE_CAP not in flags:
                flags.append(ABOVE_CAP)
            trace.append(TraceRow(it, lo, hi, mid, math.nan, True))
            hi = mid
            continue
        ev = _as_eval(fw(mid))
        ok = _feasible(ev, eps_f)
        trace.append(TraceRow(it, lo, hi, mid, ev.value, ev.conclusive or ok is not None))
        if ok is None:
            raise BisectionAborted(f"non-conclusive worst-case solve at alpha={mid}", result())
        if ev.detail is not None:
            worst = ev.detail
        for a, v in evaluated:
            if (a < mid and v > ev.value + max(eps_f, 1e-9)) or (a > mid and v + max(eps_f, 1e-9) < ev.value):
                if NON_MONOTONE not in flags:
                    flags.append(NON_MONOTONE)
        evaluated.append((mid, ev.value))
        if ok:
            lo = mid
        else:
            hi = mid
    return result()


@dataclass
class Pipeline:
    """Everything fixed by the commitment that the bisection reuses across alphas."""

    case: SystemCase
    schedule: CommitmentSchedule
    model: UncertaintyModel
    options: SolverOptions | None = None
    backend: str | None = None
    rho_method: str = "interval"
    time_limit: float | None = DEFAULT_TIME_LIMIT

    def __post_init__(self):
        self.ptdf = compute_ptdf(self.case)
        self.constants = derive_ck_constants(self.case, self.schedule)
        self.sf = assemble_standard_form(
            build_ck(self.case, self.constants, self.case.wind_forecast(), self.ptdf))
        self.rho_bounds = estimate_rho_bounds(self.sf, self.model, self.rho_method,
                                              self.options, self.backend)
        self.certifier = Certifier(self.sf, self.model, self.case.wind_forecast(),
                                   self.case.horizon, self.backend)

    def fw(self, alpha: float, dump_model: str | None = None) -> FwEval:
        r = solve_fw(self.case, self.constants, self.model, alpha, self.options, self.backend,
                     ptdf=self.ptdf, sf=self.sf, rho_bounds=self.rho_bounds, dump_model=dump_model,
                     time_limit=self.time_limit, certifier=self.certifier)
        return FwEval(r.value, r.bound, r.conclusive, r)


def bisect_alpha(case: SystemCase, schedule: CommitmentSchedule, model: UncertaintyModel,
                 eps_alpha: float = DEFAULT_EPS_ALPHA, eps_f: float | None = None,
                 alpha_lo: float = 0.0, alpha_hi: float = ALPHA_CAP,
                 options: SolverOptions | None = None, backend: str | None = None,
                 rho_method: str = "interval",
                 time_limit: float | None = DEFAULT_TIME_LIMIT) -> EstimateResult:
    eps_f = default_eps_f(case) if eps_f is None else eps_f
    pipe = Pipeline(case, schedule, model, options, backend, rho_method, time_limit)
    return bisect(pipe.fw, eps_alpha, eps_f, alpha_lo, alpha_hi)


def write_trace_csv(path, result: EstimateResult) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iter", "alpha_lo", "alpha_hi", "alpha_mid", "fw", "conclusive"])
        for r in result.trace:
            wr.writerow([r.iteration, repr(r.alpha_lo), repr(r.alpha_hi), repr(r.alpha_mid),
                         repr(r.fw), int(r.conclusive)])


# -- Monte Carlo ------------------------------------------------------------------

@dataclass
class ValidationReport:
    n: int
    feasible_fraction: float
    coverage_fraction: float
    seed: int
    alpha0: float
    eps_f: float
    standard_error: float
    bound_holds: bool
    alpha_bound_holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


_WORKER: dict = {}


def _worker_init(case, constants, eps_f, options, backend):
    _WORKER.update(case=case, constants=constants, eps_f=eps_f, options=options,
                   backend=backend, ptdf=compute_ptdf(case))


def _worker_check(w_full) -> float:
    s = _WORKER
    return solve_ck(s["case"], s["constants"], w_full, s["options"], s["backend"], s["ptdf"]).value


def _full_matrix(case: SystemCase, model: UncertaintyModel, samples: np.ndarray) -> np.ndarray:
    full = np.tile(case.wind_forecast(), (samples.shape[0], 1))
    coords = model.coords if model.coords is not None else np.arange(full.shape[1])
    full[:, coords] = samples
    return full


def check_values(case, constants, full: np.ndarray, options=None, backend=None,
                 workers: int = 1) -> np.ndarray:
    """Primal check value for each row of ``full``; order is independent of ``workers``."""
    if workers <= 1:
        _worker_init(case, constants, 0.0, options, backend)
        return np.array([_worker_check(w) for w in full])
    with ProcessPoolExecutor(workers, initializer=_worker_init,
                             initargs=(case, constants, 0.0, options, backend)) as ex:
        return np.array(list(ex.map(_worker_check, list(full), chunksize=8)))


def monte_carlo_validate(case: SystemCase, schedule: CommitmentSchedule, model: UncertaintyModel,
                         alpha0: float, n: int, seed: int, eps_f: float | None = None,
                         options: SolverOptions | None = None, backend: str | None = None,
                         workers: int = 1) -> ValidationReport:
    """Empirical full-accommodation probability against coverage of the box at ``alpha0``.

    Every point of the box is accommodable, so the feasible fraction should
    not fall below the coverage fraction (nor ``alpha0`` itself) by more
    than sampling noise, taken as 4 binomial standard errors.  Sample ``i``
    uses the stream ``seed + i``, so results do not depend on ``workers``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eps_f = default_eps_f(case) if eps_f is None else eps_f
    constants = derive_ck_constants(case, schedule)
    samples = sample_indexed(model, n, seed)
    box = build_box(model, alpha0)
    coverage = float(contains_many(box, model, samples, tol=1e-9).mean())
    values = check_values(case, constants, _full_matrix(case, model, samples), options, backend,
                          workers)
    feasible = float((values <= eps_f).mean())
    se = math.sqrt(max(coverage * (1 - coverage), 1e-12) / n)
    se_a = math.sqrt(max(alpha0 * (1 - alpha0), 1e-12) / n)
    return ValidationReport(n, feasible, coverage, seed, alpha0, eps_f, se,
                            feasible >= coverage - 4 * se, feasible >= alpha0 - 4 * se_a)


def coverage_experiment(model: UncertaintyModel, alpha: float, n: int, reps: int, seed: int):
    """Fraction of normal samples inside the box, repeated ``reps`` times (seeds seed..seed+reps-1)."""
    box = build_box(model, alpha)
    fr = np.array([contains_many(box, model, sample_scenarios(model, n, seed + r), tol=1e-9).mean()
                   for r in range(reps)])
    return {"alpha": alpha, "n": n, "reps": reps, "seed": seed, "mean": float(fr.mean()),
            "std": float(fr.std(ddof=1)) if reps > 1 else 0.0, "fractions": fr.tolist()}


def save_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, default=float))
