"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
under capture) or directly with ``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import desk_cases
from oracles import corner_oracle, fc_oracle, uc_bruteforce
from windcap.admissibility import assemble_standard_form, build_ck, solve_ck
from windcap.commitment import derive_ck_constants, solve_uc
from windcap.estimator import (FwEval, bisect, bisect_alpha, check_values, default_eps_f,
                               monte_carlo_validate)
from windcap.admissibility import solve_fw
from windcap.model import bundled_case_path, load_case
from windcap.uncertainty import (build_box, build_covariance, case_uncertainty, contains_many,
                                 hourly_profile, sample_scenarios)


@pytest.fixture
def report(request):
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def emit(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print("\n" + line, flush=True)
        else:
            print(line, flush=True)
        assert ok, line
    return emit


def _two_hour(w_e=(1.0, 1.0)):
    sigma, corr = hourly_profile(24)
    sel = [0, 14]
    return build_covariance(sigma[sel], corr[np.ix_(sel, sel)], list(w_e))


def _sig3(x):
    return float(f"{x:.3g}")


def test_criterion_1_covariance(report):
    t0 = time.perf_counter()
    lam = _two_hour().lam
    dt = time.perf_counter() - t0
    want = np.array([[0.00250, 0.00182], [0.00182, 0.00647]])
    got = np.vectorize(_sig3)(lam)
    ok = np.array_equal(got, want) and dt < 1.0
    report(1, ok, f"Lambda={got.tolist()} in {dt:.3f}s")


def test_criterion_2_coverage(report):
    model = _two_hour()
    t0 = time.perf_counter()
    box = build_box(model, 0.95)
    fr = [contains_many(box, model, sample_scenarios(model, 2000, r), tol=1e-9).mean()
          for r in range(100)]
    dt = time.perf_counter() - t0
    mean = float(np.mean(fr))
    report(2, 0.945 <= mean <= 0.956 and dt < 30, f"mean coverage {100 * mean:.3f}% in {dt:.2f}s")


def test_criterion_3_extreme_points(report):
    t0 = time.perf_counter()
    worst, count, nonzero = 0.0, 0, 0
    for case, sched in desk_cases(20, seed=0):
        consts = derive_ck_constants(case, sched)
        model = case_uncertainty(case)
        assert model.m <= 8
        for alpha in (0.5, 0.95):
            val = solve_fw(case, consts, model, alpha, backend="highs").value
            z = build_box(model, alpha).u[0]
            ref = corner_oracle(case, sched.u_star, model.w_e, model.lam_sqrt, model.coords, z)
            worst = max(worst, abs(val - ref) / max(1.0, abs(ref)))
            count += 1
            nonzero += ref > 1e-6
    dt = time.perf_counter() - t0
    report(3, worst <= 1e-6 and dt < 300,
           f"{count} solves on 20 cases ({nonzero} nonzero), max rel err {worst:.2e}, {dt:.1f}s")


def test_criterion_4_strong_duality(report):
    rng = np.random.default_rng(4)
    worst, count = 0.0, 0
    for case, sched in desk_cases(10, seed=4):
        consts = derive_ck_constants(case, sched)
        sf = assemble_standard_form(build_ck(case, consts, case.wind_forecast()))
        for _ in range(10):
            w = case.wind_forecast() * rng.uniform(0.0, 2.0, case.n_wind * case.horizon)
            primal = solve_ck(case, consts, w, backend="embedded").value
            dual = linprog(-(sf.T @ w - sf.m_vec), A_ub=-sf.Q.T.toarray(),
                           b_ub=np.ones(sf.Q.shape[1]), A_eq=sf.M.T.toarray(),
                           b_eq=np.zeros(sf.M.shape[1]), bounds=[(0, None)] * sf.n_rows,
                           method="highs")
            worst = max(worst, abs(primal + dual.fun) / max(1.0, abs(primal)))
            count += 1
    report(4, count >= 100 and worst <= 1e-6, f"{count} instances, max rel gap {worst:.2e}")


def test_criterion_5_bisection(report):
    res = bisect(lambda a: 0.0, 5e-4, 0.0, 0.0, 1.0, alpha_cap=1.0)
    rng = np.random.default_rng(5)
    errs = []
    for theta in rng.uniform(0.01, 0.99, 20):
        r = bisect(lambda a, t=theta: FwEval(max(0.0, a - t)), 5e-4, 0.0, 0.0, 1.0)
        errs.append(abs(r.alpha0 - theta))
    ok = res.iterations == 11 and max(errs) <= 5e-4
    report(5, ok, f"{res.iterations} iterations; max |alpha0 - truth| = {max(errs):.2e} on 20 stubs")


def test_criterion_6_lower_bound(report, desk_estimate):
    case, sched, model, res = desk_estimate
    eps_f = default_eps_f(case)
    box = build_box(model, res.alpha0)
    rng = np.random.default_rng(6)
    V = rng.uniform(box.x_lo, box.x_hi, size=(500, model.m))
    full = np.tile(case.wind_forecast(), (500, 1))
    full[:, model.coords] = V @ model.lam_sqrt.T
    vals = check_values(case, derive_ck_constants(case, sched), full, backend="highs")
    n = 1000
    rep = monte_carlo_validate(case, sched, model, res.alpha0, n, seed=6, backend="highs")
    se = math.sqrt(rep.coverage_fraction * (1 - rep.coverage_fraction) / n)
    ok = bool(np.all(vals <= eps_f + 1e-6)) and rep.feasible_fraction >= rep.coverage_fraction - 4 * se
    report(6, ok, f"alpha0={res.alpha0:.4f}: max F_c in box {vals.max():.2e} (500 pts); "
                  f"feasible {rep.feasible_fraction:.3f} vs coverage {rep.coverage_fraction:.3f} "
                  f"(4SE {4 * se:.3f})")


def test_criterion_7_uc(report, case3):
    sched = solve_uc(case3, backend="embedded")
    ref = uc_bruteforce(case3)
    ok = abs(sched.objective - ref) <= 1e-9 * max(1.0, abs(ref))
    report(7, ok, f"embedded UC {sched.objective:.9f} vs enumeration {ref:.9f}")


def test_criterion_8_case39(report):
    case = load_case(bundled_case_path("case39"))
    t0 = time.perf_counter()
    sched = solve_uc(case, backend="highs")
    res = bisect_alpha(case, sched, case_uncertainty(case), backend="highs")
    dt = time.perf_counter() - t0
    fw = [r.fw for r in sorted(res.trace, key=lambda r: r.alpha_mid)]
    monotone = all(b >= a - 1e-7 * max(1.0, abs(a)) for a, b in zip(fw, fw[1:]))
    wc = res.worst_case
    agree = wc is not None and abs(wc.check_value - wc.value) <= 1e-5 * max(1.0, abs(wc.value))
    ok = 0 < res.alpha0 < 0.5 and monotone and agree and dt < 120 and not res.flags \
        and all(r.conclusive for r in res.trace)
    report(8, ok, f"alpha0={100 * res.alpha0:.4f}%, {res.iterations} iterations, F_w monotone "
                  f"{monotone}, cross-check {wc.value:.9g} vs {wc.check_value:.9g}, {dt:.1f}s (highs)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
