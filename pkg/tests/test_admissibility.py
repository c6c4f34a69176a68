import copy
import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linprog

from conftest import desk_cases
from oracles import ck_residuals_oracle, corner_oracle, fc_oracle
from windcap.admissibility import (StandardFormCK, assemble_standard_form, build_ck,
                                   build_dual_milp, estimate_rho_bounds, max_over_corners,
                                   rho_map, solve_ck, solve_fw)
from windcap.commitment import derive_ck_constants, solve_uc
from windcap.model import case_from_dict, case_to_dict
from windcap.uncertainty import UncertaintyModel, box_corner, build_box, case_uncertainty


@pytest.fixture(scope="module")
def desk():
    return desk_cases(8, seed=5)


@pytest.fixture(scope="module")
def case3_sf(case3, case3_consts):
    return assemble_standard_form(build_ck(case3, case3_consts, case3.wind_forecast()))


def test_forecast_is_feasible(case3, case3_consts):
    rep = solve_ck(case3, case3_consts, case3.wind_forecast())
    assert rep.value == 0.0 and rep.feasible


def test_zero_line_limit_shows_up_as_line_violation(case3, case3_sched):
    # cases require positive limits, so zero the corridor on a validated copy
    tight = copy.deepcopy(case3)
    tight.lines[1] = dataclasses.replace(tight.lines[1], limit=0.0)
    rep = solve_ck(tight, derive_ck_constants(tight, case3_sched), tight.wind_forecast())
    assert rep.value > 0
    assert rep.slack_breakdown["line"] == pytest.approx(rep.value, rel=1e-9)
    assert rep.value == pytest.approx(fc_oracle(tight, case3_sched.u_star, tight.wind_forecast()))


def test_wind_loss_shows_up_in_balance_or_reserve():
    # a single unit with no headroom left to replace the wind
    case = case_from_dict({
        "buses": 1, "slack_bus": 0, "horizon": 2, "lines": [],
        "units": [{"id": "A", "bus": 0, "p_min": 10.0, "p_max": 100.0, "ramp_up": 100.0,
                   "ramp_down": 100.0, "startup_cost": 0.0, "energy_cost": 1.0,
                   "min_run_cost": 0.0, "min_on": 1, "min_off": 1, "initial_state": 1}],
        "loads": [[120.0, 120.0]], "wind": [{"bus": 0, "forecast": [40.0, 40.0]}],
        "reserve_up": 0.1, "reserve_down": 0.1,
    })
    sched = solve_uc(case)
    consts = derive_ck_constants(case, sched)
    rep = solve_ck(case, consts, np.zeros(2))
    # per hour: 120 MW against a reserve-limited 88 MW ceiling
    assert rep.value == pytest.approx(64.0)
    assert rep.value == pytest.approx(fc_oracle(case, sched.u_star, np.zeros(2)))
    assert rep.slack_breakdown["balance"] + rep.slack_breakdown["reserve"] == pytest.approx(64.0)


def test_row_count(case3, case3_sf):
    N, H, K = 2, 4, 3
    assert case3_sf.n_rows == 2 * N * H + 2 * N * (H - 1) + 2 * H + 2 * H + 2 * K * H


def test_slack_structure(case3_sf):
    Q = case3_sf.Q.tocsr()
    assert np.all(np.diff(Q.indptr) == 1) and np.all(Q.data == -1.0)


def test_residual_equivalence(desk):
    rng = np.random.default_rng(0)
    for case, sched in desk[:4]:
        consts = derive_ck_constants(case, sched)
        sf = assemble_standard_form(build_ck(case, consts, case.wind_forecast()))
        for _ in range(25):
            p = rng.uniform(-50, 200, case.n_units * case.horizon)
            w = rng.uniform(0, 60, case.n_wind * case.horizon)
            z = rng.uniform(0, 10, sf.Q.shape[1])
            got = sf.residual(p, w, np.zeros_like(z))
            want = ck_residuals_oracle(case, sched.u_star, p, w)
            np.testing.assert_allclose(np.sort(got), np.sort(want), atol=1e-10, rtol=0)
            # slack j relaxes exactly row slack_map[j]
            expect = np.zeros(sf.n_rows)
            expect[sf.slack_map] = -z
            np.testing.assert_allclose(sf.residual(p, w, z) - got, expect, atol=1e-10)


def test_strong_duality_bridge(desk):
    """max over dual-feasible delta of delta.(T w - m) equals the primal check at w."""
    rng = np.random.default_rng(2)
    for case, sched in desk[:4]:
        consts = derive_ck_constants(case, sched)
        sf = assemble_standard_form(build_ck(case, consts, case.wind_forecast()))
        R = sf.n_rows
        for _ in range(3):
            w = case.wind_forecast() * rng.uniform(0.3, 1.7, case.n_wind * case.horizon)
            c = -(sf.T @ w - sf.m_vec)
            res = linprog(c, A_ub=sf.Q.T.toarray() * -1, b_ub=np.ones(sf.Q.shape[1]),
                          A_eq=sf.M.T.toarray(), b_eq=np.zeros(sf.M.shape[1]),
                          bounds=[(0, None)] * R, method="highs")
            ref = fc_oracle(case, sched.u_star, w)
            assert -res.fun == pytest.approx(ref, rel=1e-6, abs=1e-7)


def test_alpha_zero_is_forecast_value(case3, case3_sched):
    d = case_to_dict(case3)
    d["lines"][1]["limit"] = 30.0
    tight = case_from_dict(d)
    consts = derive_ck_constants(tight, case3_sched)
    model = case_uncertainty(tight)
    res = solve_fw(tight, consts, model, 0.0)
    ref = fc_oracle(tight, case3_sched.u_star, tight.wind_forecast())
    assert ref > 0
    assert res.value == pytest.approx(ref, rel=1e-6)


def test_alpha_zero_feasible_uc(case3, case3_consts):
    assert solve_fw(case3, case3_consts, case_uncertainty(case3), 0.0).value == 0.0


def test_matches_corner_enumeration(desk):
    nonzero = 0
    for case, sched in desk:
        consts = derive_ck_constants(case, sched)
        model = case_uncertainty(case)
        for alpha in (0.5, 0.95):
            res = solve_fw(case, consts, model, alpha, backend="highs")
            z = build_box(model, alpha).u[0]
            ref = corner_oracle(case, sched.u_star, model.w_e, model.lam_sqrt, model.coords, z)
            assert res.conclusive
            assert res.value == pytest.approx(ref, rel=1e-6, abs=1e-6)
            nonzero += ref > 1e-6
    assert nonzero >= 3


def test_embedded_matches_exhaustive(case3, case3_consts):
    model = case_uncertainty(case3)
    res = solve_fw(case3, case3_consts, model, 0.9, backend="embedded")
    best, _ = max_over_corners(case3, case3_consts, model, 0.9)
    assert res.value == pytest.approx(best, rel=1e-6, abs=1e-7)
    assert res.check_value == pytest.approx(res.value, rel=1e-5, abs=1e-9)


def test_monotone_in_alpha(case3, case3_consts):
    model = case_uncertainty(case3)
    vals = [solve_fw(case3, case3_consts, model, a).value for a in (0.3, 0.6, 0.9)]
    assert vals[0] <= vals[1] + 1e-9 <= vals[2] + 2e-9


def test_linearization_is_exact(desk):
    for case, sched in desk[:4]:
        consts = derive_ck_constants(case, sched)
        model = case_uncertainty(case)
        box = build_box(model, 0.9)
        res = solve_fw(case, consts, model, 0.9, backend="highs")
        width = box.x_hi - box.x_lo
        np.testing.assert_allclose(res.t, res.tau * res.rho * width, atol=1e-6)
        sf = assemble_standard_form(build_ck(case, consts, case.wind_forecast()))
        # objective rebuilt in the original form: sum(t + rho x_lo) - delta . m
        obj = res.t.sum() + res.rho @ box.x_lo - res.delta @ sf.m_vec
        assert obj == pytest.approx(res.value, abs=1e-6 * max(1.0, res.value))


def test_all_upper_corner(case3):
    model = case_uncertainty(case3)
    box = build_box(model, 0.8)
    w = box_corner(model, box, np.ones(model.m))
    np.testing.assert_allclose(w, model.lam_sqrt @ box.x_hi, rtol=1e-12)
    np.testing.assert_allclose(w, model.w_e + model.lam_sqrt @ box.u, rtol=1e-12)


def _toy_sf(T):
    T = sp.csr_matrix(np.asarray(T, float))
    R = T.shape[0]
    return StandardFormCK(sp.csr_matrix((R, 1)), T, -sp.identity(R, format="csr"), np.zeros(R),
                          ["x"] * R, np.arange(R))


def test_rho_bounds_interval_examples():
    model = UncertaintyModel.from_covariance([1.0], [[1.0]])
    lo, hi = estimate_rho_bounds(_toy_sf([[2.0], [-3.0]]), model)
    assert (lo[0], hi[0]) == (-3.0, 2.0)
    lo, hi = estimate_rho_bounds(_toy_sf([[0.0], [0.0]]), model)
    assert lo[0] == hi[0] == 0.0


@pytest.mark.parametrize("method", ["interval", "lp"])
def test_rho_bounds_contain_dual_samples(desk, method):
    case, sched = desk[0]
    consts = derive_ck_constants(case, sched)
    sf = assemble_standard_form(build_ck(case, consts, case.wind_forecast()))
    model = case_uncertainty(case)
    lo, hi = estimate_rho_bounds(sf, model, method)
    A = rho_map(sf, model)
    R = sf.n_rows
    rng = np.random.default_rng(1)
    verts = []
    for _ in range(40):
        res = linprog(rng.normal(size=R), A_eq=sf.M.T.toarray(), b_eq=np.zeros(sf.M.shape[1]),
                      bounds=[(0, 1)] * R, method="highs")
        verts.append(res.x)
    V = np.array(verts)
    for _ in range(1000):
        lam = rng.dirichlet(np.ones(len(V)) * 0.3)
        rho = A @ (lam @ V)
        assert np.all(rho >= lo - 1e-9) and np.all(rho <= hi + 1e-9)
    for v in V:
        rho = A @ v
        assert np.all(rho >= lo - 1e-7) and np.all(rho <= hi + 1e-7)


def test_dual_milp_variable_layout(case3, case3_sf):
    model = case_uncertainty(case3)
    mdl, ix = build_dual_milp(case3_sf, model, build_box(model, 0.5), case3.wind_forecast())
    assert len(ix.tau) == model.m and len(ix.delta) == case3_sf.n_rows
    assert set(int(j) for j in ix.tau) == mdl.binary
