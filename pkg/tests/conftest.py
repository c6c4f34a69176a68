import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from windcap.commitment import UCInfeasibleError, derive_ck_constants, solve_uc  # noqa: E402
from windcap.estimator import bisect_alpha  # noqa: E402
from windcap.model import bundled_case_path, case_from_dict, load_case  # noqa: E402
from windcap.uncertainty import case_uncertainty  # noqa: E402


@pytest.fixture(scope="session")
def case3():
    return load_case(bundled_case_path("case3"))


@pytest.fixture(scope="session")
def case3_sched(case3):
    return solve_uc(case3)


@pytest.fixture(scope="session")
def case3_consts(case3, case3_sched):
    return derive_ck_constants(case3, case3_sched)


def desk_case_dict(rng, H=None):
    """Random 3-bus, 2-unit, 1-farm case; callers must still check the UC is feasible."""
    H = int(rng.integers(3, 7)) if H is None else H
    load = rng.uniform(70, 160) + rng.uniform(-25, 25, H)
    split = rng.uniform(0.0, 0.4)
    wind = rng.uniform(12, 45, H)
    return {
        "name": "desk",
        "buses": 3,
        "slack_bus": 2,
        "horizon": H,
        "lines": [
            {"id": "L01", "from": 0, "to": 1, "x": float(rng.uniform(0.05, 0.2)),
             "limit": float(rng.uniform(70, 130))},
            {"id": "L12", "from": 1, "to": 2, "x": float(rng.uniform(0.05, 0.2)),
             "limit": float(rng.uniform(70, 130))},
            {"id": "L02", "from": 0, "to": 2, "x": float(rng.uniform(0.05, 0.2)),
             "limit": float(rng.uniform(70, 130))},
        ],
        "units": [
            {"id": "G1", "bus": 0, "p_min": float(rng.uniform(10, 30)),
             "p_max": float(rng.uniform(130, 180)), "ramp_up": float(rng.uniform(30, 70)),
             "ramp_down": float(rng.uniform(30, 70)), "startup_cost": 200.0,
             "energy_cost": float(rng.uniform(8, 14)), "min_run_cost": 100.0,
             "min_on": int(rng.integers(1, 3)), "min_off": int(rng.integers(1, 3)),
             "initial_state": 3},
            {"id": "G2", "bus": 1, "p_min": float(rng.uniform(5, 15)),
             "p_max": float(rng.uniform(60, 90)), "ramp_up": float(rng.uniform(25, 50)),
             "ramp_down": float(rng.uniform(25, 50)), "startup_cost": 50.0,
             "energy_cost": float(rng.uniform(20, 30)), "min_run_cost": 40.0,
             "min_on": 1, "min_off": 1, "initial_state": int(rng.choice([-2, 2]))},
        ],
        "loads": [[0.0] * H, (load * split).tolist(), (load * (1 - split)).tolist()],
        "wind": [{"bus": int(rng.integers(0, 2)), "forecast": wind.tolist()}],
        "reserve_up": float(rng.uniform(0.03, 0.1)),
        "reserve_down": float(rng.uniform(0.03, 0.1)),
        "uncertainty": {"sigma_start": float(rng.uniform(0.1, 0.2)),
                        "sigma_end": float(rng.uniform(0.2, 0.35)), "corr_floor": 0.1},
    }


def desk_cases(count, seed=0, H=None):
    """``count`` random desk cases with feasible commitments, as (case, schedule) pairs."""
    rng = np.random.default_rng(seed)
    found = []
    while len(found) < count:
        case = case_from_dict(desk_case_dict(rng, H))
        try:
            sched = solve_uc(case, backend="highs")
        except UCInfeasibleError:
            continue
        found.append((case, sched))
    return found


@pytest.fixture(scope="session")
def desk_estimate():
    """A desk case whose threshold lies strictly inside (0, 1), with its estimate."""
    for case, sched in desk_cases(12, seed=40, H=4):
        model = case_uncertainty(case)
        res = bisect_alpha(case, sched, model, backend="highs")
        if 0.02 < res.alpha0 < 0.97 and not res.flags:
            return case, sched, model, res
    pytest.fail("no desk case with an interior threshold")
