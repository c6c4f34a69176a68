"""Power-system case description, JSON ingestion and DC shift factors."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np


class CaseError(ValueError):
    """Invalid case file: parse failure or a violated invariant."""


class NetworkError(CaseError):
    """The reduced bus susceptance matrix is singular (disconnected network)."""


@dataclass
class ThermalUnit:
    id: str
    bus: int
    p_min: float
    p_max: float
    ramp_down: float
    ramp_up: float
    startup_cost: float
    energy_cost: float
    min_run_cost: float
    min_on: int
    min_off: int
    initial_state: int
    # dispatch before hour 1; None means p_min if initially on, else 0
    p_initial: float | None = None

    @property
    def initially_on(self) -> bool:
        return self.initial_state > 0

    @property
    def p0(self) -> float:
        if self.p_initial is not None:
            return self.p_initial
        return self.p_min if self.initially_on else 0.0


@dataclass
class Line:
    id: str
    from_bus: int
    to_bus: int
    reactance: float
    limit: float


@dataclass
class WindFarm:
    bus: int
    forecast: np.ndarray


@dataclass
class UncertaintyParams:
    """Relative forecast-error model for the wind coordinates.

    Default per-farm profile: standard deviation rising linearly from
    ``sigma_start`` at hour 1 to ``sigma_end`` at hour H, correlation
    ``1 - (1 - corr_floor) * |i - j| / (H - 1)`` between hours, and
    ``farm_correlation`` scaling between distinct farms.  ``sigma`` (W x H)
    and ``correlation`` (m x m) override the profile when given.
    """

    sigma_start: float = 0.05
    sigma_end: float = 0.10
    corr_floor: float = 0.1
    farm_correlation: float = 0.0
    sigma: np.ndarray | None = None
    correlation: np.ndarray | None = None


@dataclass
class SystemCase:
    buses: int
    lines: list[Line]
    units: list[ThermalUnit]
    loads: np.ndarray
    wind_farms: list[WindFarm]
    horizon: int
    reserve_up: np.ndarray
    reserve_down: np.ndarray
    slack_bus: int
    name: str = ""
    uncertainty: UncertaintyParams = field(default_factory=UncertaintyParams)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_wind(self) -> int:
        return len(self.wind_farms)

    @property
    def total_load(self) -> np.ndarray:
        """System load per hour (MW)."""
        return self.loads.sum(axis=0)

    def wind_forecast(self) -> np.ndarray:
        """Forecast flattened farm-major: index = farm * H + hour."""
        if not self.wind_farms:
            return np.zeros(0)
        return np.concatenate([f.forecast for f in self.wind_farms])

    def coord_labels(self) -> list[str]:
        return [f"{k}:{h + 1}" for k in range(self.n_wind) for h in range(self.horizon)]

    def validate(self) -> None:
        H, nb = self.horizon, self.buses
        if H < 1 or nb < 1:
            raise CaseError("horizon and buses must be positive")
        if not 0 <= self.slack_bus < nb:
            raise CaseError(f"slack_bus {self.slack_bus} out of range [0, {nb})")
        if self.loads.shape != (nb, H):
            raise CaseError(f"loads must be {nb}x{H}, got {self.loads.shape[0]}x{self.loads.shape[1]}")
        if np.any(self.loads < 0):
            raise CaseError("loads must be nonnegative")
        for name, r in (("reserve_up", self.reserve_up), ("reserve_down", self.reserve_down)):
            if r.shape != (H,):
                raise CaseError(f"{name} must have length {H}")
            if np.any(r < 0) or np.any(r >= 1):
                raise CaseError(f"{name} fractions must lie in [0, 1)")
        for u in self.units:
            tag = f"unit {u.id}"
            if not 0 <= u.bus < nb:
                raise CaseError(f"{tag}: bus {u.bus} out of range")
            if not 0 <= u.p_min <= u.p_max:
                raise CaseError(f"{tag}: requires 0 <= p_min <= p_max (got {u.p_min}, {u.p_max})")
            if u.ramp_up <= 0 or u.ramp_down <= 0:
                raise CaseError(f"{tag}: ramp rates must be positive")
            if u.min_on < 1 or u.min_off < 1:
                raise CaseError(f"{tag}: min_on and min_off must be >= 1")
            if u.initial_state == 0:
                raise CaseError(f"{tag}: initial_state must be nonzero")
            if u.p_initial is not None and u.p_initial < 0:
                raise CaseError(f"{tag}: p_initial must be nonnegative")
        ids = [ln.id for ln in self.lines]
        if len(set(ids)) != len(ids):
            raise CaseError("duplicate line ids")
        for ln in self.lines:
            tag = f"line {ln.id}"
            if not (0 <= ln.from_bus < nb and 0 <= ln.to_bus < nb):
                raise CaseError(f"{tag}: bus index out of range")
            if ln.from_bus == ln.to_bus:
                raise CaseError(f"{tag}: from_bus equals to_bus")
            if ln.reactance <= 0:
                raise CaseError(f"{tag}: reactance must be positive")
            if ln.limit <= 0:
                raise CaseError(f"{tag}: limit must be positive")
        for k, f in enumerate(self.wind_farms):
            if not 0 <= f.bus < nb:
                raise CaseError(f"wind farm {k}: bus {f.bus} out of range")
            if f.forecast.shape != (H,):
                raise CaseError(f"wind farm {k}: forecast must have length {H}")
            if np.any(f.forecast < 0):
                raise CaseError(f"wind farm {k}: forecast must be nonnegative")
        unc = self.uncertainty
        m = self.n_wind * H
        if unc.sigma is not None and unc.sigma.shape != (self.n_wind, H):
            raise CaseError(f"uncertainty.sigma must be {self.n_wind}x{H}")
        if unc.correlation is not None and unc.correlation.shape != (m, m):
            raise CaseError(f"uncertainty.correlation must be {m}x{m}")


# -- JSON ---------------------------------------------------------------------

def _as_hourly(value, H: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(H, float(arr))
    if arr.shape != (H,):
        raise CaseError(f"{name}: expected scalar or array of length {H}")
    return arr


def case_from_dict(data: dict[str, Any], name: str = "") -> SystemCase:
    try:
        H = int(data["horizon"])
        nb = int(data["buses"])
        lines = [Line(str(d["id"]), int(d["from"]), int(d["to"]), float(d["x"]), float(d["limit"]))
                 for d in data.get("lines", [])]
        units = []
        for d in data.get("units", []):
            units.append(ThermalUnit(
                id=str(d["id"]), bus=int(d["bus"]), p_min=float(d["p_min"]), p_max=float(d["p_max"]),
                ramp_down=float(d["ramp_down"]), ramp_up=float(d["ramp_up"]),
                startup_cost=float(d["startup_cost"]), energy_cost=float(d["energy_cost"]),
                min_run_cost=float(d["min_run_cost"]), min_on=int(d["min_on"]),
                min_off=int(d["min_off"]), initial_state=int(d["initial_state"]),
                p_initial=None if d.get("p_initial") is None else float(d["p_initial"])))
        wind = [WindFarm(int(d["bus"]), np.asarray(d["forecast"], dtype=float))
                for d in data.get("wind", [])]
        loads = np.asarray(data["loads"], dtype=float)
        if loads.ndim != 2:
            raise CaseError("loads must be a 2-D array (buses x hours)")
        unc_d = data.get("uncertainty") or {}
        unc = UncertaintyParams(
            sigma_start=float(unc_d.get("sigma_start", 0.05)),
            sigma_end=float(unc_d.get("sigma_end", 0.10)),
            corr_floor=float(unc_d.get("corr_floor", 0.1)),
            farm_correlation=float(unc_d.get("farm_correlation", 0.0)),
            sigma=None if unc_d.get("sigma") is None else np.asarray(unc_d["sigma"], float),
            correlation=(None if unc_d.get("correlation") is None
                         else np.asarray(unc_d["correlation"], float)))
        case = SystemCase(
            buses=nb, lines=lines, units=units, loads=loads, wind_farms=wind, horizon=H,
            reserve_up=_as_hourly(data.get("reserve_up", 0.0), H, "reserve_up"),
            reserve_down=_as_hourly(data.get("reserve_down", 0.0), H, "reserve_down"),
            slack_bus=int(data.get("slack_bus", nb - 1)),
            name=str(data.get("name", name)), uncertainty=unc)
    except KeyError as exc:
        raise CaseError(f"missing required field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CaseError):
            raise
        raise CaseError(f"malformed field value: {exc}") from None
    case.validate()
    return case


def case_to_dict(case: SystemCase) -> dict[str, Any]:
    unc = case.uncertainty
    unc_d: dict[str, Any] = {"sigma_start": unc.sigma_start, "sigma_end": unc.sigma_end,
                             "corr_floor": unc.corr_floor, "farm_correlation": unc.farm_correlation}
    if unc.sigma is not None:
        unc_d["sigma"] = unc.sigma.tolist()
    if unc.correlation is not None:
        unc_d["correlation"] = unc.correlation.tolist()
    units = []
    for u in case.units:
        d = {"id": u.id, "bus": u.bus, "p_min": u.p_min, "p_max": u.p_max,
             "ramp_up": u.ramp_up, "ramp_down": u.ramp_down, "startup_cost": u.startup_cost,
             "energy_cost": u.energy_cost, "min_run_cost": u.min_run_cost,
             "min_on": u.min_on, "min_off": u.min_off, "initial_state": u.initial_state}
        if u.p_initial is not None:
            d["p_initial"] = u.p_initial
        units.append(d)
    return {
        "name": case.name,
        "buses": case.buses,
        "slack_bus": case.slack_bus,
        "horizon": case.horizon,
        "lines": [{"id": ln.id, "from": ln.from_bus, "to": ln.to_bus, "x": ln.reactance,
                   "limit": ln.limit} for ln in case.lines],
        "units": units,
        "loads": case.loads.tolist(),
        "wind": [{"bus": f.bus, "forecast": f.forecast.tolist()} for f in case.wind_farms],
        "reserve_up": case.reserve_up.tolist(),
        "reserve_down": case.reserve_down.tolist(),
        "uncertainty": unc_d,
    }


def load_case(path: str | Path) -> SystemCase:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CaseError(f"{path}: no such file") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise CaseError(f"{path}: top level must be a JSON object")
    try:
        return case_from_dict(data, name=path.stem)
    except CaseError as exc:
        raise CaseError(f"{path}: {exc}") from None


def dump_case(case: SystemCase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=1), encoding="utf-8")


def bundled_case_path(name: str) -> Path:
    """Path of a case shipped with the package, e.g. ``case3`` or ``case39``."""
    fname = name if name.endswith(".json") else f"{name}.json"
    return Path(str(resources.files("windcap") / "data" / fname))


# -- DC power flow --------------------------------------------------------------

def incidence_matrix(case: SystemCase) -> np.ndarray:
    A = np.zeros((case.n_lines, case.buses))
    for k, ln in enumerate(case.lines):
        A[k, ln.from_bus] = 1.0
        A[k, ln.to_bus] = -1.0
    return A


def compute_ptdf(case: SystemCase, slack_bus: int | None = None) -> np.ndarray:
    """Line-flow sensitivities (lines x buses) to bus injections balanced at the slack.

    The slack column is identically zero.
    """
    slack = case.slack_bus if slack_bus is None else slack_bus
    A = incidence_matrix(case)
    b = np.array([1.0 / ln.reactance for ln in case.lines])
    B_line = b[:, None] * A
    B_bus = A.T @ B_line
    keep = np.array([i for i in range(case.buses) if i != slack], dtype=int)
    B_red = B_bus[np.ix_(keep, keep)]
    if keep.size and np.linalg.matrix_rank(B_red) < keep.size:
        raise NetworkError("reduced bus susceptance matrix is singular; network is disconnected")
    H = np.zeros((case.n_lines, case.buses))
    if keep.size:
        H[:, keep] = np.linalg.solve(B_red.T, B_line[:, keep].T).T
    return H


def bus_map(case: SystemCase) -> tuple[np.ndarray, np.ndarray]:
    """Incidence of units and wind farms on buses: (buses x units, buses x farms)."""
    G = np.zeros((case.buses, case.n_units))
    for i, u in enumerate(case.units):
        G[u.bus, i] = 1.0
    Wm = np.zeros((case.buses, case.n_wind))
    for k, f in enumerate(case.wind_farms):
        Wm[f.bus, k] = 1.0
    return G, Wm
