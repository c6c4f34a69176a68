"""Probability-calibrated box uncertainty sets for correlated wind forecast errors.

Forecast errors ``w - w_e`` are decorrelated by the symmetric square root of
their covariance, ``v = L^{-1/2} (w - w_e)``, and the set is a box
``-u <= v <= u`` whose equal per-coordinate widths give total mass ``alpha``
under a normal error model.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .model import SystemCase

ALPHA_CAP = 0.9999
PSD_TOL = 1e-10
SINGULAR_RTOL = 1e-12
_STD_NORMAL = NormalDist()


class UncertaintyError(ValueError):
    pass


@dataclass
class UncertaintyModel:
    w_e: np.ndarray
    lam: np.ndarray
    lam_sqrt: np.ndarray
    lam_sqrt_inv: np.ndarray
    labels: list[str] = field(default_factory=list)
    # positions of these coordinates inside the case's full wind vector
    coords: np.ndarray | None = None
    singular: bool = False

    @property
    def m(self) -> int:
        return self.w_e.size

    @property
    def center(self) -> np.ndarray:
        """Forecast in decorrelated coordinates, ``L^{-1/2} w_e``."""
        return self.lam_sqrt_inv @ self.w_e

    def to_decorrelated(self, w: np.ndarray) -> np.ndarray:
        return self.lam_sqrt_inv @ np.asarray(w, float)

    @classmethod
    def from_covariance(cls, w_e, lam, labels=None, coords=None,
                        allow_singular: bool = False) -> "UncertaintyModel":
        w_e = np.atleast_1d(np.asarray(w_e, float))
        lam = np.atleast_2d(np.asarray(lam, float))
        m = w_e.size
        if lam.shape != (m, m):
            raise UncertaintyError(f"covariance must be {m}x{m}, got {lam.shape}")
        if not np.allclose(lam, lam.T, rtol=0, atol=1e-12 * max(1.0, np.abs(lam).max())):
            raise UncertaintyError("covariance must be symmetric")
        lam = 0.5 * (lam + lam.T)
        evals, evecs = np.linalg.eigh(lam)
        scale = max(float(np.abs(evals).max(initial=0.0)), 1e-300)
        if evals.min(initial=0.0) < -PSD_TOL * max(1.0, scale):
            raise UncertaintyError(
                f"covariance is not positive semidefinite (eigenvalue {evals.min():.3g})")
        evals = np.clip(evals, 0.0, None)
        small = evals <= SINGULAR_RTOL * scale if scale > 1e-300 else np.ones(m, bool)
        if small.any() and not allow_singular:
            raise UncertaintyError(
                f"covariance is singular or nearly so (smallest eigenvalue {evals.min():.3g}, "
                f"largest {scale:.3g}); the decorrelating inverse square root does not exist")
        root = np.sqrt(evals)
        inv_root = np.where(small, 0.0, 1.0 / np.where(small, 1.0, root))
        lam_sqrt = (evecs * root) @ evecs.T
        lam_sqrt_inv = (evecs * inv_root) @ evecs.T
        labels = list(labels) if labels is not None else [str(i) for i in range(m)]
        return cls(w_e, lam, 0.5 * (lam_sqrt + lam_sqrt.T), 0.5 * (lam_sqrt_inv + lam_sqrt_inv.T),
                   labels, None if coords is None else np.asarray(coords, int), bool(small.any()))


@dataclass
class BoxSet:
    alpha: float
    u: np.ndarray
    x_lo: np.ndarray
    x_hi: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return self.x_hi - self.x_lo


def check_correlation(corr: np.ndarray) -> np.ndarray:
    corr = np.atleast_2d(np.asarray(corr, float))
    if corr.shape[0] != corr.shape[1]:
        raise UncertaintyError("correlation matrix must be square")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise UncertaintyError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise UncertaintyError("correlation matrix must have unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise UncertaintyError("correlation entries must lie in [-1, 1]")
    ev = np.linalg.eigvalsh(corr)
    if ev.min() < -PSD_TOL:
        raise UncertaintyError(f"correlation matrix is not PSD: eigenvalue {ev.min():.3g}")
    return corr


def build_covariance(sigma, corr, w_e, labels=None, coords=None) -> UncertaintyModel:
    """Absolute covariance from relative standard deviations and correlations.

    ``L = diag(w_e * sigma) @ corr @ diag(w_e * sigma)``.
    """
    sigma = np.atleast_1d(np.asarray(sigma, float))
    w_e = np.atleast_1d(np.asarray(w_e, float))
    corr = check_correlation(corr)
    if sigma.shape != w_e.shape or corr.shape != (sigma.size, sigma.size):
        raise UncertaintyError("sigma, corr and w_e dimensions disagree")
    if np.any(sigma <= 0):
        raise UncertaintyError("sigma must be strictly positive")
    if np.any(w_e <= 0):
        raise UncertaintyError("uncertain coordinates need a strictly positive forecast")
    s = w_e * sigma
    lam = s[:, None] * corr * s[None, :]
    return UncertaintyModel.from_covariance(w_e, lam, labels, coords)


def hourly_profile(H: int, sigma_start=0.05, sigma_end=0.10, corr_floor=0.1):
    """Relative std devs and hour-to-hour correlations declining linearly with lag."""
    span = max(H - 1, 1)
    hours = np.arange(H)
    sigma = sigma_start + (sigma_end - sigma_start) * hours / span
    lag = np.abs(hours[:, None] - hours[None, :])
    corr = 1.0 - (1.0 - corr_floor) * lag / span
    return sigma, corr


def case_uncertainty(case: SystemCase, hours: Sequence[int] | None = None) -> UncertaintyModel:
    """Uncertainty model over the case's wind coordinates with positive forecast.

    ``hours`` (0-based) optionally restricts the coordinates; correlations are
    taken from the full-horizon profile so any subset keeps its pairwise values.
    """
    H, W = case.horizon, case.n_wind
    p = case.uncertainty
    sig_h, corr_h = hourly_profile(H, p.sigma_start, p.sigma_end, p.corr_floor)
    sigma = p.sigma.reshape(-1) if p.sigma is not None else np.tile(sig_h, W)
    if p.correlation is not None:
        corr = p.correlation
    else:
        farm = np.full((W, W), p.farm_correlation)
        np.fill_diagonal(farm, 1.0)
        corr = np.kron(farm, corr_h)
    w_full = case.wind_forecast()
    sel = np.arange(W * H)
    if hours is not None:
        hset = set(int(h) for h in hours)
        sel = np.array([i for i in sel if i % H in hset], dtype=int)
    sel = sel[w_full[sel] > 0]
    labels = case.coord_labels()
    return build_covariance(sigma[sel], corr[np.ix_(sel, sel)], w_full[sel],
                            labels=[labels[i] for i in sel], coords=sel)


def norm_interval_quantile(gamma: float) -> float:
    """Half-width ``z`` with ``P(-z <= N(0,1) <= z) = gamma``."""
    if not 0.0 <= gamma < 1.0:
        raise UncertaintyError(f"gamma must lie in [0, 1), got {gamma!r}")
    if gamma == 0.0:
        return 0.0
    tail = 0.5 * (1.0 - gamma)  # upper-tail mass, kept separate to avoid cancellation
    z = -_STD_NORMAL.inv_cdf(tail)
    # one Newton step on erfc(z / sqrt 2) / 2 = tail
    f = 0.5 * math.erfc(z / math.sqrt(2.0)) - tail
    z += f / _STD_NORMAL.pdf(z)
    return max(z, 0.0)


def build_box(model: UncertaintyModel, alpha: float, alpha_cap: float = ALPHA_CAP) -> BoxSet:
    if not 0.0 <= alpha <= alpha_cap:
        raise UncertaintyError(f"alpha must lie in [0, {alpha_cap}], got {alpha!r}")
    gamma = alpha ** (1.0 / model.m) if model.m else 0.0
    z = norm_interval_quantile(gamma) if alpha > 0 else 0.0
    u = np.full(model.m, z)
    c = model.center
    return BoxSet(alpha, u, c - u, c + u)


def contains(box: BoxSet, model: UncertaintyModel, w, tol: float = 1e-12) -> bool:
    w = np.asarray(w, float)
    if w.shape != (model.m,):
        raise UncertaintyError(f"scenario has length {w.size}, expected {model.m}")
    return bool(contains_many(box, model, w[None, :], tol)[0])


def contains_many(box: BoxSet, model: UncertaintyModel, W: np.ndarray, tol: float = 1e-12):
    """Vectorized membership for rows of ``W``."""
    dev = np.atleast_2d(W) - model.w_e
    v = dev @ model.lam_sqrt_inv
    inside = np.all(np.abs(v) <= box.u + tol, axis=1)
    if model.singular:
        resid = dev - v @ model.lam_sqrt
        inside &= np.all(np.abs(resid) <= 1e-9 * (1.0 + np.abs(model.w_e)), axis=1)
    return inside


def sample_scenarios(model: UncertaintyModel, n: int, seed: int) -> np.ndarray:
    """``n`` normal scenarios (rows) with mean ``w_e`` and covariance ``L``."""
    if n < 1:
        raise UncertaintyError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, model.m))
    return model.w_e + z @ model.lam_sqrt


def sample_indexed(model: UncertaintyModel, n: int, seed: int) -> np.ndarray:
    """Like :func:`sample_scenarios` but row ``i`` is drawn from its own stream ``seed + i``.

    Any split of the rows across workers reproduces the same scenarios.
    """
    if n < 1:
        raise UncertaintyError("n must be >= 1")
    z = np.stack([np.random.default_rng(seed + i).standard_normal(model.m) for i in range(n)])
    return model.w_e + z @ model.lam_sqrt


def box_corner(model: UncertaintyModel, box: BoxSet, tau) -> np.ndarray:
    """Scenario at the box corner selected by ``tau`` (1 = upper face)."""
    tau = np.asarray(tau, float)
    v = np.where(tau > 0.5, box.u, -box.u)
    return model.w_e + model.lam_sqrt @ v


def write_scenarios_csv(path, model: UncertaintyModel, scenarios: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(model.labels)
        for row in np.atleast_2d(scenarios):
            wr.writerow([repr(float(v)) for v in row])
