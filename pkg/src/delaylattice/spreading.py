"""Front tracking, regression speed estimates and the inner/outer cone checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .simulator import Trajectory

R2_CONVERGED = 0.99
MIN_POINTS = 10


@dataclass(frozen=True)
class FrontTrace:
    """Level-crossing positions per stored time; NaN marks a side without a crossing."""

    level: float
    times: np.ndarray
    right_positions: np.ndarray
    left_positions: np.ndarray

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def empty(self) -> bool:
        return self.times.size == 0

    def rows(self):
        return zip(self.times.tolist(), self.right_positions.tolist(), self.left_positions.tolist())


@dataclass(frozen=True)
class SpeedEstimate:
    speed: float
    intercept: float
    r_squared: float
    window: tuple
    points: int

    @property
    def verdict(self) -> str:
        return "converged" if self.r_squared >= R2_CONVERGED else "transient"

    def as_dict(self) -> dict:
        return {
            "speed": self.speed,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "points": self.points,
            "verdict": self.verdict,
        }


def _crossings(u: np.ndarray, sites: np.ndarray, level: float) -> tuple:
    above = u >= level
    # right: u_i >= level > u_{i+1}
    r_idx = np.flatnonzero(above[:-1] & ~above[1:])
    right = np.nan
    if r_idx.size:
        i = r_idx[-1]
        right = sites[i] + (u[i] - level) / (u[i] - u[i + 1])
    l_idx = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    left = np.nan
    if l_idx.size:
        i = l_idx[0]
        left = sites[i] - (u[i] - level) / (u[i] - u[i - 1])
    return right, left


def track_front(traj: Trajectory, level: float) -> FrontTrace:
    """Rightmost and leftmost crossings of ``level``, linearly interpolated between sites."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    sites = traj.sites.astype(float)
    times, rights, lefts = [], [], []
    for t, u in zip(traj.times, traj.states):
        right, left = _crossings(u, sites, level)
        if np.isnan(right) and np.isnan(left):
            continue
        times.append(t)
        rights.append(right)
        lefts.append(left)
    return FrontTrace(level, np.asarray(times, dtype=float), np.asarray(rights, dtype=float),
                      np.asarray(lefts, dtype=float))


def estimate_speed(trace: FrontTrace, discard_fraction: float = 0.5, side: str = "right") -> SpeedEstimate:
    """Least-squares slope of front position against time after dropping the transient.

    ``side="left"`` fits ``-left_position`` so that a front invading leftward has positive speed.
    """
    if not 0 <= discard_fraction < 1:
        raise ValueError("discard_fraction must lie in [0, 1)")
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    if trace.empty:
        raise ValueError("insufficient data: empty front trace")
    pos = trace.right_positions if side == "right" else -trace.left_positions
    t = trace.times
    t_lo = t[0] + discard_fraction * (t[-1] - t[0])
    keep = (t >= t_lo) & np.isfinite(pos)
    if keep.sum() < MIN_POINTS:
        raise ValueError(f"insufficient data: {int(keep.sum())} retained points (need {MIN_POINTS})")
    tt, xx = t[keep], pos[keep]
    fit = stats.linregress(tt, xx)
    r2 = float(fit.rvalue ** 2) if np.ptp(xx) > 0 else 1.0
    return SpeedEstimate(float(fit.slope), float(fit.intercept), r2, (float(tt[0]), float(tt[-1])), int(tt.size))


@dataclass(frozen=True)
class ConeReport:
    T: float
    inner_radius: float
    outer_radius: float
    inner_deviation: float
    outer_max: Optional[float]
    inner_target: float
    outer_target: float

    @property
    def inner_ok(self) -> bool:
        return self.inner_deviation <= self.inner_target

    @property
    def outer_ok(self) -> Optional[bool]:
        """None when no lattice site lies outside the outer radius (vacuous check)."""
        if self.outer_max is None:
            return None
        return self.outer_max <= self.outer_target

    @property
    def passed(self) -> bool:
        return self.inner_ok and self.outer_ok is not False

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
            "inner_deviation": self.inner_deviation,
            "inner_target": self.inner_target,
            "inner_ok": self.inner_ok,
            "outer_max": self.outer_max,
            "outer_target": self.outer_target,
            "outer_ok": self.outer_ok,
            "outer_vacuous": self.outer_max is None,
        }


def cone_checks(traj: Trajectory, c_star: float, E: float, inner: float = 0.5, outer: float = 1.2,
                inner_target: float = 1e-2, outer_target: float = 1e-3) -> ConeReport:
    """Deviation from ``E`` inside ``|n| <= inner c* T`` and mass beyond ``|n| >= outer c* T``."""
    T = float(traj.times[-1])
    if 0.8 * c_star * T < 20:
        raise ValueError("trajectory too short: need 0.8 c* T >= 20 sites")
    n = np.abs(traj.sites)
    u = traj.final
    r_in, r_out = inner * c_star * T, outer * c_star * T
    inside = n <= r_in
    dev = float(np.abs(u[inside] - E).max()) if inside.any() else 0.0
    outside = n >= r_out
    out_max = float(u[outside].max()) if outside.any() else None
    return ConeReport(T, r_in, r_out, dev, out_max, inner_target, outer_target)
