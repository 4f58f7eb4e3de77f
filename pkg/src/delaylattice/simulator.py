"""Method-of-steps integration of the delayed lattice initial value problem.

The truncated lattice ``n = -N..N`` carries ``du_n/dt = D (u_{n+1} - 2 u_n + u_{n-1})
+ u_n g(u_n(t), u_n(t - tau))`` with ghost zeros beyond ``|n| = N``.  Time stepping is
classical RK4 with ``dt`` snapped to ``tau / m``.  Delayed values at half steps come
from cubic interpolation whose stencil never straddles a multiple of ``tau``, where
the solution has derivative jumps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import LatticeModel, Nonlinearity

log = logging.getLogger(__name__)

EPS_NUM = 1e-8
EPS_ORD = 1e-6
BOUNDARY_SITES = 5
BOUNDARY_LEVEL = 1e-6
STABILITY_FACTOR = 0.1

# Lagrange weights on 4 equispaced nodes at offsets 0.5, 1.5, 2.5
_CUBIC_HALF = {
    0: np.array([5.0, 15.0, -5.0, 1.0]) / 16.0,
    1: np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0,
    2: np.array([1.0, -5.0, 15.0, 5.0]) / 16.0,
}


class SimulationError(RuntimeError):
    """Numerical failure of a lattice simulation (truncation too small, bound breach)."""


@dataclass(frozen=True)
class InitialData:
    """History ``phi_n(s)`` for ``n in [-M, M]`` and ``s in [-tau, 0]``; zero for ``|n| > M``.

    Exactly one of ``values`` (constant in ``s``), ``samples`` (rows at
    ``s = -tau + k dt``) or ``sampler`` (``sampler(s, n) -> densities``) is given.
    """

    M: int
    values: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None
    sampler: Optional[Callable[[float, np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("support radius M must be >= 0")
        given = [x is not None for x in (self.values, self.samples, self.sampler)]
        if sum(given) != 1:
            raise ValueError("give exactly one of values, samples, sampler")
        width = 2 * self.M + 1
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != (width,):
                raise ValueError(f"values must have shape ({width},)")
            _check_range(vals)
            object.__setattr__(self, "values", vals)
        if self.samples is not None:
            smp = np.asarray(self.samples, dtype=float)
            if smp.ndim != 2 or smp.shape[1] != width:
                raise ValueError(f"samples must have shape (k, {width})")
            _check_range(smp)
            object.__setattr__(self, "samples", smp)

    @classmethod
    def bump(cls, M: int = 2, amplitude: float = 0.5) -> "InitialData":
        return cls(M, values=np.full(2 * M + 1, float(amplitude)))

    @classmethod
    def constant(cls, N: int, value: float) -> "InitialData":
        return cls(N, values=np.full(2 * N + 1, float(value)))

    @classmethod
    def from_profile(cls, phi: Callable[[np.ndarray], np.ndarray], c: float, N: int) -> "InitialData":
        """History ``u_n(s) = phi(n + c s)`` of a travelling wave with speed ``c``."""
        return cls(N, sampler=lambda s, n: phi(n + c * s))

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def slice_at_zero(self) -> np.ndarray:
        if self.values is not None:
            return self.values
        if self.samples is not None:
            return self.samples[-1]
        out = np.asarray(self.sampler(0.0, self.sites), dtype=float)
        _check_range(out)
        return out

    @property
    def satisfies_I3(self) -> bool:
        """Some site is positive at ``s = 0``."""
        return bool(np.any(self.slice_at_zero() > 0))

    def shifted(self, k: int, N: int) -> "InitialData":
        """Same data translated by ``k`` sites, re-expressed with support radius ``N``."""
        if self.sampler is not None:
            f = self.sampler
            return InitialData(N, sampler=lambda s, n: f(s, n - k))
        pad = lambda a: _embed(a, self.M, N, k)
        if self.values is not None:
            return InitialData(N, values=pad(self.values))
        return InitialData(N, samples=np.stack([pad(row) for row in self.samples]))


def _check_range(a: np.ndarray):
    if not np.all(np.isfinite(a)) or a.min() < 0 or a.max() > 1:
        raise ValueError("initial densities must lie in [0, 1]")


def _embed(row: np.ndarray, M: int, N: int, shift: int = 0) -> np.ndarray:
    out = np.zeros(2 * N + 1)
    lo = N - M + shift
    if lo < 0 or lo + row.size > out.size:
        if np.any(row):
            raise ValueError(f"initial data (radius {M}, shift {shift}) does not fit in N = {N}")
        return out
    out[lo:lo + row.size] = row
    return out


@dataclass(frozen=True)
class Trajectory:
    model: LatticeModel
    N: int
    dt: float
    times: np.ndarray
    states: np.ndarray
    history: np.ndarray
    init: InitialData
    stride: int
    steps: int
    min_value: float
    max_value: float

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def manifest(self) -> dict:
        return {
            "D": self.model.D,
            "tau": self.model.tau,
            "nonlinearity": self.model.g.to_spec(),
            "N": self.N,
            "dt": self.dt,
            "T": float(self.times[-1]),
            "steps": self.steps,
            "stride": self.stride,
            "snapshots": int(self.times.size),
            "min_value": self.min_value,
            "max_value": self.max_value,
        }


def stability_limit(model: LatticeModel) -> float:
    return STABILITY_FACTOR / (4.0 * model.D + model.g.lipschitz_bound)


def resolve_dt(model: LatticeModel, dt: float) -> tuple[float, int]:
    """Snap ``dt`` to ``tau / m`` (``m >= 3``); returns ``(dt, m)`` with ``m = 0`` when ``tau = 0``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if model.tau == 0:
        return float(dt), 0
    m = max(3, math.ceil(model.tau / dt - 1e-9))
    return model.tau / m, m


def _history_arrays(init: InitialData, N: int, m: int, dt: float, tau: float):
    """History at full steps ``s = -tau + k dt`` (``k = 0..m``) and at the half steps between."""
    if init.values is not None:
        row = _embed(init.values, init.M, N)
        return np.tile(row, (m + 1, 1)), np.tile(row, (max(m, 1), 1))
    if init.sampler is not None:
        n = np.arange(-N, N + 1)
        full = np.array([_sample(init, -tau + k * dt, n) for k in range(m + 1)])
        half = np.array([_sample(init, -tau + (k + 0.5) * dt, n) for k in range(max(m, 1))])
        return full, half
    smp = init.samples
    if m == 0:
        row = _embed(smp[-1], init.M, N)
        return row[None, :], row[None, :]
    if smp.shape[0] != m + 1:
        raise ValueError(f"sampled history needs m + 1 = {m + 1} rows on the step grid, got {smp.shape[0]}")
    full = np.stack([_embed(row, init.M, N) for row in smp])
    half = np.empty((m, full.shape[1]))
    for j in range(m):
        start = min(max(j - 1, 0), m - 3)
        half[j] = _CUBIC_HALF[j - start] @ full[start:start + 4]
    return full, half


def _sample(init: InitialData, s: float, n: np.ndarray) -> np.ndarray:
    out = np.asarray(init.sampler(s, n), dtype=float)
    if not np.all(np.isfinite(out)) or out.min() < -EPS_NUM or out.max() > 1 + EPS_NUM:
        raise ValueError("history sampler produced values outside [0, 1]")
    return out


def _check_history_continuity(full: np.ndarray, model: LatticeModel, dt: float):
    if full.shape[0] < 2:
        return
    s = np.linspace(0.0, 1.0, 65)
    gmax = float(np.abs(model.g(s[:, None], s[None, :])).max())
    bound = (4.0 * model.D + gmax) * dt
    jump = float(np.abs(np.diff(full, axis=0)).max())
    if jump > bound * (1 + 1e-9) + 1e-12:
        raise ValueError(f"history jumps by {jump:.3g} between samples (bound {bound:.3g})")


def simulate(model: LatticeModel, init: InitialData, N: int, dt: float, T: float,
             stride: Optional[int] = None, speed_bound: Optional[float] = None,
             guard_boundary: Optional[bool] = None) -> Trajectory:
    """Integrate up to time ``T`` and return snapshots every ``stride`` steps.

    ``speed_bound`` is an a-priori front speed used to validate ``N``.  The boundary
    guard raises once the solution exceeds ``1e-6`` within 5 sites of ``|n| = N``; it
    is off by default when the initial data already reaches that strip.
    """
    if N < 1 or N < init.M:
        raise ValueError(f"lattice half width N = {N} must be >= max(1, M = {init.M})")
    if not T > 0:
        raise ValueError("T must be positive")
    if speed_bound is not None and not N > init.M + math.ceil(speed_bound * T):
        raise ValueError(
            f"N = {N} too small: need N > M + ceil(c_est T) = {init.M + math.ceil(speed_bound * T)}"
        )
    dt, m = resolve_dt(model, dt)
    limit = stability_limit(model)
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt = {dt:g} exceeds the stability bound {limit:g}")
    steps = math.ceil(T / dt - 1e-9)
    if stride is None:
        stride = max(1, round(0.5 / dt))
    tau = model.tau
    D = model.D
    g = model.g

    full_hist, half_hist = _history_arrays(init, N, m, dt, tau)
    _check_history_continuity(full_hist, model, dt)
    u = full_hist[-1].copy()
    K = u.size
    if guard_boundary is None:
        strip = np.concatenate([full_hist[:, :BOUNDARY_SITES], full_hist[:, -BOUNDARY_SITES:]])
        guard_boundary = bool(strip.max() <= BOUNDARY_LEVEL)

    lap = np.empty(K)

    def rhs(x, xd):
        lap[1:-1] = x[2:] + x[:-2]
        lap[0] = x[1]
        lap[-1] = x[-2]
        return D * (lap - 2.0 * x) + x * g(x, xd)

    # ring of solved states, index k stored at k % R (k >= 0)
    R = m + 4
    ring = np.empty((R, K))
    ring[0] = u

    def state(k):
        return full_hist[k + m] if k <= 0 else ring[k % R]

    def half_state(j):
        # value at t_j + dt/2 for j >= 0, stencil kept inside [seg*m, (seg+1)*m]
        seg = j // m
        start = min(max(j - 1, seg * m), (seg + 1) * m - 3)
        w = _CUBIC_HALF[j - start]
        return w[0] * state(start) + w[1] * state(start + 1) + w[2] * state(start + 2) + w[3] * state(start + 3)

    n_store = steps // stride + 1 + (1 if steps % stride else 0)
    times = np.empty(n_store)
    states = np.empty((n_store, K))
    times[0] = 0.0
    states[0] = u
    stored = 1
    umin, umax = float(u.min()), float(u.max())
    half_dt = 0.5 * dt

    for k in range(steps):
        if m:
            j = k - m
            d0 = state(j)
            dh = half_hist[j + m] if j < 0 else half_state(j)
            d1 = state(j + 1)
            k1 = rhs(u, d0)
            k2 = rhs(u + half_dt * k1, dh)
            y = u + half_dt * k2
            k3 = rhs(y, dh)
            y = u + dt * k3
            k4 = rhs(y, d1)
        else:
            k1 = rhs(u, u)
            y = u + half_dt * k1
            k2 = rhs(y, y)
            y = u + half_dt * k2
            k3 = rhs(y, y)
            y = u + dt * k3
            k4 = rhs(y, y)
        u = u + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        lo, hi = float(u.min()), float(u.max())
        umin, umax = min(umin, lo), max(umax, hi)
        if lo < -EPS_NUM or hi > 1.0 + EPS_NUM or not math.isfinite(lo + hi):
            raise SimulationError(
                f"bound breach at t = {(k + 1) * dt:.6g}: min {lo:.3g}, max {hi:.3g} (dt too large?)"
            )
        if guard_boundary and max(u[:BOUNDARY_SITES].max(), u[-BOUNDARY_SITES:].max()) > BOUNDARY_LEVEL:
            raise SimulationError(
                f"truncation too small: front within {BOUNDARY_SITES} sites of |n| = {N} at t = {(k + 1) * dt:.6g}"
            )
        if m:
            ring[(k + 1) % R] = u
        if (k + 1) % stride == 0 or k + 1 == steps:
            times[stored] = (k + 1) * dt
            states[stored] = u
            stored += 1

    if m:
        last = np.array([state(steps - i) for i in range(m, -1, -1)])
    else:
        last = u[None, :].copy()
    log.debug("simulated %d steps of dt=%g on N=%d", steps, dt, N)
    return Trajectory(model, N, dt, times[:stored], states[:stored], last, init, stride, steps, umin, umax)


@dataclass
class OrderingReport:
    ok: bool
    max_violation: float
    first_violation: Optional[tuple]
    eps: float
    checked_steps: int
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_violation": self.max_violation,
            "first_violation": self.first_violation,
            "eps": self.eps,
            "checked_steps": self.checked_steps,
            **self.detail,
        }


def _ordering(lower: np.ndarray, upper: np.ndarray, times: np.ndarray, N: int, eps: float) -> tuple:
    excess = lower - upper
    worst = float(excess.max())
    first = None
    bad = np.argwhere(excess > eps)
    if bad.size:
        ti, i = bad[0]
        first = (int(i - N), float(times[ti]))
    return worst, first


def auxiliary_nonlinearity(g: Nonlinearity, v: float) -> Nonlinearity:
    """Undelayed ``u -> g(u, v)`` with the delayed argument frozen at ``v``."""
    return Nonlinearity(f"{g.kind}|v={v:g}", lambda u, _v, _g=g: _g(u, np.full_like(np.asarray(u, dtype=float), v)),
                        g.lipschitz_bound, {"base": g.to_spec(), "v": v})


def sandwich_check(traj: Trajectory, eps: float = EPS_ORD) -> OrderingReport:
    """Bracket the delayed trajectory between the undelayed ``g(., 1)`` and ``g(., 0)`` solutions."""
    model = traj.model
    init = InitialData(traj.N, values=_embed(traj.init.slice_at_zero(), traj.init.M, traj.N))
    T = traj.steps * traj.dt
    sims = {}
    for name, v in (("lower", 1.0), ("upper", 0.0)):
        aux = LatticeModel(model.D, 0.0, auxiliary_nonlinearity(model.g, v))
        sims[name] = simulate(aux, init, traj.N, traj.dt, T, stride=traj.stride, guard_boundary=False)
    low, up = sims["lower"].states, sims["upper"].states
    if low.shape != traj.states.shape:
        raise SimulationError("auxiliary trajectories are misaligned with the delayed trajectory")
    w1, f1 = _ordering(low, traj.states, traj.times, traj.N, eps)
    w2, f2 = _ordering(traj.states, up, traj.times, traj.N, eps)
    worst = max(w1, w2)
    firsts = [f for f in (f1, f2) if f is not None]
    first = min(firsts, key=lambda f: f[1]) if firsts else None
    return OrderingReport(
        worst <= eps, worst, first, eps, int(traj.times.size),
        {"lower_excess": w1, "upper_excess": w2,
         "max_gap_upper": float(np.abs(up - traj.states).max()),
         "max_gap_lower": float(np.abs(traj.states - low).max())},
    )


def comparison_check(model: LatticeModel, init_low: InitialData, init_high: InitialData,
                     N: int, dt: float, T: float, stride: Optional[int] = None,
                     eps: float = EPS_ORD) -> OrderingReport:
    """Order preservation of the undelayed equation for ordered initial data."""
    if model.tau != 0:
        raise ValueError("comparison_check applies to the undelayed equation (tau = 0)")
    lo0 = _embed(init_low.slice_at_zero(), init_low.M, N)
    hi0 = _embed(init_high.slice_at_zero(), init_high.M, N)
    if np.any(lo0 > hi0):
        raise ValueError("init_low must not exceed init_high")
    a = simulate(model, init_low, N, dt, T, stride=stride, guard_boundary=False)
    b = simulate(model, init_high, N, dt, T, stride=stride, guard_boundary=False)
    worst, first = _ordering(a.states, b.states, a.times, N, eps)
    return OrderingReport(worst <= eps, worst, first, eps, int(a.times.size),
                          {"final_high_center": float(b.final[N]), "final_low_center": float(a.final[N])})
