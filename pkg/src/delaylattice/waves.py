"""Travelling-wave profiles from the integral operator and its upper/lower solution pair.

For a wave ``u_n(t) = phi(n + c t)`` the profile equation can be rewritten as

    phi = F(phi, phi),  F(phi, psi)(xi) = (1/c) int_{-inf}^{xi} exp(-beta (xi - s)) H(phi, psi)(s) ds

with ``beta = (2D + d)/c`` and ``H(phi, psi)(s) = d phi(s) + D (phi(s+1) + phi(s-1))
+ phi(s) g(phi(s), psi(s - c tau))``.  The shift ``d`` makes ``F`` increasing in its
first argument; H2 makes it decreasing in the second.  Iterating the pair
``L <- F(L, U)``, ``U <- F(U, L)`` from ``(lower, upper)`` squeezes a fixed point.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .dispersion import (
    CharacteristicResult,
    NoRealRootsError,
    RootPair,
    characteristic_roots,
    compute_cstar,
)
from .model import LatticeModel, check_hypotheses, invaded_state

log = logging.getLogger(__name__)

EPS_ORD = 1e-6
CRITICAL_OFFSET = 1e-6
Q_START = 2.0
Q_CAP = 2.0 ** 16
# relative slack for the discrete sandwich inequality (quadrature error is O(h^2))
IN_RTOL = 1e-6


class IterationStalled(RuntimeError):
    def __init__(self, message: str, gap: float, iterations: int):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations


@dataclass(frozen=True)
class WaveGrid:
    xi_min: float
    xi_max: float
    h: float
    points: np.ndarray = field(repr=False)
    beta: float
    d: float
    c: float
    unit: int  # grid steps per unit shift

    @property
    def size(self) -> int:
        return int(self.points.size)

    def refined(self) -> "WaveGrid":
        return _build_grid(self.c, self.d, self.beta * self.c - self.d, self.h / 2, self.xi_min, self.xi_max)


def _build_grid(c, d, twoD, h, xi_min, xi_max) -> WaveGrid:
    unit = int(round(1.0 / h))
    h = 1.0 / unit
    i_min = math.floor(xi_min / h + 1e-9)
    i_max = math.ceil(xi_max / h - 1e-9)
    points = np.arange(i_min, i_max + 1) * h
    return WaveGrid(float(points[0]), float(points[-1]), h, points, (twoD + d) / c, d, c, unit)


def default_shift(model: LatticeModel) -> float:
    """``d`` = Lipschitz bound of ``u -> u g(u, 1)`` on [0, 1] plus one."""
    return model.g.reaction_lipschitz(1.0) + 1.0


def make_grid(c: float, model: LatticeModel, roots: RootPair, h: Optional[float] = None,
              xi_min: Optional[float] = None, xi_max: float = 40.0, d: Optional[float] = None,
              decay_span: float = 40.0) -> WaveGrid:
    """Grid with ``xi_min <= -decay_span / lambda1(c)`` and spacing ``1/k`` so that unit shifts are exact."""
    if d is None:
        d = default_shift(model)
    s = np.linspace(0.0, 1.0, 2049)
    react = d * s + s * model.g(s, np.ones_like(s))
    if np.any(np.diff(react) < 0):
        raise ValueError(f"shift d = {d:g} does not make s -> d s + s g(s, 1) nondecreasing")
    h_max = 0.0025 if model.tau == 0 else min(0.01, c * model.tau) / 4
    if h is None:
        h = h_max
    elif h > h_max * (1 + 1e-12):
        raise ValueError(f"grid spacing h = {h:g} exceeds {h_max:g}")
    h = 1.0 / math.ceil(1.0 / h - 1e-9)
    floor_min = -decay_span / roots.lambda1
    xi_min = floor_min if xi_min is None else min(xi_min, floor_min)
    if xi_max < 40.0:
        raise ValueError("xi_max must be >= 40")
    return _build_grid(c, d, 2.0 * model.D, h, xi_min, xi_max)


def bounds_pair(c: float, roots: RootPair, q: float, eta: float, grid: WaveGrid):
    """``upper = min(e^{l1 xi}, 1)`` and ``lower = max(e^{l1 xi} - q e^{eta l1 xi}, 0)`` on the grid."""
    l1, l2 = roots.lambda1, roots.lambda2
    hi = min(2.0, l2 / l1)
    if not (1.0 < eta < hi):
        raise ValueError(f"eta = {eta:g} must lie in (1, {hi:g})")
    if not q > 1:
        raise ValueError("q must exceed 1")
    xi = grid.points
    e1 = np.exp(np.minimum(l1 * xi, 0.0))
    upper = np.minimum(np.exp(np.minimum(l1 * xi, 50.0)), 1.0)
    lower = np.where(xi < 0, e1 - q * np.exp(np.minimum(eta * l1 * xi, 0.0)), 0.0)
    return upper, np.maximum(lower, 0.0)


def _shift(a: np.ndarray, k: int) -> np.ndarray:
    """``a(xi + k h)`` with 0 below the grid and the last value above it."""
    out = np.empty_like(a)
    if k > 0:
        out[:-k] = a[k:]
        out[-k:] = a[-1]
    elif k < 0:
        out[-k:] = a[:k]
        out[:-k] = 0.0
    else:
        out[:] = a
    return out


def _delay_shift_linear(a: np.ndarray, steps: float) -> np.ndarray:
    """``a(xi - steps h)`` by linear interpolation, 0 below the grid."""
    if steps == 0:
        return a
    k = math.floor(steps)
    frac = steps - k
    a0 = _shift(a, -k)
    if frac < 1e-12:
        return a0
    a1 = _shift(a, -(k + 1))
    return (1.0 - frac) * a0 + frac * a1


def _delay_shift_cubic(a: np.ndarray, steps: float) -> np.ndarray:
    """``a(xi - steps h)`` by 4-point Lagrange interpolation, 0 below the grid."""
    k = math.floor(steps)
    x = 1.0 - (steps - k)  # position in [0, 1) between nodes -(k+1) and -k
    if x > 1 - 1e-12:
        return _shift(a, -k)
    p = [_shift(a, -(k + 2)), _shift(a, -(k + 1)), _shift(a, -k), _shift(a, -(k - 1))]
    t = x + 1.0
    w = [
        -(t - 1) * (t - 2) * (t - 3) / 6,
        t * (t - 2) * (t - 3) / 2,
        -t * (t - 1) * (t - 3) / 2,
        t * (t - 1) * (t - 2) / 6,
    ]
    return w[0] * p[0] + w[1] * p[1] + w[2] * p[2] + w[3] * p[3]


def _weights(beta: float, h: float, c: float):
    z = beta * h
    ez = math.exp(-z)
    # exact kernel integral against the linear interpolant of H on one cell
    w_new = (1.0 - (-math.expm1(-z)) / z) / beta
    w_old = ((-math.expm1(-z)) / z - ez) / beta
    return ez, w_old / c, w_new / c


@lru_cache(maxsize=64)
def _quadratic_weights(beta: float, h: float, c: float) -> tuple:
    """Kernel weights on the cell [x_{i-1}, x_i] for the quadratic through x_{i-2}, x_{i-1}, x_i."""
    x, w = np.polynomial.legendre.leggauss(12)
    t = 0.5 * (x + 1.0)
    w = 0.5 * h * w * np.exp(-beta * h * (1.0 - t))
    nodes = (-1.0, 0.0, 1.0)
    out = []
    for j in nodes:
        basis = np.ones_like(t)
        for k in nodes:
            if k != j:
                basis *= (t - k) / (j - k)
        out.append(float(np.sum(w * basis)) / c)
    return tuple(out)


def _delay_shift_quadratic(a: np.ndarray, steps: float) -> np.ndarray:
    """``a(xi - steps h)`` by 3-point Lagrange interpolation, 0 below the grid."""
    k = math.floor(steps)
    x = 1.0 - (steps - k)
    if x > 1 - 1e-12:
        return _shift(a, -k)
    p0, p1, p2 = _shift(a, -(k + 1)), _shift(a, -k), _shift(a, -(k - 1))
    return 0.5 * (x - 1) * (x - 2) * p0 - x * (x - 2) * p1 + 0.5 * x * (x - 1) * p2


def H_term(phi: np.ndarray, psi: np.ndarray, c: float, model: LatticeModel, grid: WaveGrid,
           order: int = 2) -> np.ndarray:
    steps = c * model.tau / grid.h
    if steps == 0:
        psi_delayed = psi
    elif order == 2:
        psi_delayed = _delay_shift_linear(psi, steps)
    else:
        psi_delayed = _delay_shift_quadratic(psi, steps)
    return (grid.d * phi + model.D * (_shift(phi, grid.unit) + _shift(phi, -grid.unit))
            + phi * model.g(phi, psi_delayed))


def apply_F(phi: np.ndarray, psi: np.ndarray, c: float, model: LatticeModel, grid: WaveGrid,
            order: int = 2) -> np.ndarray:
    """Recursive exponential quadrature ``F(xi + h) = e^{-beta h} F(xi) + increment``, ``F(xi_min) = 0``.

    ``order=2`` integrates the kernel exactly against the piecewise-linear interpolant of
    ``H`` (positive weights, so the discrete operator keeps the mixed monotonicity).
    ``order=3`` uses the quadratic interpolant and is only used to polish a converged
    profile; it is not monotone.
    """
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    H = H_term(phi, psi, c, model, grid, order)
    ez, w_old, w_new = _weights(grid.beta, grid.h, c)
    x = np.empty_like(H)
    x[0] = 0.0
    if order == 2:
        x[1:] = w_old * H[:-1] + w_new * H[1:]
    else:
        w0, w1, w2 = _quadratic_weights(grid.beta, grid.h, c)
        x[1] = w_old * H[0] + w_new * H[1]
        x[2:] = w0 * H[:-2] + w1 * H[1:-1] + w2 * H[2:]
    return lfilter([1.0], [1.0, -ez], x)


@dataclass
class WaveProfile:
    c: float
    grid: WaveGrid
    phi: np.ndarray = field(repr=False)
    residual_sup: float
    iterations: int
    bracket_ok: bool
    E: float
    gap: float
    gauge_shift: float
    method: str
    c_operator: float
    q: Optional[float] = None
    eta: Optional[float] = None
    lower: Optional[np.ndarray] = field(default=None, repr=False)
    upper: Optional[np.ndarray] = field(default=None, repr=False)
    bracket_violation: float = 0.0
    monotone_violation: float = 0.0
    fixed_point_defect: float = 0.0
    drift: float = 0.0
    h4_ok: bool = True

    @property
    def regime(self) -> str:
        """``"limit"`` when H4 holds (right limit must be E), else ``"liminf"`` (only persistence)."""
        return "limit" if self.h4_ok else "liminf"

    @property
    def limits_ok(self) -> bool:
        """Boundary behaviour: ``phi(xi_min) <= 1e-6`` and ``|phi(xi_max) - E| <= 1e-3``.

        Without H4 only ``liminf phi >= 1e-2`` on the right half of the grid is required.
        """
        if self.left_limit > 1e-6:
            return False
        if self.h4_ok:
            return abs(self.right_limit - self.E) <= 1e-3
        return float(self.phi[self.grid.points >= 0.5 * self.grid.xi_max].min()) >= 1e-2

    @property
    def left_limit(self) -> float:
        return float(self.phi[0])

    @property
    def right_limit(self) -> float:
        return float(self.phi[-1])

    def evaluate(self, xi, gauged: bool = True) -> np.ndarray:
        """Profile at arbitrary ``xi`` (0 on the left, constant on the right of the grid)."""
        x = np.asarray(xi, dtype=float) + (self.gauge_shift if gauged else 0.0)
        return np.interp(x, self.grid.points, self.phi, left=0.0, right=self.phi[-1])

    def manifest(self) -> dict:
        return {
            "c": self.c,
            "c_operator": self.c_operator,
            "method": self.method,
            "q": self.q,
            "eta": self.eta,
            "d": self.grid.d,
            "beta": self.grid.beta,
            "h": self.grid.h,
            "xi_min": self.grid.xi_min,
            "xi_max": self.grid.xi_max,
            "iterations": self.iterations,
            "gap": self.gap,
            "residual_sup": self.residual_sup,
            "bracket_ok": self.bracket_ok,
            "bracket_violation": self.bracket_violation,
            "fixed_point_defect": self.fixed_point_defect,
            "drift_per_iteration": self.drift,
            "E": self.E,
            "left_limit": self.left_limit,
            "right_limit": self.right_limit,
            "gauge_shift": self.gauge_shift,
            "regime": self.regime,
            "limits_ok": self.limits_ok,
        }


def interior_mask(grid: WaveGrid, c: float, tau: float) -> np.ndarray:
    """Grid points at least two shift widths away from either end."""
    width = max(1.0, c * tau)
    xi = grid.points
    return (xi >= grid.xi_min + 2 * width) & (xi <= grid.xi_max - 2 * width)


def sandwich_defect(lower, upper, c, model, grid, mask=None) -> float:
    """Largest relative failure of ``lower <= F(lower, upper)`` and ``F(upper, lower) <= upper``."""
    if mask is None:
        mask = _sandwich_mask(grid, c, model.tau)
    lo = apply_F(lower, upper, c, model, grid)
    up = apply_F(upper, lower, c, model, grid)
    scale = np.maximum(upper, 1e-300)
    d1 = ((lower - lo) / scale)[mask]
    d2 = ((up - upper) / scale)[mask]
    return float(max(d1.max(), d2.max()))


def _sandwich_mask(grid: WaveGrid, c: float, tau: float) -> np.ndarray:
    # the truncated left tail of the integral decays like exp(-beta x); skip where it exceeds the slack
    pad = 2 * max(1.0, c * tau) + math.log(1.0 / IN_RTOL) / grid.beta + 1.0
    xi = grid.points
    return (xi >= grid.xi_min + pad) & (xi <= grid.xi_max - 2 * max(1.0, c * tau))


def select_q(c, roots, eta, model, grid, q0: float = Q_START, q_cap: float = Q_CAP):
    """Double ``q`` from ``q0`` until the discrete sandwich inequality holds."""
    q = q0
    mask = _sandwich_mask(grid, c, model.tau)
    while True:
        upper, lower = bounds_pair(c, roots, q, eta, grid)
        defect = sandwich_defect(lower, upper, c, model, grid, mask)
        if defect <= IN_RTOL:
            return q, upper, lower
        if q * 2 > q_cap:
            raise IterationStalled(f"no q <= {q_cap:g} satisfies the sandwich inequality (defect {defect:.3g})",
                                   defect, 0)
        q *= 2


def default_eta(roots: RootPair) -> float:
    return 0.5 * (1.0 + min(2.0, roots.lambda2 / roots.lambda1))


def _gauge(phi: np.ndarray, xi: np.ndarray, E: float) -> float:
    level = 0.5 * E
    idx = np.flatnonzero(phi >= level)
    if idx.size == 0 or idx[0] == 0:
        return 0.0
    i = idx[0]
    return float(xi[i - 1] + (level - phi[i - 1]) / (phi[i] - phi[i - 1]) * (xi[i] - xi[i - 1]))


def _two_sided(c, model, grid, lower, upper, tol, max_iter):
    L, U = lower.copy(), upper.copy()
    mono = 0.0
    gap = float(np.abs(U - L).max())
    for k in range(1, max_iter + 1):
        # projection onto [lower, upper] stands in for the tail cut off below xi_min
        L_new = np.clip(apply_F(L, U, c, model, grid), lower, upper)
        U_new = np.clip(apply_F(U, L, c, model, grid), lower, upper)
        mono = max(mono, float((L - L_new).max()), float((U_new - U).max()))
        L, U = L_new, U_new
        gap = float(np.abs(U - L).max())
        if gap <= tol:
            return L, U, k, gap, mono
    raise IterationStalled(f"iteration stalled: gap {gap:.3g} > tol {tol:g} after {max_iter} iterations",
                           gap, max_iter)


def _polish(phi, c, model, grid, lower, upper, tol, max_iter):
    """Iterate the third-order operator inside the bracket; returns (phi, iterations)."""
    for k in range(1, max_iter + 1):
        nxt = np.clip(apply_F(phi, phi, c, model, grid, order=3), lower, upper)
        step = float(np.abs(nxt - phi).max())
        phi = nxt
        if step <= tol:
            break
    return phi, k


def _pin(phi: np.ndarray, grid: WaveGrid, level: float):
    """Integer grid shift putting the first crossing of ``level`` at xi = 0."""
    idx = np.flatnonzero(phi >= level)
    if idx.size == 0:
        raise IterationStalled("iteration stalled: profile collapsed below the gauge level",
                               float(phi.max()), 0)
    k = int(idx[0] - np.searchsorted(grid.points, 0.0))
    return (_shift(phi, k) if k else phi), k


def _pinned_iteration(phi, c, model, grid, E, tol, max_iter):
    """Plain iteration of ``P`` with the gauge re-pinned by exact grid shifts.

    Near the critical speed the truncated front creeps slowly relative to the frame,
    so convergence is judged on the shape: the change per iteration after removing
    its translation component ``s phi'``.  Returns (phi, iterations, shape defect, s).
    """
    phi, _ = _pin(phi, grid, 0.5 * E)
    defect, s = math.inf, 0.0
    for k in range(1, max_iter + 1):
        nxt = apply_F(phi, phi, c, model, grid, order=3)
        diff = nxt - phi
        dphi = np.gradient(phi, grid.h)
        s = float(diff @ dphi / (dphi @ dphi))
        defect = float(np.abs(diff - s * dphi).max())
        phi, _ = _pin(nxt, grid, 0.5 * E)
        if defect <= tol:
            return phi, k, defect, s
    raise IterationStalled(f"iteration stalled: shape defect {defect:.3g} > tol {tol:g} "
                           f"after {max_iter} iterations", defect, max_iter)


def solve_profile(c: float, model: LatticeModel, grid: Optional[WaveGrid] = None, tol: float = 1e-11,
                  max_iter: int = 20000, h: Optional[float] = None, eta: Optional[float] = None,
                  cstar: Optional[CharacteristicResult] = None, continuation_ratio: float = 1.05,
                  polish_tol: float = 1e-14, shape_tol: float = 1e-7) -> WaveProfile:
    """Wave profile with speed ``c >= c*``.

    From ``continuation_ratio * c*`` upward the two-sided scheme squeezes the fixed
    point to ``tol`` and a third-order polish then removes most of the quadrature error.
    Closer to ``c*`` the lower solution vanishes on any practical grid, so the profile
    converged at ``continuation_ratio * c*`` is iterated under ``P`` at ``c`` (or at
    ``c* + 1e-6`` for ``c = c*``) with the gauge pinned; see ``_pinned_iteration``.
    """
    if cstar is None:
        cstar = compute_cstar(model.D, model.rate)
    E = invaded_state(model.g)
    if c < cstar.c_star - 1e-9:
        raise NoRealRootsError(f"no admissible decay rate: c = {c:.12g} < c* = {cstar.c_star:.12g}")
    c_op = max(c, cstar.c_star + CRITICAL_OFFSET)
    roots = characteristic_roots(c_op, cstar)
    if grid is None:
        grid = make_grid(c_op, model, roots, h=h)
    eta = default_eta(roots) if eta is None else eta
    drift = 0.0

    if c_op >= continuation_ratio * cstar.c_star:
        q, upper, lower = select_q(c_op, roots, eta, model, grid)
        L, U, iters, gap, mono = _two_sided(c_op, model, grid, lower, upper, tol, max_iter)
        phi, extra = _polish(0.5 * (L + U), c_op, model, grid, lower, upper, polish_tol, max_iter)
        iters += extra
        method = "two-sided+polish"
    else:
        start = solve_profile(continuation_ratio * cstar.c_star, model, tol=tol, max_iter=max_iter,
                              h=grid.h, cstar=cstar)
        phi0 = start.evaluate(grid.points, gauged=False)
        phi, extra, gap, drift = _pinned_iteration(phi0, c_op, model, grid, E, shape_tol, max_iter)
        iters = start.iterations + extra
        q, mono = Q_START, 0.0
        upper, lower = bounds_pair(c_op, roots, q, eta, grid)
        method = "continuation"
        log.info("continuation to c = %.12g: residual drift %.3g per iteration", c_op, drift)

    viol = float(max((lower - phi).max(), (phi - upper).max()))
    defect = float(np.abs(apply_F(phi, phi, c_op, model, grid, order=3) - phi).max())
    profile = WaveProfile(
        c=c, grid=grid, phi=phi, residual_sup=math.nan, iterations=iters,
        bracket_ok=viol <= EPS_ORD, E=E, gap=gap, gauge_shift=_gauge(phi, grid.points, E),
        method=method, c_operator=c_op, q=q, eta=eta, lower=lower, upper=upper,
        bracket_violation=viol, monotone_violation=mono, fixed_point_defect=defect, drift=drift,
        h4_ok=check_hypotheses(model.g).h4_ok,
    )
    profile.residual_sup = profile_residual(profile, model)
    return profile


def residual_field(profile: WaveProfile, model: LatticeModel) -> np.ndarray:
    """``R = c phi' - D (phi(xi+1) + phi(xi-1) - 2 phi) - phi g(phi, phi(xi - c tau))``.

    Fourth-order central differences for ``phi'`` and cubic interpolation for the delay
    shift; NaN outside the interior.
    """
    grid = profile.grid
    phi = profile.phi
    c = profile.c_operator
    h = grid.h
    dphi = np.full_like(phi, np.nan)
    dphi[2:-2] = (-phi[4:] + 8 * phi[3:-1] - 8 * phi[1:-3] + phi[:-4]) / (12 * h)
    delayed = _delay_shift_cubic(phi, c * model.tau / h) if model.tau else phi
    lap = _shift(phi, grid.unit) + _shift(phi, -grid.unit) - 2 * phi
    R = c * dphi - model.D * lap - phi * model.g(phi, delayed)
    R[~interior_mask(grid, c, model.tau)] = np.nan
    return R


def profile_residual(profile: WaveProfile, model: LatticeModel) -> float:
    return float(np.nanmax(np.abs(residual_field(profile, model))))


@dataclass(frozen=True)
class ScanRow:
    c: float
    ratio: float
    status: str
    converged: bool
    residual: Optional[float] = None
    left_limit: Optional[float] = None
    right_limit: Optional[float] = None
    lambda1: Optional[float] = None
    iterations: Optional[int] = None
    method: Optional[str] = None
    message: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _scan_one(c, model, cstar, h, tol, max_iter) -> ScanRow:
    ratio = c / cstar.c_star
    try:
        roots = characteristic_roots(max(c, cstar.c_star + CRITICAL_OFFSET) if c >= cstar.c_star - 1e-9 else c, cstar)
    except NoRealRootsError as exc:
        return ScanRow(c, ratio, "no admissible decay rate", False, message=str(exc))
    try:
        prof = solve_profile(c, model, tol=tol, max_iter=max_iter, h=h, cstar=cstar)
    except IterationStalled as exc:
        return ScanRow(c, ratio, "stalled", False, lambda1=roots.lambda1, message=str(exc))
    return ScanRow(c, ratio, "converged", True, prof.residual_sup, prof.left_limit, prof.right_limit,
                   roots.lambda1, prof.iterations, prof.method, f"regime={prof.regime}")


def scan_wavespeeds(model: LatticeModel, c_values: Sequence[float], h: Optional[float] = None,
                    tol: float = 1e-11, max_iter: int = 20000, workers: int = 1) -> list:
    """Attempt a profile at each speed; speeds below ``c*`` record the missing decay rate."""
    cstar = compute_cstar(model.D, model.rate)
    args = [(float(c), model, cstar, h, tol, max_iter) for c in c_values]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda a: _scan_one(*a), args))
    return [_scan_one(*a) for a in args]
