"""Characteristic function of the linearisation at zero, the critical speed and the decay roots.

``delta(lam, c) = D (e^lam + e^-lam - 2) - c lam + rate``.  The critical speed is the
infimum over ``lam > 0`` of ``psi(lam) = (D (e^lam + e^-lam - 2) + rate) / lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ROOT_TOL = 1e-12
CRITICAL_BAND = 1e-9


class NoRealRootsError(ValueError):
    """Raised when ``delta(., c)`` has no positive real root (``c`` below the critical speed)."""


@dataclass(frozen=True)
class CharacteristicResult:
    c_star: float
    lambda_star: float
    linearization_rate: float
    D: float


@dataclass(frozen=True)
class RootPair:
    c: float
    lambda1: float
    lambda2: float

    @property
    def double(self) -> bool:
        return self.lambda1 == self.lambda2


def delta(lam: float, c: float, D: float, rate: float) -> float:
    return D * (math.exp(lam) + math.exp(-lam) - 2.0) - c * lam + rate


def psi(lam: float, D: float, rate: float) -> float:
    # 2 (cosh - 1) = 4 sinh^2(lam/2) keeps small-lam values accurate
    return (4.0 * D * math.sinh(0.5 * lam) ** 2 + rate) / lam


def stationarity(lam: float, D: float, rate: float) -> float:
    """``lam psi'(lam)`` up to the positive factor ``lam``; strictly increasing in ``lam``."""
    return lam * D * (math.exp(lam) - math.exp(-lam)) - 4.0 * D * math.sinh(0.5 * lam) ** 2 - rate


def bisect(f, lo: float, hi: float, tol: float = ROOT_TOL, max_iter: int = 400) -> float:
    """Root of ``f`` on ``[lo, hi]`` given a sign change; stops at width ``tol`` or exact zero."""
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            return mid
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def compute_cstar(D: float, rate: float) -> CharacteristicResult:
    """Critical speed ``c*`` and its minimiser ``lambda*``.

    The stationarity function is strictly increasing, negative near 0 and unbounded
    above, so a doubling bracket from 1 followed by bisection finds ``lambda*``.
    """
    if not D > 0:
        raise ValueError("coupling D must be positive")
    if not rate > 0:
        raise ValueError("linearization rate must be positive")

    def s(lam):
        return stationarity(lam, D, rate)

    lo, hi = 1.0, 1.0
    while s(lo) > 0:
        lo *= 0.5
    while s(hi) < 0:
        hi *= 2.0
    lam_star = bisect(s, lo, hi)
    return CharacteristicResult(psi(lam_star, D, rate), lam_star, float(rate), float(D))


def characteristic_roots(c: float, res: CharacteristicResult, D: float | None = None,
                         rate: float | None = None, band: float = CRITICAL_BAND) -> RootPair:
    """Roots ``lambda1(c) <= lambda2(c)`` of ``delta(., c) = 0``.

    Within ``band`` of ``c*`` the double root ``lambda*`` is returned.
    """
    D = res.D if D is None else D
    rate = res.linearization_rate if rate is None else rate
    if not c > 0:
        raise ValueError("wave speed c must be positive")
    if abs(c - res.c_star) <= band:
        return RootPair(c, res.lambda_star, res.lambda_star)
    if c < res.c_star:
        raise NoRealRootsError(
            f"no real roots below critical speed: c = {c:.12g} < c* = {res.c_star:.12g}"
        )

    def f(lam):
        return delta(lam, c, D, rate)

    lam_star = res.lambda_star
    # delta(0+) = rate > 0 and delta(lambda*) < 0; the far side grows like D e^lam
    lam1 = bisect(f, 0.0, lam_star)
    hi = 2.0 * lam_star
    while f(hi) <= 0:
        hi *= 2.0
    lam2 = bisect(f, lam_star, hi)
    return RootPair(c, lam1, lam2)


def delta_table(c: float, D: float, rate: float, lam_max: float = 5.0, n: int = 500):
    """Rows ``(lam, delta(lam, c))`` on ``(0, lam_max]`` for plotting."""
    return [(lam_max * k / n, delta(lam_max * k / n, c, D, rate)) for k in range(1, n + 1)]
