"""Nonlinearities, the lattice model, and screens for the standing hypotheses H1-H4.

The reaction term is ``u * g(u, v)`` where ``v`` is the delayed density.  The
hypotheses quantify over continua, so :func:`check_hypotheses` samples them on a
finite grid and records a witness for every failed screen.  A passing screen is a
necessary condition only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

GFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _spot_check_lipschitz(func: GFunc, bound: float, n: int = 64) -> float:
    """Largest finite-difference slope of ``func`` in either argument on [0,1]^2."""
    s = np.linspace(0.0, 1.0, n + 1)
    U, V = np.meshgrid(s, s, indexing="ij")
    G = np.asarray(func(U, V), dtype=float)
    step = 1.0 / n
    du = np.abs(np.diff(G, axis=0)).max() / step
    dv = np.abs(np.diff(G, axis=1)).max() / step
    slope = float(max(du, dv))
    if slope > bound * (1.0 + 1e-6) + 1e-12:
        raise ValueError(
            f"lipschitz_bound {bound:g} is below the observed slope {slope:g} of g on [0,1]^2"
        )
    return slope


@dataclass(frozen=True)
class Nonlinearity:
    """Birth/competition function ``g(u, v)`` with a per-argument Lipschitz bound on [0,1]^2.

    Use the constructors :meth:`logistic`, :meth:`from_callable` and :meth:`from_table`.
    Evaluators must accept numpy arrays and broadcast elementwise.
    """

    kind: str
    func: GFunc = field(repr=False, compare=False)
    lipschitz_bound: float
    params: dict = field(default_factory=dict)

    def __call__(self, u, v):
        return self.func(u, v)

    @classmethod
    def logistic(cls, r: float = 1.0, a: float = 0.5) -> "Nonlinearity":
        """``g(u, v) = r (1 - u - a v)``; the hypothesis regime is ``0 < a < 1``."""
        r = float(r)
        a = float(a)
        if not (np.isfinite(r) and r > 0):
            raise ValueError(f"logistic growth rate r must be positive, got {r}")
        if not (np.isfinite(a) and a >= 0):
            raise ValueError(f"logistic competition weight a must be >= 0, got {a}")

        def g(u, v):
            return r * (1.0 - u - a * v)

        return cls("logistic", g, r * max(1.0, a), {"r": r, "a": a})

    @classmethod
    def from_callable(cls, func: GFunc, lipschitz_bound: float, name: str = "callable") -> "Nonlinearity":
        if not lipschitz_bound >= 0:
            raise ValueError("lipschitz_bound must be >= 0")
        _spot_check_lipschitz(func, lipschitz_bound)
        return cls(name, func, float(lipschitz_bound), {})

    @classmethod
    def from_table(cls, u, v, values, lipschitz_bound: float) -> "Nonlinearity":
        """Bilinear interpolation of tabulated ``g`` (linear extrapolation outside the table)."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (u.size, v.size):
            raise ValueError(f"table shape {values.shape} does not match axes ({u.size}, {v.size})")
        if not np.all(np.isfinite(values)):
            raise ValueError("table contains non-finite values")
        interp = RegularGridInterpolator((u, v), values, bounds_error=False, fill_value=None)

        def g(uu, vv):
            uu, vv = np.broadcast_arrays(np.asarray(uu, dtype=float), np.asarray(vv, dtype=float))
            pts = np.stack([uu.ravel(), vv.ravel()], axis=-1)
            out = interp(pts).reshape(uu.shape)
            return out if out.ndim else float(out)

        _spot_check_lipschitz(g, lipschitz_bound)
        params = {"u": u.tolist(), "v": v.tolist(), "values": values.tolist()}
        return cls("table", g, float(lipschitz_bound), params)

    @classmethod
    def from_spec(cls, spec: dict) -> "Nonlinearity":
        """Build from a config block ``{kind = "logistic", r, a}`` or ``{kind = "table", u, v, values, lipschitz}``."""
        kind = spec.get("kind", "logistic")
        if kind == "logistic":
            return cls.logistic(spec.get("r", 1.0), spec.get("a", 0.5))
        if kind == "table":
            missing = [k for k in ("u", "v", "values", "lipschitz") if k not in spec]
            if missing:
                raise ValueError(f"table nonlinearity is missing {', '.join(missing)}")
            return cls.from_table(spec["u"], spec["v"], spec["values"], spec["lipschitz"])
        raise ValueError(f"unknown nonlinearity kind {kind!r}")

    def to_spec(self) -> dict:
        if self.kind == "logistic":
            return {"kind": "logistic", **self.params}
        if self.kind == "table":
            return {"kind": "table", "lipschitz": self.lipschitz_bound, **self.params}
        return {"kind": self.kind, "lipschitz": self.lipschitz_bound}

    def reaction_lipschitz(self, v: float = 1.0, n: int = 2048) -> float:
        """Lipschitz bound of ``u -> u g(u, v)`` on [0, 1]."""
        if self.kind == "logistic":
            r, a = self.params["r"], self.params["a"]
            # d/du [r u (1 - a v - u)] = r (1 - a v - 2u)
            return r * max(abs(1 - a * v), abs(1 + a * v))
        u = np.linspace(0.0, 1.0, n + 1)
        return float(np.abs(self(u, np.full_like(u, v))).max()) + self.lipschitz_bound


@dataclass(frozen=True)
class LatticeModel:
    D: float
    tau: float
    g: Nonlinearity

    def __post_init__(self):
        if not (np.isfinite(self.D) and self.D > 0):
            raise ValueError(f"coupling D must be positive, got {self.D}")
        if not (np.isfinite(self.tau) and self.tau >= 0):
            raise ValueError(f"delay tau must be >= 0, got {self.tau}")

    @property
    def rate(self) -> float:
        """Linearisation rate ``g(0, 0)`` at the zero state."""
        return float(self.g(0.0, 0.0))

    def with_tau(self, tau: float) -> "LatticeModel":
        return LatticeModel(self.D, tau, self.g)

    def with_g(self, g: Nonlinearity) -> "LatticeModel":
        return LatticeModel(self.D, self.tau, g)


class Violation(NamedTuple):
    hypothesis: str
    point: tuple
    value: float


@dataclass
class HypothesisReport:
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool
    h4_ok: bool
    E: Optional[float]
    violations: list
    grid_n: int
    note: str = "finite-grid screen: passing flags are necessary conditions, not proofs"

    @property
    def all_ok(self) -> bool:
        return self.h1_ok and self.h2_ok and self.h3_ok and self.h4_ok

    def as_dict(self) -> dict:
        return {
            "h1_ok": self.h1_ok,
            "h2_ok": self.h2_ok,
            "h3_ok": self.h3_ok,
            "h4_ok": self.h4_ok,
            "E": self.E,
            "grid_n": self.grid_n,
            "violations": [
                {"hypothesis": v.hypothesis, "point": list(v.point), "value": v.value}
                for v in self.violations
            ],
            "note": self.note,
        }


def _finite(values, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"nonlinearity returned non-finite values ({what})")
    return values


def equilibrium(g: Nonlinearity, tol_root: float = 1e-12) -> float:
    """Positive equilibrium ``E`` in (0, 1) with ``g(E, E) = 0``, by bisection on the diagonal.

    The bracket is halved down to adjacent floats; ``|g(E, E)| <= tol_root`` is then required.
    """
    if not tol_root > 0:
        raise ValueError("tol_root must be positive")
    lo, hi = 0.0, 1.0
    g_lo = float(_finite(g(lo, lo), "g(0,0)"))
    g_hi = float(_finite(g(hi, hi), "g(1,1)"))
    if not (g_lo > 0 and g_hi < 0):
        raise ValueError("no positive equilibrium on (0,1)")
    while True:
        mid = 0.5 * (lo + hi)
        val = float(_finite(g(mid, mid), "diagonal"))
        if val == 0.0 or mid in (lo, hi):
            if abs(val) > tol_root:
                raise ValueError(f"diagonal root not resolved: |g(E,E)| = {abs(val):.3g} > {tol_root:g}")
            return mid
        if val > 0:
            lo = mid
        else:
            hi = mid


def invaded_state(g: Nonlinearity, tol_root: float = 1e-12) -> float:
    """State behind an invasion front: ``E`` when it exists, else 1 when ``g(1, 1) = 0``.

    The boundary case covers the undelayed-competition logistic (``a = 0``).
    """
    try:
        return equilibrium(g, tol_root)
    except ValueError:
        if abs(float(g(1.0, 1.0))) <= tol_root and float(g(0.0, 0.0)) > 0:
            return 1.0
        raise


def check_hypotheses(g: Nonlinearity, grid_n: int = 64, tol_root: float = 1e-12) -> HypothesisReport:
    if grid_n < 16:
        raise ValueError("grid_n must be >= 16")
    if not tol_root > 0:
        raise ValueError("tol_root must be positive")
    s = np.linspace(0.0, 1.0, grid_n + 1)
    inner = s[1:-1]
    U, V = np.meshgrid(s, s, indexing="ij")
    G = _finite(g(U, V), "grid")
    violations: list[Violation] = []

    # H1
    h1_ok = True
    g10 = float(_finite(g(1.0, 0.0), "g(1,0)"))
    if abs(g10) > tol_root:
        h1_ok = False
        violations.append(Violation("H1", (1.0, 0.0), g10))
    gu0 = _finite(g(inner, np.zeros_like(inner)), "g(u,0)")
    bad = np.flatnonzero(gu0 <= 0)
    if bad.size:
        h1_ok = False
        violations.append(Violation("H1", (float(inner[bad[0]]), 0.0), float(gu0[bad[0]])))

    # H2: nonincreasing in each argument, plus the single unboundedness probe
    h2_ok = True
    inc_v = np.argwhere(np.diff(G, axis=1) > 0)
    if inc_v.size:
        i, j = inc_v[0]
        h2_ok = False
        violations.append(Violation("H2", (float(s[i]), float(s[j + 1])), float(G[i, j + 1] - G[i, j])))
    inc_u = np.argwhere(np.diff(G, axis=0) > 0)
    if inc_u.size:
        i, j = inc_u[0]
        h2_ok = False
        violations.append(Violation("H2", (float(s[i + 1]), float(s[j])), float(G[i + 1, j] - G[i, j])))
    g_far = float(_finite(g(10.0, 0.0), "g(10,0)"))
    if not g_far < 0:
        h2_ok = False
        violations.append(Violation("H2", (10.0, 0.0), g_far))

    # H3
    h3_ok = True
    g01 = float(_finite(g(0.0, 1.0), "g(0,1)"))
    if not g01 > 0:
        h3_ok = False
        violations.append(Violation("H3", (0.0, 1.0), g01))
    try:
        E = equilibrium(g, tol_root)
    except ValueError:
        E = None
        h3_ok = False
        violations.append(Violation("H3", (1.0, 1.0), float(g(1.0, 1.0))))

    # H4: ordered pairs lo <= hi in (0,1) with g(lo, hi) <= 0 <= g(hi, lo) must collapse to (E, E)
    LO, HI = np.meshgrid(inner, inner, indexing="ij")
    g_lohi = _finite(g(LO, HI), "H4 scan")
    g_hilo = _finite(g(HI, LO), "H4 scan")
    cand = (HI >= LO) & (g_lohi <= 0) & (g_hilo >= 0)
    if E is not None:
        cand &= ~((np.abs(LO - E) <= tol_root) & (np.abs(HI - E) <= tol_root))
    hits = np.argwhere(cand)
    h4_ok = hits.size == 0
    if not h4_ok:
        i, j = hits[0]
        violations.append(Violation("H4", (float(LO[i, j]), float(HI[i, j])), float(g_lohi[i, j])))

    return HypothesisReport(h1_ok, h2_ok, h3_ok, h4_ok, E, violations, grid_n)
