"""Acceptance criteria, one check per criterion at its stated tolerance.

Run under pytest (a PASS/FAIL line per criterion is printed in the terminal
summary) or directly: ``python tests/test_acceptance.py``.
"""

import functools
import itertools
import math
import sys
import time

import numpy as np
import pytest

from delaylattice import (
    InitialData,
    LatticeModel,
    NoRealRootsError,
    Nonlinearity,
    characteristic_roots,
    check_hypotheses,
    compute_cstar,
    cone_checks,
    delta,
    estimate_speed,
    sandwich_check,
    scan_wavespeeds,
    simulate,
    solve_profile,
    track_front,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # direct script run from another directory
    ACCEPTANCE_LINES = []

G = Nonlinearity.logistic(1.0, 0.5)
E = 2.0 / 3.0
N_BENCH, DT_BENCH, T_BENCH = 600, 0.02, 200.0
SIM_BOUNDS = []  # (min, max) of every simulation run below, for criterion 7


def _model(tau=1.0):
    return LatticeModel(1.0, tau, G)


@functools.lru_cache(maxsize=None)
def cstar():
    return compute_cstar(1.0, 1.0)


def _record(traj):
    SIM_BOUNDS.append((traj.min_value, traj.max_value))
    return traj


@functools.lru_cache(maxsize=None)
def bench_run(tau, dt=DT_BENCH):
    t0 = time.perf_counter()
    traj = simulate(_model(tau), InitialData.bump(), N_BENCH, dt, T_BENCH)
    return _record(traj), time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def bench_speed(tau):
    traj, elapsed = bench_run(tau)
    return estimate_speed(track_front(traj, E / 2), 0.5), elapsed


@functools.lru_cache(maxsize=None)
def profile(h=None):
    return solve_profile(1.2 * cstar().c_star, _model(), h=h, cstar=cstar())


# ---------------------------------------------------------------- criteria

def criterion_1():
    t0 = time.perf_counter()
    res = compute_cstar(1.0, 1.0)
    elapsed = time.perf_counter() - t0
    lam = np.arange(1, 5_000_001) * 1e-6
    scan = (4.0 * np.sinh(lam / 2) ** 2 + 1.0) / lam
    oracle = float(scan.min())
    err = abs(res.c_star - oracle)
    return err <= 1e-8 and elapsed < 1.0, f"c*={res.c_star:.12f} oracle={oracle:.12f} |diff|={err:.2e} time={elapsed:.4f}s"


def criterion_2():
    res = cstar()
    rng = np.random.default_rng(2024)
    worst, ok = 0.0, True
    for c in rng.uniform(res.c_star, 3 * res.c_star, 20):
        c = max(c, res.c_star * (1 + 1e-9) + 1e-9)
        rp = characteristic_roots(c, res)
        r1, r2 = abs(delta(rp.lambda1, c, 1, 1)), abs(delta(rp.lambda2, c, 1, 1))
        worst = max(worst, r1, r2)
        ok &= r1 <= 1e-10 and r2 <= 1e-10
        ok &= rp.lambda1 < res.lambda_star < rp.lambda2
        ok &= delta(0.5 * (rp.lambda1 + rp.lambda2), c, 1, 1) < 0
    errors = 0
    for c in rng.uniform(0.0, res.c_star, 20):
        c = min(max(c, 1e-3), res.c_star - 1e-6)
        try:
            characteristic_roots(c, res)
        except NoRealRootsError:
            errors += 1
    ok &= errors == 20
    return bool(ok), f"max|Delta(roots)|={worst:.2e}, below-c* errors {errors}/20"


def criterion_3():
    vals = [compute_cstar(1.0, r).c_star for r in (0.5, 1.0, 2.0, 4.0)]
    ok = all(a < b for a, b in zip(vals, vals[1:]))
    return ok, "c* = " + ", ".join(f"{v:.6f}" for v in vals)


def criterion_4():
    est, elapsed = bench_speed(1.0)
    rel = abs(est.speed - cstar().c_star) / cstar().c_star
    ok = rel <= 0.05 and est.r_squared >= 0.99 and elapsed <= 300
    return ok, f"speed={est.speed:.5f} c*={cstar().c_star:.5f} rel={rel:.4f} r2={est.r_squared:.7f} time={elapsed:.1f}s"


def criterion_5():
    speeds = {tau: bench_speed(tau)[0].speed for tau in (0.0, 1.0, 5.0)}
    worst = max(abs(a - b) / min(a, b) for a, b in itertools.combinations(speeds.values(), 2))
    return worst <= 0.02, ", ".join(f"tau={t:g}: {s:.5f}" for t, s in speeds.items()) + f"; max pairwise {worst:.2e}"


def criterion_6():
    rep = cone_checks(bench_run(1.0)[0], cstar().c_star, E, 0.5, 1.2, 1e-2, 1e-3)
    ok = rep.inner_ok and rep.outer_ok is True
    return ok, f"inner max|u-E|={rep.inner_deviation:.2e}, outer max u={rep.outer_max:.2e}"


def criterion_7():
    # force every simulation of the suite (all cached), then pool their extremes
    for tau in (0.0, 1.0, 5.0):
        bench_run(tau)
    for dt in (0.01, 0.005):
        bench_run(1.0, dt)
    wave_run()
    lo = min(b[0] for b in SIM_BOUNDS)
    hi = max(b[1] for b in SIM_BOUNDS)
    return lo >= -1e-8 and hi <= 1 + 1e-8, f"{len(SIM_BOUNDS)} runs: min u={lo:.3e}, max u={hi:.6f}"


def criterion_8():
    traj = bench_run(1.0)[0]
    rep = sandwich_check(traj, eps=1e-6)
    return rep.ok, f"{rep.checked_steps} stored steps, max excess={rep.max_violation:.2e}"


def criterion_9():
    p = profile()
    fine = profile(p.grid.h / 2)
    ratio = p.residual_sup / fine.residual_sup
    ok = (p.residual_sup <= 1e-4 and p.left_limit <= 1e-6 and abs(p.right_limit - E) <= 1e-3
          and p.bracket_violation <= 1e-6 and ratio >= 4)
    return ok, (f"residual={p.residual_sup:.2e} (h/2: {fine.residual_sup:.2e}, ratio {ratio:.2f}), "
                f"phi(-)={p.left_limit:.1e}, phi(+)={p.right_limit:.8f}, bracket excess={p.bracket_violation:.1e}")


@functools.lru_cache(maxsize=None)
def wave_run(N=200, T=20.0):
    p = profile()
    phi = lambda x: p.evaluate(x, gauged=False)
    return _record(simulate(_model(), InitialData.from_profile(phi, p.c_operator, N), N, DT_BENCH, T, stride=5))


def criterion_10():
    p = profile()
    c, N = p.c_operator, 200
    phi = lambda x: p.evaluate(x, gauged=False)
    traj = wave_run(N)
    # the ghost-zero boundary erodes the equilibrium side from n = N inward; compare well inside
    inner = np.abs(traj.sites) <= N - 60
    drift = max(float(np.abs(u[inner] - phi(traj.sites[inner] + c * t)).max())
                for t, u in zip(traj.times, traj.states))
    return drift <= 1e-3, f"sup |u_n(t) - phi(n+ct)| over t<=20, |n|<={N - 60}: {drift:.2e}"


def criterion_11():
    ratios = (0.5, 0.9, 1.0, 1.1, 1.5)
    rows = scan_wavespeeds(_model(), [r * cstar().c_star for r in ratios], workers=5)
    ok = True
    for r, row in zip(ratios, rows):
        want = "no admissible decay rate" if r < 1 else "converged"
        ok &= row.status == want
        if r >= 1:
            ok &= row.left_limit <= 1e-6 and abs(row.right_limit - E) <= 1e-3
    return bool(ok), "; ".join(f"{r}c*: {row.status}" for r, row in zip(ratios, rows))


def criterion_12():
    finals = [bench_run(1.0, dt)[0].final for dt in (0.02, 0.01, 0.005)]
    e1 = float(np.abs(finals[0] - finals[1]).max())
    e2 = float(np.abs(finals[1] - finals[2]).max())
    order = math.log2(e1 / e2)
    return order >= 3.5, f"|u(dt)-u(dt/2)|={e1:.2e}, |u(dt/2)-u(dt/4)|={e2:.2e}, order={order:.3f}"


def criterion_13():
    rng = np.random.default_rng(13)
    pairs = [(float(r), float(a)) for r, a in zip(rng.uniform(0.1, 5.0, 49), rng.uniform(0.0, 1.5, 49))]
    pairs.append((float(rng.uniform(0.1, 5.0)), 1.0))
    mismatches = []
    for r, a in pairs:
        rep = check_hypotheses(Nonlinearity.logistic(r, a))
        want = (True, True, 0 < a < 1, a < 1)
        got = (rep.h1_ok, rep.h2_ok, rep.h3_ok, rep.h4_ok)
        if got != want or (rep.h3_ok and abs(rep.E - 1 / (1 + a)) > 1e-9):
            mismatches.append((r, a, got))
    a1 = check_hypotheses(Nonlinearity.logistic(pairs[-1][0], 1.0))
    ok = not mismatches and not a1.h3_ok
    return ok, f"{len(pairs) - len(mismatches)}/{len(pairs)} match closed form; a=1 h3_ok={a1.h3_ok}"


CRITERIA = [(i, globals()[f"criterion_{i}"]) for i in range(1, 14)]


def run_one(i, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {i:2d}: {detail}  ({time.perf_counter() - t0:.1f}s)"
    print(line)
    return ok, line


@pytest.mark.parametrize("i,fn", CRITERIA, ids=[f"criterion_{i}" for i, _ in CRITERIA])
def test_criterion(i, fn):
    ok, line = run_one(i, fn)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


if __name__ == "__main__":
    results = [run_one(i, fn)[0] for i, fn in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
