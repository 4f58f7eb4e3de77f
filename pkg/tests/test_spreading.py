from dataclasses import replace

import numpy as np
import pytest

from delaylattice import FrontTrace, InitialData, cone_checks, estimate_speed, simulate, track_front


@pytest.fixture(scope="module")
def short_run(benchmark):
    return simulate(benchmark, InitialData.bump(), 200, 0.02, 60.0)


def test_zero_trajectory_gives_empty_trace(benchmark):
    traj = simulate(benchmark, InitialData.bump(amplitude=0.0), 40, 0.02, 5.0)
    assert track_front(traj, 1 / 3).empty


def test_symmetric_positions(short_run):
    tr = track_front(short_run, 1 / 3)
    assert not tr.empty
    assert np.abs(tr.right_positions + tr.left_positions).max() <= 1e-9
    assert np.all(tr.right_positions >= tr.left_positions)


def test_monotone_after_transient(benchmark_runs):
    tr = track_front(benchmark_runs[1.0], 1 / 3)
    late = tr.times >= 50
    assert np.all(np.diff(tr.right_positions[late]) > 0)


def test_level_precondition(short_run):
    with pytest.raises(ValueError):
        track_front(short_run, 1.0)


def test_exact_line():
    t = np.linspace(0, 10, 41)
    est = estimate_speed(FrontTrace(0.5, t, 3 * t, -3 * t), 0.5)
    assert est.speed == pytest.approx(3.0, abs=1e-12)
    assert est.r_squared == pytest.approx(1.0, abs=1e-12)
    assert est.verdict == "converged"
    assert estimate_speed(FrontTrace(0.5, t, 3 * t, -3 * t), 0.5, side="left").speed == pytest.approx(3.0)


def test_insufficient_data():
    t = np.linspace(0, 1, 12)
    with pytest.raises(ValueError, match="insufficient data"):
        estimate_speed(FrontTrace(0.5, t, t, -t), 0.5)


def test_transient_verdict():
    t = np.linspace(0, 10, 101)
    x = np.where(np.arange(t.size) % 2, 1.0, -1.0)
    est = estimate_speed(FrontTrace(0.5, t, x, -x), 0.0)
    assert est.verdict == "transient"


def test_speed_tau_zero_and_one(benchmark_runs, cstar):
    s1 = estimate_speed(track_front(benchmark_runs[1.0], 1 / 3)).speed
    s0 = estimate_speed(track_front(benchmark_runs[0.0], 1 / 3)).speed
    assert abs(s1 - cstar.c_star) / cstar.c_star <= 0.05
    assert abs(s0 - s1) / s1 <= 0.02


def test_cone_checks_tau5(benchmark_runs, cstar):
    rep = cone_checks(benchmark_runs[5.0], cstar.c_star, 2 / 3)
    assert rep.inner_ok and rep.outer_ok


def test_cone_on_equilibrium_state(benchmark_runs, cstar):
    traj = benchmark_runs[1.0]
    flat = replace(traj, states=np.full_like(traj.states, 2 / 3))
    rep = cone_checks(flat, cstar.c_star, 2 / 3, outer=10.0)
    assert rep.inner_deviation == 0.0
    assert rep.outer_ok is None and rep.passed


def test_cone_requires_long_run(benchmark, cstar):
    traj = simulate(benchmark, InitialData.bump(), 60, 0.02, 5.0)
    with pytest.raises(ValueError, match="too short"):
        cone_checks(traj, cstar.c_star, 2 / 3)
