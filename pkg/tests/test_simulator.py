import numpy as np
import pytest

from delaylattice import (
    InitialData,
    LatticeModel,
    Nonlinearity,
    SimulationError,
    comparison_check,
    sandwich_check,
    simulate,
)
from delaylattice.simulator import resolve_dt, stability_limit


def test_equilibrium_history_is_stationary(benchmark):
    # the ghost-zero boundary erodes the outermost sites; |n| <= 60 is far outside its reach by T = 20
    traj = simulate(benchmark, InitialData.constant(120, 2 / 3), 120, 0.02, 20.0)
    inner = np.abs(traj.sites) <= 60
    assert np.abs(traj.states[:, inner] - 2 / 3).max() <= 1e-9


def test_zero_history_stays_zero(benchmark):
    traj = simulate(benchmark, InitialData.bump(amplitude=0.0), 40, 0.02, 10.0)
    assert not traj.states.any()


def test_bump_bounds_and_convergence(benchmark):
    traj = simulate(benchmark, InitialData.bump(), 200, 0.02, 60.0)
    assert traj.min_value >= -1e-8 and traj.max_value <= 1 + 1e-8
    assert traj.final[traj.N] == pytest.approx(2 / 3, abs=1e-3)


def test_times_equally_spaced(benchmark):
    traj = simulate(benchmark, InitialData.bump(), 60, 0.02, 10.0, stride=5)
    assert np.allclose(np.diff(traj.times), 5 * traj.dt)
    assert traj.states.shape == (traj.times.size, 2 * 60 + 1)


def test_dt_snapped_to_delay(benchmark):
    dt, m = resolve_dt(benchmark, 0.015)
    assert m * dt == pytest.approx(1.0) and dt <= 0.015
    assert resolve_dt(benchmark.with_tau(0.0), 0.015) == (0.015, 0)


def test_stability_bound(benchmark):
    assert stability_limit(benchmark) == pytest.approx(0.02)
    with pytest.raises(ValueError, match="stability"):
        simulate(benchmark, InitialData.bump(), 50, 0.05, 1.0)


def test_truncation_too_small(benchmark):
    with pytest.raises(SimulationError, match="truncation too small"):
        simulate(benchmark, InitialData.bump(), 20, 0.02, 30.0)


def test_speed_bound_precondition(benchmark):
    with pytest.raises(ValueError, match="too small"):
        simulate(benchmark, InitialData.bump(), 50, 0.02, 30.0, speed_bound=4.0)


def test_initial_data_validation():
    with pytest.raises(ValueError):
        InitialData(1, values=np.array([0.1, 1.5, 0.1]))
    with pytest.raises(ValueError):
        InitialData(1)
    assert not InitialData.bump(amplitude=0.0).satisfies_I3
    assert InitialData.bump().satisfies_I3


def test_sampled_history(benchmark):
    dt, m = resolve_dt(benchmark, 0.02)
    rows = np.tile(np.array([0.0, 0.5, 0.5, 0.5, 0.0]), (m + 1, 1))
    a = simulate(benchmark, InitialData(2, samples=rows), 80, dt, 10.0)
    b = simulate(benchmark, InitialData(2, values=rows[0]), 80, dt, 10.0)
    assert np.abs(a.states - b.states).max() <= 1e-14


def test_history_jump_rejected(benchmark):
    dt, m = resolve_dt(benchmark, 0.02)
    rows = np.zeros((m + 1, 5))
    rows[-1, 2] = 0.9
    with pytest.raises(ValueError, match="jumps"):
        simulate(benchmark, InitialData(2, samples=rows), 40, dt, 1.0)


def test_reflection_symmetry(benchmark):
    traj = simulate(benchmark, InitialData.bump(), 150, 0.02, 30.0)
    assert np.abs(traj.states - traj.states[:, ::-1]).max() <= 1e-12


def test_sandwich_bump(benchmark):
    traj = simulate(benchmark, InitialData.bump(), 150, 0.02, 40.0)
    rep = sandwich_check(traj)
    assert rep.ok, rep.first_violation


def test_sandwich_tau_zero(benchmark):
    traj = simulate(benchmark.with_tau(0.0), InitialData.bump(), 150, 0.02, 40.0)
    assert sandwich_check(traj).ok


def test_sandwich_a0_upper_equals_delayed():
    model = LatticeModel(1.0, 1.0, Nonlinearity.logistic(1.0, 0.0))
    traj = simulate(model, InitialData.bump(), 150, 0.02, 30.0)
    rep = sandwich_check(traj)
    assert rep.ok and rep.detail["max_gap_upper"] <= 1e-9


def test_comparison_zero_low():
    model = LatticeModel(1.0, 0.0, Nonlinearity.logistic(1.0, 0.0))
    rep = comparison_check(model, InitialData.bump(amplitude=0.0), InitialData.bump(), 100, 0.02, 20.0)
    assert rep.ok


def test_comparison_scaled_bumps():
    model = LatticeModel(1.0, 0.0, Nonlinearity.logistic(1.0, 0.0))
    rep = comparison_check(model, InitialData.bump(amplitude=0.3), InitialData.bump(amplitude=0.6),
                           160, 0.02, 50.0)
    assert rep.ok


def test_comparison_against_one():
    model = LatticeModel(1.0, 0.0, Nonlinearity.logistic(1.0, 0.0))
    N = 100
    rep = comparison_check(model, InitialData.bump(), InitialData.constant(N, 1.0), N, 0.02, 20.0)
    assert rep.ok and rep.detail["final_high_center"] == pytest.approx(1.0, abs=1e-12)


def test_comparison_requires_undelayed(benchmark):
    with pytest.raises(ValueError, match="undelayed"):
        comparison_check(benchmark, InitialData.bump(amplitude=0.1), InitialData.bump(), 50, 0.02, 1.0)


def test_manifest_fields(benchmark):
    traj = simulate(benchmark, InitialData.bump(), 60, 0.02, 5.0)
    man = traj.manifest()
    for key in ("D", "tau", "nonlinearity", "N", "dt", "T", "stride", "steps"):
        assert key in man
