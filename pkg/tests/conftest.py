import pytest

from delaylattice import InitialData, LatticeModel, Nonlinearity, compute_cstar, simulate

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def logistic():
    return Nonlinearity.logistic(1.0, 0.5)


@pytest.fixture(scope="session")
def benchmark(logistic):
    return LatticeModel(1.0, 1.0, logistic)


@pytest.fixture(scope="session")
def cstar():
    return compute_cstar(1.0, 1.0)


@pytest.fixture(scope="session")
def benchmark_runs(logistic):
    """Bump runs on the benchmark lattice (N=600, dt=0.02, T=200) for tau in {0, 1, 5}."""
    return {tau: simulate(LatticeModel(1.0, tau, logistic), InitialData.bump(), 600, 0.02, 200.0)
            for tau in (0.0, 1.0, 5.0)}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
