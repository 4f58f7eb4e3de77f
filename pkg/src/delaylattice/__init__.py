"""Propagation analysis for delayed lattice equations with a non-quasimonotone delayed term.

The model is ``du_n/dt = D (u_{n+1} - 2 u_n + u_{n-1}) + u_n g(u_n(t), u_n(t - tau))``.
"""

from .model import (
    HypothesisReport,
    LatticeModel,
    Nonlinearity,
    check_hypotheses,
    equilibrium,
    invaded_state,
)
from .dispersion import (
    CharacteristicResult,
    NoRealRootsError,
    RootPair,
    characteristic_roots,
    compute_cstar,
    delta,
)
from .simulator import (
    InitialData,
    OrderingReport,
    SimulationError,
    Trajectory,
    comparison_check,
    sandwich_check,
    simulate,
)
from .spreading import (
    ConeReport,
    FrontTrace,
    SpeedEstimate,
    cone_checks,
    estimate_speed,
    track_front,
)
from .waves import (
    IterationStalled,
    ScanRow,
    WaveGrid,
    WaveProfile,
    apply_F,
    bounds_pair,
    make_grid,
    profile_residual,
    scan_wavespeeds,
    solve_profile,
)

__version__ = "0.1.0"
