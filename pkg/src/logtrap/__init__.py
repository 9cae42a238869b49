"""Gaussian wave packets in a rotating harmonic trap with logarithmic
nonlinearity: exact ansatz dynamics, stationary solutions and their
stability, plus an independent spectral PDE cross-check."""

from .core import (
    BranchScan,
    FoldEvent,
    GaussonState,
    Stability,
    StationaryPoint,
    TrapConfig,
    evaluate_wavefunction,
    gausson_norm,
    rotate_frame,
)
from .errors import (
    BranchAmbiguity,
    DegenerateMoments,
    EigenSolverFailure,
    LogTrapError,
    NonFinite,
    OutsideStabilityRegion,
    PositiveDefinitenessLost,
    SolverError,
    StepUnderflow,
)
from .gausson_ode import OdeMethod, OdeSettings, Trajectory, energy, integrate, rhs
from .pde import (
    Field2D,
    Frame,
    GaussianFit,
    Grid2D,
    PdeSettings,
    PdeTrajectory,
    evolve,
    fidelity,
    fit_gaussian,
    gausson_field,
    step,
)
from .stability import (
    SpectrumReport,
    Subsystem,
    classify,
    classify_scan,
    com_spectrum,
    shape_jacobian,
    shape_jacobian_analytic,
)
from .stationary import (
    ContinuationSettings,
    Region,
    StationaritySystem,
    find_all_roots,
    residual,
    solve_linear_rotating,
    solve_zero_rotation,
    trace_branches,
)

__version__ = "0.1.0"
