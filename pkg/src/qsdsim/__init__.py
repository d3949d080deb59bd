"""Monte Carlo quantum state diffusion for alternating spin measurements.

The package simulates continuous stochastic trajectories of spin-1/2 and
spin-1 density matrices driven by alternating z and x measurement channels,
using a positivity-preserving incremental Kraus stepper (reference) and an
Euler-Maruyama integrator of the equivalent diffusion (cross-check), plus the
analysis layer for dwell times, Born fractions, cumulative densities, and
collapse-time statistics.
"""

from .analysis import (
    CollapseTimeStats,
    DwellStats,
    Histogram2D,
    INCOMPLETE,
    OutcomeSequence,
    accumulate_density,
    born_probabilities,
    cascade_trace,
    classify_eigenstate,
    collapse_times,
    dwell_times,
    outcome_sequence,
    petal_polygons,
    superposition_loci,
)
from .engine import (
    EngineConfig,
    EngineError,
    NoiseSource,
    PositivityWarning,
    TrajectoryRecord,
    euler_step,
    kraus_operators,
    kraus_step,
    lindblad_propagate,
    run_trajectory,
)
from .linalg import HermitianSpectrum, dagger, hermitian_eigen, matmul, trace
from .schedule import MeasurementSchedule, coupling_at, strength_to_amplitude
from .spin import (
    SpinModel,
    build_model,
    coherence_from_rho,
    cross_validate_coherence_rates,
    gell_mann_basis,
    preset_state,
    rho_from_coherence,
    spin_expectations,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CollapseTimeStats",
    "DwellStats",
    "EngineConfig",
    "EngineError",
    "HermitianSpectrum",
    "Histogram2D",
    "INCOMPLETE",
    "MeasurementSchedule",
    "NoiseSource",
    "OutcomeSequence",
    "PositivityWarning",
    "SpinModel",
    "TrajectoryRecord",
    "accumulate_density",
    "born_probabilities",
    "build_model",
    "cascade_trace",
    "classify_eigenstate",
    "coherence_from_rho",
    "collapse_times",
    "coupling_at",
    "cross_validate_coherence_rates",
    "dagger",
    "dwell_times",
    "euler_step",
    "gell_mann_basis",
    "hermitian_eigen",
    "kraus_operators",
    "kraus_step",
    "lindblad_propagate",
    "matmul",
    "outcome_sequence",
    "petal_polygons",
    "preset_state",
    "rho_from_coherence",
    "run_trajectory",
    "spin_expectations",
    "strength_to_amplitude",
    "superposition_loci",
    "trace",
]
