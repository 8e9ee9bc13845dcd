"""Simulation and tomography toolkit for single-photon polarization-path states."""

from .experiment import (
    DETECTORS,
    CountData,
    ExperimentConfig,
    PlateSetting,
    Run,
    detector_probabilities,
    exact_counts,
    measurement_operators,
    realized_angle,
    simulate,
)
from .optics import (
    OpticalUnitary,
    beam_splitter,
    evolve,
    hwp,
    interferometer,
    phase_shifter,
    plate_on_path,
    qwp,
)
from .qstate import (
    BASIS_LABELS,
    DensityMatrix,
    PolarizationState,
    ValidityReport,
    bell_pbs_state,
    eigh4,
    ensure_physical,
    fidelity,
    maximally_mixed,
    pure_state,
    purity,
    random_density,
    trace_distance,
    validate_density,
)
from .stokes import (
    OnePathStokes,
    StokesSet,
    TwoPathStokes,
    complementarity_defect,
    extract_tpsp,
    opsp,
    predicted_fringe,
    reconstruct,
    stokes_set,
    tpsp,
)
from .tomography import (
    MleParams,
    ReconstructionResult,
    StokesErrors,
    StokesEstimate,
    cholesky_repair,
    estimate_stokes,
    linear_inversion,
    mle_cost,
    mle_fit,
    report,
    rho_from_params,
)

__version__ = "0.1.0"
