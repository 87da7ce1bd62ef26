"""Windowed homodyne readout of a squeezed-light Mach-Zehnder interferometer."""

from .gaussian import (
    MEASURED_MODE,
    VACUUM_VARIANCE,
    GaussianState,
    SqueezedSource,
    SymplecticTransform,
    apply,
    interferometer_output,
    make_coherent,
    make_squeezed_vacuum,
    marginal_p,
    mzi_matrix,
    mzi_transform,
    partial_trace,
    symplectic_eigenvalues,
    tensor,
)
from .intensity import (
    caves_sensitivity,
    calibrate_noise_width,
    degradation_table,
    intensity_stats,
)
from .metrology import (
    RAYLEIGH,
    FlatResponseError,
    PhotonBudget,
    ScalingFit,
    best_sensitivity,
    fwhm,
    optimize_bin,
    photon_budget,
    resolution_improvement,
    scaling_fit,
    shot_noise_limit,
    ultimate_sensitivity,
)
from .montecarlo import (
    ExperimentPlan,
    SampleBatch,
    estimate_pi,
    null_phase,
    sample_homodyne,
    simulate_experiment,
)
from .noise import DetectorNoise, LossChannel, apply_detector_noise, apply_loss
from .response import (
    BinningOperator,
    InterferometerScenario,
    ResponseCurve,
    bin_probability,
    c1,
    delta_pi,
    expected_pi,
    expected_pi_ideal,
    operator_moments,
    response_curve,
    sensitivity,
    sensitivity_unwindowed,
)
from .tomography import (
    PiezoSweepModel,
    PumpPowerModel,
    db_levels,
    efficiency_from_levels,
    fit_pump_curve,
    fit_tomography,
    pump_variance,
    source_from_db,
    variance_model,
)

__version__ = "0.1.0"
