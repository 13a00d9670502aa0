"""Spontaneous four-wave-mixing photon pairs in birefringent fibre."""

from .budget import EfficiencyChain, RateReport, accidental_rate, chain_efficiency, nfold_rate
from .calibration import calibrate_preset, load_preset
from .dispersion import (
    FF_FF,
    FF_SS,
    SS_FF,
    SS_SS,
    Axis,
    AxisDispersion,
    FiberSpec,
    ProcessConfig,
    apply_temperature,
    beta,
    group_index,
    gvd,
    zero_dispersion_wavelength,
)
from .errors import (
    CalibrationError,
    DomainError,
    FitError,
    FwmError,
    NoZeroDispersionError,
    NumericError,
    PhaseMatchError,
    ResolutionError,
    SpectrumClippedError,
)
from .interference import (
    DipCurve,
    NoiseBudget,
    apply_noise,
    detuned_visibility,
    fit_dip,
    hom_dip,
    hom_visibility,
    reflectance_for_factor,
)
from .jsa import (
    FilterSpec,
    JSAmplitude,
    PumpSpec,
    SpectralGrid,
    apply_filter,
    bandwidth_fwhm,
    build_jsa,
    coherence_time,
    marginal_spectrum,
    phase_matching_function,
    pump_envelope,
)
from .phasematch import (
    PhaseMatchCurve,
    PhaseMatchPoint,
    delta_k,
    find_factorable_point,
    scan_curve,
    solve_signal_idler,
)
from .schmidt import SchmidtResult, SpectralDensityMatrix, heralded_density_matrix, k_vs_length, purity, schmidt_decompose

__version__ = "0.1.0"
