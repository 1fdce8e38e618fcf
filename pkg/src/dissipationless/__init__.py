"""Localized modes and dissipationless dynamics of oscillator networks in
band-gapped bosonic environments."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    CriticalCoupling,
    LocalizedMode,
    StabilityReport,
    critical_coupling,
    eigencurves,
    find_localized_modes,
    phase_diagram,
    stability_scan,
)
from .covariance import evolve_state, longtime_covariance, propagate, thermal_covariance  # noqa: E402
from .greens import green_function, longtime_transition, transient_part  # noqa: E402
from .kernels import KernelEvaluator  # noqa: E402
from .model import (  # noqa: E402
    GaussianState,
    ReservoirSpec,
    SpectralDensity,
    SystemModel,
    build_model,
    effective_frequencies,
)
from .oracle import closed_system_evolve, discretize_bath, volterra_solve  # noqa: E402
from .perturbation import perturbative_critical, perturbative_modes  # noqa: E402
from .profiles import PowerLawBand, Semicircle  # noqa: E402
from .waveguide import FIG2, WaveguideParams, build_waveguide_model  # noqa: E402

__all__ = [
    "CriticalCoupling", "FIG2", "GaussianState", "KernelEvaluator", "LocalizedMode",
    "PowerLawBand", "ReservoirSpec", "Semicircle", "SpectralDensity", "StabilityReport",
    "SystemModel", "WaveguideParams", "build_model", "build_waveguide_model",
    "closed_system_evolve", "critical_coupling", "discretize_bath", "effective_frequencies",
    "eigencurves", "evolve_state", "find_localized_modes", "green_function",
    "longtime_covariance", "longtime_transition", "perturbative_critical",
    "perturbative_modes", "phase_diagram", "propagate", "stability_scan",
    "thermal_covariance", "transient_part", "volterra_solve",
]
