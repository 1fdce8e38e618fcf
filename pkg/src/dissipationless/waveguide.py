"""Cavity array coupled to tight-binding waveguides.

Each cavity (frequency ω₀) couples with strength κ₀ sin(k x₀) to the modes
ω_k = ω₁ - 2κ cos(k x₀) of its own waveguide, and with relative strength β to
the two neighbouring waveguides.  Neighbouring cavities couple with relative
strength α_cc.  Counter-rotating terms are kept, so with
``x = (a + a†)/√(2ω)`` the coupling ``g_k (a + a†)(b_k + b_k†)`` becomes
``2 g_k √(ω₀ ω_k) x q_k``.

With the mode measure Σ_k → (2/π)∫₀^π dθ (θ = k x₀) the single-waveguide
density is the semicircle

    f(ω) = κ₀² ω₀ √(4κ² - (ω - ω₁)²) / (π κ²),   ∫ f dω = 2 κ₀² ω₀.

For the cavity-cavity term ``α_cc ω₀ (a_n + a_n†)(a_m + a_m†)`` the mapping
gives an off-diagonal entry ``2 α_cc ω₀²`` in V.  The Fig. 2 phenomenology
(localized modes at ω₀ = 0.5, none at ω₀ = 1) is reproduced with
``α_cc ω₀²`` instead, i.e. with α_cc read as the relative coupling of the
position quadratures; that convention is the default here and the literal
mapping is available through ``cavity_coupling="ladder"``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import BandCollapse, ModelError
from .model import ReservoirSpec, SpectralDensity, SystemModel
from .profiles import Semicircle


@dataclass(frozen=True)
class WaveguideParams:
    n_cavities: int = 4
    omega0: float = 0.5
    omega1: float = 1.0
    kappa: float = 0.2
    kappa0: float = 0.05
    alpha_cc: float = 0.2
    beta: float = 0.2
    x0: float = 1.0  # defect spacing; absorbed in the mode measure
    temperature: float = 0.0
    cavity_coupling: str = "quadrature"  # or "ladder" (factor 2 on V off-diagonals)

    def __post_init__(self):
        if int(self.n_cavities) != self.n_cavities or self.n_cavities < 1:
            raise ModelError("n_cavities must be a positive integer")
        if not self.kappa > 0:
            raise ModelError("kappa must be positive")
        if not self.omega0 > 0:
            raise ModelError("omega0 must be positive")
        if self.omega1 <= 2 * self.kappa:
            raise BandCollapse(
                f"band [ω₁-2κ, ω₁+2κ] = [{self.omega1 - 2 * self.kappa}, "
                f"{self.omega1 + 2 * self.kappa}] reaches zero frequency"
            )
        if self.kappa0 < 0:
            raise ModelError("kappa0 must be nonnegative")
        if self.temperature < 0:
            raise ModelError("temperature must be nonnegative")
        if self.cavity_coupling not in ("quadrature", "ladder"):
            raise ModelError("cavity_coupling must be 'quadrature' or 'ladder'")

    @property
    def band(self):
        return (self.omega1 - 2 * self.kappa, self.omega1 + 2 * self.kappa)

    def replace(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)


FIG2 = WaveguideParams()


def chain_matrix(n, diag, off):
    return diag * np.eye(n) + off * (np.eye(n, k=1) + np.eye(n, k=-1))


def coupling_vectors(params):
    """Columns b_m: how waveguide m couples to the cavities (B = 1 + β·adj)."""
    return chain_matrix(params.n_cavities, 1.0, params.beta)


def band_profile(params):
    """Unit-coupling semicircle f(ω)/κ₀² of one waveguide."""
    scale = params.omega0 / (np.pi * params.kappa**2)
    return Semicircle(params.omega1, 2 * params.kappa, scale)


def scalar_density(params, omega):
    """f(ω) including κ₀²."""
    return params.kappa0**2 * band_profile(params)(np.asarray(omega, dtype=float))


def build_waveguide_model(params=FIG2):
    n = params.n_cavities
    w2 = params.omega0**2
    factor = 2.0 if params.cavity_coupling == "ladder" else 1.0
    v = chain_matrix(n, w2, factor * params.alpha_cc * w2)
    b = coupling_vectors(params)
    if np.linalg.eigvalsh(b @ b.T)[0] < -1e-12:
        raise ModelError("B Bᵀ is not positive semidefinite")
    prof = band_profile(params)
    reservoirs = tuple(
        ReservoirSpec(SpectralDensity(((prof, np.outer(b[:, m], b[:, m])),)), params.temperature)
        for m in range(n)
    )
    return SystemModel(v, reservoirs, params.kappa0)


def discrete_modes(params, n_modes):
    """Midpoint sampling of one waveguide in θ = k x₀: (ω_k, C_k).

    ``C_k`` is the unit-coupling (κ₀ = 1) coefficient of x q_k including the
    measure weight, so Σ_k C_k² δ(ω - ω_k)/(2ω_k) approximates f(ω)/κ₀².
    """
    theta = (np.arange(n_modes) + 0.5) * np.pi / n_modes
    omega = params.omega1 - 2 * params.kappa * np.cos(theta)
    weight = 2.0 / n_modes  # (2/π) dθ with dθ = π/n
    c = 2.0 * np.sin(theta) * np.sqrt(params.omega0 * omega) * np.sqrt(weight)
    return omega, c


class WaveguideFamily:
    """Picklable ω₀ → model factory for phase diagrams."""

    def __init__(self, params=FIG2):
        self.params = params

    def __call__(self, omega0):
        return build_waveguide_model(self.params.replace(omega0=float(omega0)))


def reproduce_fig2a(omega0_values, kappa0_values, params=FIG2, workers=None):
    """Fig. 2(a)-style phase diagram over (ω₀, κ₀) for the cavity array."""
    from .analysis import phase_diagram

    return phase_diagram(WaveguideFamily(params), omega0_values, kappa0_values, workers)


def gap_label(gap, model):
    """'-' for the gap below the band, '+' for the one above."""
    return "-" if gap[1] <= model.band_gap_edge else "+"
