"""Weak-coupling (non-degenerate) expressions for mode frequencies and
critical couplings.

With η̃'_d = Pᵀ η̃' P in the eigenbasis of V, first-order perturbation of
λ_k(iy, g) = ω_0k² - y² - 2g² η̃'_dkk(iy) gives

    ω_sk² = ω_0k² - c g² η̃'_dkk(iω_0k),
    g_ck² = (ω_0k² - ω_c²) / (2 η̃'_dkk(iω_c))   for ω_0k > ω_c.

The frequency shift is quoted in the literature both with c = 1 and with the
c = 2 that the eigenvalue expansion implies.  Only c = 2 makes the error
O(g⁴); c = 1 leaves an O(g²) error.  Both are available via ``coefficient``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrum, ModeOutsideGap
from .kernels import KernelEvaluator

DEFAULT_COEFFICIENT = 2.0


@dataclass
class PerturbativeMode:
    k: int
    omega0: float
    frequency: float
    eta_dkk: float
    gap: tuple

    def to_dict(self):
        return {"k": self.k, "omega0": self.omega0, "frequency": self.frequency,
                "eta_dkk": self.eta_dkk, "gap": list(self.gap)}


@dataclass
class PerturbativeReport:
    g: float
    coefficient: float
    modes: list = field(default_factory=list)
    critical: dict = field(default_factory=dict)  # k -> (g_ck, flag)
    degeneracy_ratio: float = 0.0
    valid: bool = True

    def to_dict(self):
        return {
            "g": self.g,
            "coefficient": self.coefficient,
            "degeneracy_ratio": self.degeneracy_ratio,
            "valid": self.valid,
            "modes": [m.to_dict() for m in self.modes],
            "critical": {str(k): {"g": v[0], "flag": v[1]} for k, v in self.critical.items()},
        }


def _diag_eta(model, y, ev=None):
    ev = ev or KernelEvaluator(model)
    p = model.eigenvectors
    return np.diag(p.T @ ev.imag_axis_prime(y) @ p)


def degeneracy_ratio(model, g):
    w = model.effective_frequencies
    if len(w) < 2:
        return 0.0
    d = np.min(np.diff(np.sort(w)))
    return np.inf if d == 0 else g / d


def _gap_of(model, w):
    for lo, hi in model.gaps():
        if lo < w < hi:
            return (lo, hi)
    return None


def perturbative_frequency(model, k, g=None, coefficient=DEFAULT_COEFFICIENT):
    """ω_sk from the weak-coupling expression; ω_0k must lie in a gap."""
    g = model.g if g is None else g
    w0 = float(model.effective_frequencies[k])
    gap = _gap_of(model, w0)
    if gap is None:
        raise ModeOutsideGap(f"ω_0{k} = {w0} lies on a band")
    eta = float(_diag_eta(model, w0)[k]) if model.reservoirs else 0.0
    w2 = w0**2 - coefficient * g**2 * eta
    return PerturbativeMode(k, w0, float(np.sqrt(w2)), eta, gap)


def perturbative_modes(model, g=None, coefficient=DEFAULT_COEFFICIENT, max_ratio=0.1):
    g = model.g if g is None else g
    ratio = degeneracy_ratio(model, g)
    if ratio >= max_ratio:
        raise DegenerateSpectrum(
            f"g / min|ω_0j - ω_0k| = {ratio:.3g} >= {max_ratio}; perturbation theory "
            "assumes a non-degenerate spectrum"
        )
    rep = PerturbativeReport(g, coefficient, degeneracy_ratio=ratio)
    for k, w0 in enumerate(model.effective_frequencies):
        if _gap_of(model, w0) is not None:
            rep.modes.append(perturbative_frequency(model, k, g, coefficient))
        rep.critical[k] = perturbative_critical(model, k)
    return rep


def perturbative_critical(model, k):
    """``(g_ck, flag)`` for the lowest band edge ω_c.

    flag is "below_edge" (θ-function gives zero), "edge_divergence" (the
    kernel is infinite at ω_c; g_ck = 0) or "ok".
    """
    w0 = float(model.effective_frequencies[k])
    wc = model.band_gap_edge
    if not np.isfinite(wc) or w0 <= wc:
        return 0.0, "below_edge"
    eta = _diag_eta(model, wc)[k]
    if not np.isfinite(eta):
        return 0.0, "edge_divergence"
    if eta <= 0:
        return np.inf, "no_crossing"
    return float(np.sqrt((w0**2 - wc**2) / (2.0 * eta))), "ok"
