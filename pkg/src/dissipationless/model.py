"""System and environment description: oscillators, reservoirs, Gaussian states.

Conventions: ħ = k_B = 1, unit masses, phase-space ordering
``(x_1 .. x_N, p_1 .. p_N)`` and symmetrized covariances, so a vacuum
oscillator of frequency ω has ``<Δx²> = 1/(2ω)`` and ``<Δp²> = ω/2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    ModelError,
    NegativeCoupling,
    NotPositiveDefinite,
    NotSymmetric,
)
from .profiles import BandProfile, profile_from_dict

_SYM_RTOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_symmetric(m, name):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    scale = max(np.max(np.abs(m)), 1e-300)
    if np.max(np.abs(m - m.T)) > _SYM_RTOL * scale:
        raise NotSymmetric(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def merge_intervals(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Matrix density ``I(ω) = Σ_j f_j(ω) M_j`` with PSD coefficient matrices.

    Each ``f_j`` is a :class:`~dissipationless.profiles.BandProfile`; its band
    and edge exponents are declared by the profile itself.
    """

    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ModelError("a spectral density needs at least one term")
        clean = []
        n = None
        for prof, mat in self.terms:
            if not isinstance(prof, BandProfile):
                raise ModelError(f"term profile must be a BandProfile, got {type(prof).__name__}")
            mat = _check_symmetric(mat, "spectral coefficient matrix")
            if n is None:
                n = mat.shape[0]
            elif mat.shape[0] != n:
                raise DimensionMismatch("all spectral terms must share the oscillator count")
            if np.min(np.linalg.eigvalsh(mat)) < -1e-12 * max(np.max(np.abs(mat)), 1e-300):
                raise ModelError("spectral coefficient matrix is not positive semidefinite")
            if prof.lo <= 0.0:
                raise ModelError("band endpoints must be positive")
            clean.append((prof, _frozen(mat)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def single(cls, profile, matrix):
        return cls(((profile, matrix),))

    @property
    def n(self):
        return self.terms[0][1].shape[0]

    @property
    def bands(self):
        return merge_intervals([(p.lo, p.hi) for p, _ in self.terms])

    def edge_exponents(self):
        """Exponent at every band edge: the smallest one declared there."""
        out = {}
        for prof, _ in self.terms:
            for edge, ex in zip((prof.lo, prof.hi), prof.exponents):
                out[edge] = min(out.get(edge, np.inf), ex)
        return out

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.zeros(omega.shape + (self.n, self.n))
        for prof, mat in self.terms:
            out += prof(omega)[..., None, None] * mat
        return out

    def scaled(self, factor):
        return SpectralDensity(tuple((p, factor * m) for p, m in self.terms))

    def to_dict(self):
        return {"terms": [{"profile": p.to_dict(), "matrix": m.tolist()} for p, m in self.terms]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple((profile_from_dict(t["profile"]), np.array(t["matrix"], dtype=float))
                         for t in data["terms"]))


@dataclass(frozen=True, eq=False)
class ReservoirSpec:
    spectral_density: SpectralDensity
    temperature: float = 0.0

    def __post_init__(self):
        if not self.temperature >= 0.0:
            raise ModelError("reservoir temperature must be nonnegative")
        object.__setattr__(self, "temperature", float(self.temperature))

    def to_dict(self):
        return {"temperature": self.temperature,
                "spectral_density": self.spectral_density.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(SpectralDensity.from_dict(data["spectral_density"]),
                   float(data.get("temperature", 0.0)))


@dataclass(frozen=True, eq=False)
class SystemModel:
    """N oscillators with coupling matrix V, reservoirs and global coupling g.

    The reservoir densities are the unit-coupling densities ``I'(ω)``; the
    physical density is ``g² I'(ω)``.
    """

    v_matrix: np.ndarray
    reservoirs: tuple = ()
    global_coupling: float = 0.0
    effective_frequencies: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = _check_symmetric(self.v_matrix, "v_matrix")
        n = v.shape[0]
        if n < 1:
            raise DimensionMismatch("at least one oscillator is required")
        evals, evecs = np.linalg.eigh(v)
        if evals[0] <= 0.0:
            raise NotPositiveDefinite(f"V has eigenvalue {evals[0]:.6g} <= 0")
        reservoirs = tuple(self.reservoirs)
        for r in reservoirs:
            if not isinstance(r, ReservoirSpec):
                raise ModelError("reservoirs must be ReservoirSpec instances")
            if r.spectral_density.n != n:
                raise DimensionMismatch(
                    f"reservoir density is {r.spectral_density.n}x{r.spectral_density.n}, V is {n}x{n}"
                )
        g = float(self.global_coupling)
        if not g >= 0.0:
            raise NegativeCoupling(f"global coupling must be nonnegative, got {g}")
        # deterministic eigenvector signs: first nonzero component positive
        for k in range(n):
            col = evecs[:, k]
            nz = np.flatnonzero(np.abs(col) > 1e-12)
            if nz.size and col[nz[0]] < 0:
                evecs[:, k] = -col
        object.__setattr__(self, "v_matrix", _frozen(v))
        object.__setattr__(self, "reservoirs", reservoirs)
        object.__setattr__(self, "global_coupling", g)
        object.__setattr__(self, "effective_frequencies", _frozen(np.sqrt(evals)))
        object.__setattr__(self, "eigenvectors", _frozen(evecs))

    @property
    def n(self):
        return self.v_matrix.shape[0]

    @property
    def g(self):
        return self.global_coupling

    def with_coupling(self, g):
        return SystemModel(self.v_matrix, self.reservoirs, g)

    @property
    def profile_terms(self):
        """Flat list of ``(profile, matrix, temperature)`` over all reservoirs."""
        return [(p, m, r.temperature) for r in self.reservoirs for p, m in r.spectral_density.terms]

    @property
    def bands(self):
        return merge_intervals([(p.lo, p.hi) for p, _, _ in self.profile_terms])

    @property
    def band_gap_edge(self):
        """ω_c: lower edge of the lowest band (inf without reservoirs)."""
        bands = self.bands
        return bands[0][0] if bands else np.inf

    def gaps(self):
        """Spectral gaps as ``(lo, hi)`` intervals; the last one is unbounded."""
        edges = [0.0]
        for lo, hi in self.bands:
            edges.extend([lo, hi])
        edges.append(np.inf)
        return [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]

    def edge_exponents(self):
        out = {}
        for prof, _, _ in self.profile_terms:
            for edge, ex in zip((prof.lo, prof.hi), prof.exponents):
                out[edge] = min(out.get(edge, np.inf), ex)
        return out

    def spectral_density(self, omega, scaled=True):
        """Total density ``I(ω)`` (``g²`` included unless ``scaled`` is False)."""
        omega = np.asarray(omega, dtype=float)
        out = np.zeros(omega.shape + (self.n, self.n))
        for prof, mat, _ in self.profile_terms:
            out += prof(omega)[..., None, None] * mat
        return out * (self.g**2 if scaled else 1.0)

    def to_dict(self):
        return {
            "v_matrix": self.v_matrix.tolist(),
            "global_coupling": self.global_coupling,
            "reservoirs": [r.to_dict() for r in self.reservoirs],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.array(data["v_matrix"], dtype=float),
                   tuple(ReservoirSpec.from_dict(r) for r in data.get("reservoirs", [])),
                   float(data.get("global_coupling", 0.0)))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_model(v_matrix, reservoirs=(), g=0.0):
    """Validated constructor; see :class:`SystemModel` for the checks."""
    v = np.asarray(v_matrix, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1, 1)
    return SystemModel(v, tuple(reservoirs), g)


def effective_frequencies(model):
    """Square roots of the eigenvalues of V, ascending."""
    return np.array(model.effective_frequencies)


# -- Gaussian states -------------------------------------------------------

def symplectic_form(n):
    """J for the ordering (x_1..x_N, p_1..p_N): [[0, I], [-I, 0]]."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        if mean.size % 2 or cov.shape != (mean.size, mean.size):
            raise DimensionMismatch("mean must have 2N entries and covariance be 2N x 2N")
        cov = _check_symmetric(cov, "covariance")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "covariance", _frozen(cov))

    @property
    def n(self):
        return self.mean.size // 2

    def uncertainty_eigenvalues(self):
        """Eigenvalues of ``σ + (i/2) J``; all nonnegative for a physical state."""
        return np.linalg.eigvalsh(self.covariance + 0.5j * symplectic_form(self.n))

    def is_physical(self, tol=1e-10):
        return bool(np.min(self.uncertainty_eigenvalues()) >= -tol)

    def purity(self):
        return float(1.0 / (2.0**self.n * np.sqrt(np.linalg.det(self.covariance))))

    @classmethod
    def vacuum(cls, frequencies):
        w = np.asarray(frequencies, dtype=float)
        return cls(np.zeros(2 * w.size), np.diag(np.concatenate([0.5 / w, 0.5 * w])))

    @classmethod
    def thermal(cls, frequencies, temperature):
        w = np.asarray(frequencies, dtype=float)
        c = 1.0 / np.tanh(w / (2.0 * temperature)) if temperature > 0 else np.ones_like(w)
        return cls(np.zeros(2 * w.size), np.diag(np.concatenate([0.5 * c / w, 0.5 * c * w])))

    @classmethod
    def coherent(cls, amplitudes: Sequence[complex], frequencies):
        """Product of coherent states |α_n> of oscillators with frequencies ω_n."""
        a = np.asarray(amplitudes, dtype=complex)
        w = np.asarray(frequencies, dtype=float)
        x = np.sqrt(2.0 / w) * a.real
        p = np.sqrt(2.0 * w) * a.imag
        vac = cls.vacuum(w)
        return cls(np.concatenate([x, p]), vac.covariance)

    @classmethod
    def squeezed(cls, squeezing: Sequence[float], frequencies):
        """Vacuum squeezed along x by ``exp(-2r)`` per mode."""
        r = np.asarray(squeezing, dtype=float)
        w = np.asarray(frequencies, dtype=float)
        return cls(np.zeros(2 * w.size),
                   np.diag(np.concatenate([0.5 * np.exp(-2 * r) / w, 0.5 * np.exp(2 * r) * w])))
