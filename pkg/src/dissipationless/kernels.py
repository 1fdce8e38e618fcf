"""Memory kernels of the reduced dynamics.

* dissipation kernel  η(t)  = ∫ I(ω) sin(ωt) dω
* noise kernel        ν(t)  = Σ_α ∫ I^(α)(ω) coth(ω/2T_α) cos(ωt) dω
* Laplace transform   η̃(s) = ∫ I(ω) ω / (s² + ω²) dω

``η̃(s)`` is written through Cauchy transforms of the band profiles,
``ω/(ω² + s²) = [1/(ω - is) + 1/(ω + is)] / 2``, so closed-form profiles give
closed-form kernels.  On a band the boundary value from ``Re s → 0⁺`` is

    η̃(0⁺ + iy) = PV ∫ I(ω) ω/(ω² - y²) dω  -  i (π/2) I(y),

i.e. the jump across the cut is carried by the imaginary part with a minus
sign.
"""

from __future__ import annotations

import numpy as np

from .errors import EdgeEvaluation, OnBandEvaluation


class KernelEvaluator:
    """Kernel evaluation for one model; read-only after construction.

    All ``*_prime`` methods return the unit-coupling quantity (``η̃'``);
    the plain versions include the factor ``g²``.
    """

    def __init__(self, model, rtol=1e-12, edge_tol=1e-13):
        self.model = model
        self.rtol = rtol
        self.edge_tol = edge_tol
        self._terms = model.profile_terms
        self._n = model.n
        self._bands = model.bands

    # -- time domain -------------------------------------------------------
    def dissipation_kernel(self, t, g=None):
        g = self.model.g if g is None else g
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (self._n, self._n))
        for prof, mat, _ in self._terms:
            out += prof.sine_transform(t.ravel()).reshape(t.shape)[..., None, None] * mat
        return g**2 * out

    def dissipation_kernel_derivative(self, t, g=None):
        """dη/dt = ∫ I(ω) ω cos(ωt) dω, by quadrature on the profiles."""
        g = self.model.g if g is None else g
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape + (self._n, self._n))
        for prof, mat, _ in self._terms:
            vals = prof._transform(t, lambda w, tt: w * np.cos(w * tt))
            out += vals[..., None, None] * mat
        return g**2 * out

    def noise_kernel(self, t, g=None):
        g = self.model.g if g is None else g
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (self._n, self._n))
        for prof, mat, temp in self._terms:
            vals = prof.cosine_transform(np.abs(t.ravel()), temp).reshape(t.shape)
            out += vals[..., None, None] * mat
        return g**2 * out

    # -- Laplace domain ----------------------------------------------------
    def laplace_prime(self, s):
        """η̃'(s) for a scalar complex ``s`` off the branch cuts."""
        s = complex(s)
        if s.real == 0.0:
            return self.imag_axis_prime(s.imag).astype(complex)
        out = np.zeros((self._n, self._n), dtype=complex)
        z = np.array([1j * s, -1j * s])
        for prof, mat, _ in self._terms:
            c = prof.cauchy(z)
            out += 0.5 * (c[0] + c[1]) * mat
        return out

    def laplace(self, s, g=None):
        g = self.model.g if g is None else g
        return g**2 * self.laplace_prime(s)

    def imag_axis_prime(self, y):
        """η̃'(iy) for real y in a spectral gap; real symmetric matrices.

        ``y`` may be an array.  Band edges are allowed (edge limit); the
        result is infinite where the density diverges at that edge.
        """
        y = np.asarray(y, dtype=float)
        flat = np.abs(y.ravel())
        self._refuse_on_band(flat)
        out = np.zeros(flat.shape + (self._n, self._n))
        for prof, mat, _ in self._terms:
            lo = prof.cauchy(-flat).real
            hi = prof.cauchy(flat).real
            val = (0.5 * (lo + hi))[:, None, None]
            with np.errstate(invalid="ignore"):
                out += np.where(mat != 0, val * mat, 0.0)
        return out.reshape(y.shape + (self._n, self._n))

    def real_axis_prime(self, x):
        """η̃'(x) for real x ≥ 0 (x = 0 gives ∫ I'(ω)/ω dω)."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.zeros(flat.shape + (self._n, self._n))
        for prof, mat, _ in self._terms:
            c = prof.cauchy(1j * flat)
            out += c.real[:, None, None] * mat
        return out.reshape(x.shape + (self._n, self._n))

    def imag_axis_derivative_prime(self, y):
        """d/dy η̃'(iy) = ½ ∫ f [1/(ω-y)² - 1/(ω+y)²] per term, in closed form.

        Exactly on a band edge the point is moved 1e-13 into the gap, so the
        result stays finite where the one-sided limit diverges.
        """
        y = abs(float(y))
        if self._distance_to_band(y) == 0.0:
            d = 1e-13 * max(y, 1.0)
            y = y - d if self._distance_to_band(y - d) > 0 else y + d
        self._refuse_on_band(np.array([y]))
        out = np.zeros((self._n, self._n))
        for prof, mat, _ in self._terms:
            val = 0.5 * (prof.cauchy_derivative(y)[0] - prof.cauchy_derivative(-y)[0])
            with np.errstate(invalid="ignore"):
                out += np.where(mat != 0, val * mat, 0.0)
        return out

    def boundary_values_prime(self, y):
        """η̃'(0⁺ + iy) for y strictly inside a band (array allowed)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        self._require_inside(y)
        out = np.zeros(y.shape + (self._n, self._n), dtype=complex)
        for prof, mat, _ in self._terms:
            left = prof.cauchy(-y).real
            right = np.empty(y.shape)
            jump = np.zeros(y.shape)
            inside = (y > prof.lo) & (y < prof.hi)
            if np.any(inside):
                right[inside] = prof.pv(y[inside])
                jump[inside] = prof(y[inside])
            outside = ~inside
            if np.any(outside):
                right[outside] = prof.cauchy(y[outside]).real
            val = 0.5 * (left + right) - 0.5j * np.pi * jump
            out += val[:, None, None] * mat
        return out

    # -- helpers -----------------------------------------------------------
    def _distance_to_band(self, y):
        d = np.inf
        for lo, hi in self._bands:
            if lo <= y <= hi:
                return 0.0
            d = min(d, abs(y - lo), abs(y - hi))
        return d

    def _require_inside(self, y):
        inside = np.zeros(y.shape, dtype=bool)
        for lo, hi in self._bands:
            tol = self.edge_tol * max(1.0, hi)
            here = (y > lo) & (y < hi)
            near = here & ((y - lo <= tol) | (hi - y <= tol))
            if np.any(near):
                raise EdgeEvaluation(f"y={y[near][0]} is within {tol:g} of a band edge")
            inside |= here
        if not np.all(inside):
            raise OnBandEvaluation(
                f"y={y[~inside][0]} is not inside a band; use dissipation_laplace on the gap"
            )

    def _refuse_on_band(self, y):
        for lo, hi in self._bands:
            bad = (y > lo) & (y < hi)
            if np.any(bad):
                raise OnBandEvaluation(
                    f"imaginary-axis point y={y[bad][0]} lies on the band [{lo}, {hi}]; "
                    "use boundary_values"
                )


def dissipation_kernel(evaluator, t):
    return evaluator.dissipation_kernel(t)


def noise_kernel(evaluator, t):
    return evaluator.noise_kernel(t)


def dissipation_laplace(evaluator, s):
    """Return ``(η̃(s), η̃'(s))``."""
    prime = evaluator.laplace_prime(s)
    return evaluator.model.g**2 * prime, prime


def boundary_values(evaluator, y):
    return evaluator.model.g**2 * evaluator.boundary_values_prime(y)
