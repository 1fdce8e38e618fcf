import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dissipationless.errors import EdgeEvaluation, OnBandEvaluation
from dissipationless.kernels import (
    KernelEvaluator,
    boundary_values,
    dissipation_laplace,
)

from _models import random_model


def scalar_density(model, w):
    return model.spectral_density(np.array([w]), scaled=False)[0]


def riemann(model, fn, n=200001):
    """Midpoint Riemann sum of ∫ I'(ω) fn(ω) dω over every band."""
    out = 0.0
    for lo, hi in model.bands:
        w = lo + (np.arange(n) + 0.5) * (hi - lo) / n
        dens = model.spectral_density(w, scaled=False)
        out = out + (dens * fn(w)[:, None, None]).sum(axis=0) * (hi - lo) / n
    return out


def test_kernels_match_riemann_sums(fig2_05):
    ev = KernelEvaluator(fig2_05)
    g2 = fig2_05.g**2
    for t in (0.7, 13.0):
        np.testing.assert_allclose(ev.dissipation_kernel(np.array([t]))[0],
                                   g2 * riemann(fig2_05, lambda w: np.sin(w * t)), atol=1e-9)
        np.testing.assert_allclose(ev.noise_kernel(np.array([t]))[0],
                                   g2 * riemann(fig2_05, lambda w: np.cos(w * t)), atol=1e-9)
    np.testing.assert_allclose(ev.real_axis_prime(0.0),
                               riemann(fig2_05, lambda w: 1.0 / w), rtol=1e-8)


def test_laplace_matches_quadrature(fig2_05):
    ev = KernelEvaluator(fig2_05)
    s = 0.3 + 0.45j
    ref = riemann(fig2_05, lambda w: w / (s**2 + w**2))
    np.testing.assert_allclose(ev.laplace_prime(s), ref, rtol=1e-8)
    full, prime = dissipation_laplace(ev, s)
    np.testing.assert_allclose(full, fig2_05.g**2 * prime)


def test_laplace_is_transform_of_time_kernel(fig2_05):
    ev = KernelEvaluator(fig2_05)
    s = 0.4
    ref = integrate.quad_vec(lambda t: np.exp(-s * t) * ev.dissipation_kernel(np.array([t]))[0],
                             0, 150, epsabs=1e-12, limit=2000)[0]
    np.testing.assert_allclose(ev.laplace(s), ref, atol=1e-9)


def test_imaginary_axis_in_gap_is_real_and_consistent(fig2_05):
    ev = KernelEvaluator(fig2_05)
    y = 0.45
    np.testing.assert_allclose(ev.imag_axis_prime(y), riemann(fig2_05, lambda w: w / (w**2 - y**2)),
                               rtol=1e-8)
    np.testing.assert_allclose(ev.laplace_prime(1e-300 + 1j * y).real, ev.imag_axis_prime(y), rtol=1e-12)


def test_on_band_and_edge_handling(fig2_05):
    ev = KernelEvaluator(fig2_05)
    with pytest.raises(OnBandEvaluation):
        ev.imag_axis_prime(1.0)
    with pytest.raises(OnBandEvaluation):
        ev.boundary_values_prime(0.3)
    with pytest.raises(EdgeEvaluation):
        ev.boundary_values_prime(0.6 + 1e-15)
    assert np.all(np.isfinite(ev.imag_axis_prime(0.6)))  # √ edge: finite limit


def test_boundary_value_is_limit_from_right_half_plane(fig2_05):
    ev = KernelEvaluator(fig2_05)
    y = 1.13
    bv = ev.boundary_values_prime(y)[0]
    near = ev.laplace_prime(1e-6 + 1j * y)
    np.testing.assert_allclose(bv, near, atol=2e-5)
    # jump carried by -(π/2) I(y)
    np.testing.assert_allclose(bv.imag, -0.5 * np.pi * scalar_density(fig2_05, y), atol=1e-12)
    np.testing.assert_allclose(boundary_values(ev, y)[0], fig2_05.g**2 * bv)


def test_kernel_derivative(fig2_05):
    ev = KernelEvaluator(fig2_05)
    t, h = 3.3, 1e-5
    fd = (ev.dissipation_kernel(np.array([t + h])) - ev.dissipation_kernel(np.array([t - h]))) / (2 * h)
    np.testing.assert_allclose(ev.dissipation_kernel_derivative(t), fd, atol=1e-8)


def test_imag_axis_derivative(fig2_05):
    ev = KernelEvaluator(fig2_05)
    y, h = 0.4, 1e-4
    fd = (ev.imag_axis_prime(y + h) - ev.imag_axis_prime(y - h)) / (2 * h)
    np.testing.assert_allclose(ev.imag_axis_derivative_prime(y), fd, rtol=1e-6)


@given(st.integers(0, 10_000))
def test_kernel_properties_random_models(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    ev = KernelEvaluator(m)
    t = rng.uniform(0, 30, size=4)
    eta = ev.dissipation_kernel(t)
    nu = ev.noise_kernel(t)
    assert np.allclose(eta, np.swapaxes(eta, 1, 2))
    np.testing.assert_allclose(ev.noise_kernel(-t), nu)  # even
    np.testing.assert_allclose(ev.dissipation_kernel(np.zeros(1)), 0.0, atol=1e-14)
    # η̃'(0) and η̃'(iy) below every band are PSD and increasing in y there
    wc = m.band_gap_edge
    e0, e1 = ev.imag_axis_prime(0.0), ev.imag_axis_prime(0.5 * wc)
    assert np.linalg.eigvalsh(e0).min() >= -1e-12
    assert np.linalg.eigvalsh(e1 - e0).min() >= -1e-12
    # noise kernel is a positive-definite function: Toeplitz blocks PSD
    grid = np.linspace(0, 6, 8)
    lags = grid[:, None] - grid[None, :]
    big = ev.noise_kernel(lags).transpose(0, 2, 1, 3).reshape(8 * m.n, 8 * m.n)
    assert np.linalg.eigvalsh(big).min() >= -1e-10 * max(1.0, np.abs(big).max())
