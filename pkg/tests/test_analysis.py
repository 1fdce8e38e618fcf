import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dissipationless.analysis import (
    critical_coupling,
    critical_coupling_bisection,
    eigencurves,
    find_localized_modes,
    growth_rates,
    instability_threshold,
    inverse_green_imag,
    inverse_green_real,
    monotonicity_violations,
    phase_diagram,
    stability_scan,
    track_eigencurves,
)
from dissipationless.errors import UnstableModel
from dissipationless.kernels import KernelEvaluator
from dissipationless.model import build_model
from dissipationless.waveguide import FIG2, WaveguideFamily, build_waveguide_model

from _models import delta_line_model, random_model, two_oscillator_green


def laplace_green(model, s):
    ev = KernelEvaluator(model)
    return np.linalg.inv(s**2 * np.eye(model.n) + model.v_matrix - 2 * model.g**2 * ev.laplace_prime(s))


def test_fig2_lower_gap_modes(fig2_05):
    modes = find_localized_modes(fig2_05)
    freqs = [m.frequency for m in modes]
    np.testing.assert_allclose(freqs, [0.40749, 0.46204, 0.51992, 0.56033], atol=1e-5)
    for m in modes:
        assert m.gap == (0.0, 0.6)
        assert 0.0 < m.gamma < 1.0
        lam = np.linalg.eigvalsh(inverse_green_imag(fig2_05, m.frequency))
        assert np.min(np.abs(lam)) < 1e-10
        np.testing.assert_allclose(m.projector @ m.projector, m.projector, atol=1e-12)


def test_decay_case_has_no_modes(fig2_10):
    assert find_localized_modes(fig2_10) == []


def test_residue_matches_contour_integral(fig2_05):
    """(1/2πi)∮ G̃(s) ds around s = iω_s equals γ Ω/(2iω_s)."""
    modes = find_localized_modes(fig2_05)
    freqs = np.array([m.frequency for m in modes])
    for m in modes:
        others = np.abs(np.delete(freqs, m.index) - m.frequency).min() if len(freqs) > 1 else 1.0
        r = 0.3 * min(others, 0.6 - m.frequency)
        theta = 2 * np.pi * np.arange(64) / 64
        s = 1j * m.frequency + r * np.exp(1j * theta)
        vals = np.array([laplace_green(fig2_05, z) for z in s])
        integral = (vals * (1j * r * np.exp(1j * theta))[:, None, None]).mean(axis=0) * 2 * np.pi
        np.testing.assert_allclose(integral / (2j * np.pi), m.residue, atol=1e-10)


def test_delta_line_modes_match_two_oscillators():
    m = delta_line_model(0.25, 0.1, 1.0, 1e-4)
    _, w, weight = two_oscillator_green(0.25, 0.1, 1.0, np.zeros(1))
    low = find_localized_modes(m)[0]
    assert low.frequency == pytest.approx(w[0], abs=1e-9)
    assert low.gamma == pytest.approx(weight[0], abs=1e-7)


def test_gamma_tends_to_one_at_weak_coupling(fig2_05):
    d1 = np.array([1 - m.gamma for m in find_localized_modes(fig2_05, 1e-3)])
    d2 = np.array([1 - m.gamma for m in find_localized_modes(fig2_05, 2e-3)])
    assert np.all(d1 > 0) and np.all(d1 < 1e-4)
    np.testing.assert_allclose(d2 / d1, 4.0, rtol=1e-2)  # 1 - γ = O(g²)


def test_free_model_modes_are_bare():
    m = build_model(np.array([[1.0, 0.2], [0.2, 2.0]]))
    modes = find_localized_modes(m)
    np.testing.assert_allclose(sorted(x.frequency for x in modes), m.effective_frequencies, rtol=1e-12)
    assert all(x.gamma == pytest.approx(1.0) for x in modes)


def test_eigencurves_monotone_and_consistent(fig2_05):
    curves = eigencurves(fig2_05)
    assert curves.monotone_decreasing().all()
    assert curves.reconstruction_error() < 1e-10
    # roots of the tracked curves are the localized modes
    roots = []
    for k in range(4):
        v = curves.values[:, k]
        i = np.flatnonzero(np.diff(np.sign(v)) != 0)
        roots.extend(curves.y[i])
    np.testing.assert_allclose(sorted(roots), [m.frequency for m in find_localized_modes(fig2_05)],
                               atol=2 * np.diff(curves.y).max())


def test_tracking_through_a_crossing():
    rot = lambda a: np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    q = rot(0.3)
    fn = lambda p: q @ np.diag([p, 1.0 - p]) @ q.T
    params, vals, vecs, worst = track_eigencurves(fn, np.linspace(0, 1, 21), q)
    np.testing.assert_allclose(vals[:, 0], params, atol=1e-12)  # curve 0 keeps its identity
    np.testing.assert_allclose(vals[:, 1], 1.0 - params, atol=1e-12)
    assert worst > 0.99


def test_stability_threshold(fig2_05):
    gu = instability_threshold(fig2_05)
    assert gu == pytest.approx(0.3008, abs=1e-4)
    assert stability_scan(fig2_05, 0.999 * gu).stable
    rep = stability_scan(fig2_05, 1.001 * gu, threshold=True)
    assert not rep.stable and rep.g_unstable == pytest.approx(gu)
    assert abs(np.linalg.eigvalsh(inverse_green_real(fig2_05, 0.0, gu))[0]) < 1e-12
    assert growth_rates(fig2_05, 0.9 * gu).size == 0


def test_growth_rates_are_real_roots(fig2_05):
    g = 1.2 * instability_threshold(fig2_05)
    rates, vecs = growth_rates(fig2_05, g, return_vectors=True)
    assert rates.size >= 1 and np.all(rates > 0)
    for x, u in zip(rates, vecs.T):
        np.testing.assert_allclose(inverse_green_real(fig2_05, x, g) @ u, 0.0, atol=1e-10)
    with pytest.raises(UnstableModel):
        find_localized_modes(fig2_05, g)


def test_critical_coupling_agrees_with_bisection():
    m = build_waveguide_model(FIG2.replace(omega0=0.65))
    above = np.flatnonzero(m.effective_frequencies > 0.6)
    assert above.size >= 2
    for k in above[:2]:
        gc = critical_coupling(m, k, 0)
        assert gc.flag == "root" and gc.edge == 0.6
        gb = critical_coupling_bisection(m, k, 0, tol=1e-12)
        assert gc.g == pytest.approx(gb, abs=1e-9)


def test_in_gap_mode_has_zero_critical_coupling(fig2_05):
    cc = critical_coupling(fig2_05, 0, 0)
    assert cc.g == 0.0 and cc.flag == "in_gap"


def test_monotonicity_fig2(fig2_05, fig2_10):
    assert monotonicity_violations(fig2_05) == []
    assert monotonicity_violations(fig2_10) == []


@given(st.integers(0, 100_000))
def test_monotonicity_random(seed):
    m = random_model(np.random.default_rng(seed))
    assert monotonicity_violations(m, n_points=60) == []


@given(st.integers(0, 100_000))
def test_modes_are_roots_with_valid_residues(seed):
    m = random_model(np.random.default_rng(seed))
    for mode in find_localized_modes(m):
        lo, hi = mode.gap
        assert lo < mode.frequency < hi
        assert 0.0 < mode.gamma <= 1.0 + 1e-12
        u = mode.vector
        np.testing.assert_allclose(inverse_green_imag(m, mode.frequency) @ u, 0.0, atol=1e-8)


def test_phase_diagram_order_independent_of_workers():
    fam = WaveguideFamily(FIG2)
    w0 = np.array([0.3, 0.65, 1.2])
    k0 = np.array([0.0, 0.1, 0.35])
    a = phase_diagram(fam, w0, k0, workers=1)
    b = phase_diagram(fam, w0, k0, workers=2)
    np.testing.assert_array_equal(a.mode_counts, b.mode_counts)
    np.testing.assert_array_equal(a.stable, b.stable)
    assert not a.stable[0, 2]  # low ω₀, strong coupling: unstable
    assert a.stable[2, 0]
