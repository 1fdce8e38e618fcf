import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dissipationless.errors import (
    DimensionMismatch,
    ModelError,
    NegativeCoupling,
    NotPositiveDefinite,
    NotSymmetric,
)
from dissipationless.model import (
    GaussianState,
    ReservoirSpec,
    SpectralDensity,
    SystemModel,
    build_model,
    effective_frequencies,
    symplectic_form,
)
from dissipationless.profiles import PowerLawBand, Semicircle


def two_band_model(g=0.1):
    d1 = SpectralDensity.single(Semicircle(1.0, 0.3), np.eye(2))
    d2 = SpectralDensity(((PowerLawBand(1.2, 2.0, (1.0, 0.5)), np.diag([1.0, 0.0])),))
    return SystemModel(np.diag([0.25, 0.36]), (ReservoirSpec(d1), ReservoirSpec(d2, 0.2)), g)


def test_validation_errors():
    with pytest.raises(NotSymmetric):
        SystemModel(np.array([[1.0, 0.2], [0.0, 1.0]]))
    with pytest.raises(NotPositiveDefinite):
        SystemModel(np.diag([1.0, -0.1]))
    with pytest.raises(NegativeCoupling):
        SystemModel(np.eye(1), (), -0.1)
    dens = SpectralDensity.single(Semicircle(1.0, 0.3), np.eye(3))
    with pytest.raises(DimensionMismatch):
        SystemModel(np.eye(2), (ReservoirSpec(dens),))
    with pytest.raises(ModelError):
        SpectralDensity.single(Semicircle(1.0, 0.3), np.diag([1.0, -1.0]))
    with pytest.raises(ModelError):
        SpectralDensity(())


def test_bands_gaps_and_edges():
    m = two_band_model()
    assert m.bands == [(0.7, 2.0)]  # overlapping bands merge
    assert m.band_gap_edge == 0.7
    assert m.gaps() == [(0.0, 0.7), (2.0, np.inf)]
    ex = m.edge_exponents()
    assert ex[0.7] == 0.5 and ex[2.0] == 0.5 and ex[1.2] == 1.0


def test_free_model_has_one_infinite_gap():
    m = build_model(np.diag([1.0, 4.0]))
    assert m.gaps() == [(0.0, np.inf)]
    np.testing.assert_allclose(effective_frequencies(m), [1.0, 2.0])


def test_spectral_density_scales_with_g():
    m = two_band_model(0.3)
    w = np.array([1.0, 1.5])
    np.testing.assert_allclose(m.spectral_density(w), 0.09 * m.spectral_density(w, scaled=False))


def test_serialization_round_trip():
    m = two_band_model(0.2)
    back = SystemModel.from_json(m.to_json())
    np.testing.assert_array_equal(back.v_matrix, m.v_matrix)
    assert back.g == m.g
    w = np.linspace(0.5, 2.2, 9)
    np.testing.assert_array_equal(back.spectral_density(w), m.spectral_density(w))


def test_models_are_immutable():
    m = two_band_model()
    with pytest.raises(ValueError):
        m.v_matrix[0, 0] = 3.0


def test_symplectic_form():
    j = symplectic_form(2)
    np.testing.assert_array_equal(j @ j, -np.eye(4))
    np.testing.assert_array_equal(j.T, -j)


@given(st.lists(st.floats(0.05, 5.0), min_size=1, max_size=4), st.floats(0.0, 2.0))
def test_standard_states_are_physical(freqs, r):
    w = np.array(freqs)
    vac = GaussianState.vacuum(w)
    assert vac.is_physical()
    assert vac.purity() == pytest.approx(1.0)
    assert min(vac.uncertainty_eigenvalues()) == pytest.approx(0.0, abs=1e-12)
    assert GaussianState.squeezed([r] * len(w), w).purity() == pytest.approx(1.0)
    assert GaussianState.thermal(w, 0.5).is_physical()
    assert GaussianState.thermal(w, 0.5).purity() < 1.0


def test_coherent_state_mean():
    w = np.array([0.5, 2.0])
    s = GaussianState.coherent([1.0 + 0.5j, 0.0], w)
    np.testing.assert_allclose(s.mean, [np.sqrt(2 / 0.5), 0.0, np.sqrt(2 * 0.5) * 0.5, 0.0])


def test_unphysical_covariance_detected():
    s = GaussianState(np.zeros(2), np.diag([0.1, 0.1]))
    assert not s.is_physical()
