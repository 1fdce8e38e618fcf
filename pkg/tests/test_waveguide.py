import numpy as np
import pytest

from dissipationless.errors import BandCollapse, ModelError
from dissipationless.waveguide import (
    FIG2,
    WaveguideParams,
    band_profile,
    build_waveguide_model,
    gap_label,
    reproduce_fig2a,
    scalar_density,
)


def test_preset_values():
    assert (FIG2.n_cavities, FIG2.omega1, FIG2.kappa, FIG2.kappa0, FIG2.alpha_cc, FIG2.beta) == (
        4, 1.0, 0.2, 0.05, 0.2, 0.2)
    assert FIG2.band == (0.6, 1.4)


def test_model_structure():
    m = build_waveguide_model(FIG2)
    v = m.v_matrix
    np.testing.assert_allclose(np.diag(v), 0.25)
    np.testing.assert_allclose(np.diag(v, 1), 0.2 * 0.25)
    np.testing.assert_array_equal(np.diag(v, 2), 0.0)
    assert len(m.reservoirs) == 4 and m.g == 0.05
    assert m.gaps() == [(0.0, 0.6), (1.4, np.inf)]
    ladder = build_waveguide_model(FIG2.replace(cavity_coupling="ladder"))
    np.testing.assert_allclose(np.diag(ladder.v_matrix, 1), 2 * 0.2 * 0.25)


def test_density_normalization():
    # semicircle centred at ω₁ with half width 2κ and height ω₀κ₀²/(πκ²)·2κ
    p = FIG2
    assert scalar_density(p, 1.0) == pytest.approx(p.kappa0**2 * p.omega0 / (np.pi * p.kappa**2) * 2 * p.kappa)
    assert scalar_density(p, 0.59) == 0.0
    prof = band_profile(p)
    assert prof.integral(prof.lo, prof.hi) == pytest.approx(2 * p.omega0)


def test_invalid_params():
    with pytest.raises(BandCollapse):
        WaveguideParams(omega1=0.3, kappa=0.2)
    with pytest.raises(ModelError):
        WaveguideParams(kappa0=-1)
    with pytest.raises(ModelError):
        WaveguideParams(cavity_coupling="other")


def test_gap_labels():
    m = build_waveguide_model(FIG2)
    assert gap_label((0.0, 0.6), m) == "-"
    assert gap_label((1.4, np.inf), m) == "+"


def test_small_phase_diagram_topology():
    pd = reproduce_fig2a(np.array([0.2, 0.5, 1.0, 1.6]), np.array([0.05, 0.3]), workers=1)
    assert not pd.stable[0, 1]  # upper-left unstable
    assert pd.stable[3, 0]
    assert pd.mode_counts[1, 0].sum() == 4  # ω₀ = 0.5: all four in the lower gap
    assert pd.mode_counts[2, 0].sum() == 0  # ω₀ = 1.0, κ₀ = 0.05: none
