import numpy as np
import pytest

from dissipationless.config import DEFAULTS, RunConfig, apply_override, preset, preset_toml
from dissipationless.errors import ConfigError
from dissipationless.waveguide import FIG2


def test_defaults_are_valid():
    cfg = RunConfig.from_text("", preset_name="fig2")
    assert cfg.command == "modes"
    assert cfg.model_kind == "waveguide"
    assert cfg.waveguide_params() == FIG2.replace(x0=FIG2.x0)
    assert cfg.time_grid().size == DEFAULTS["time"]["num"]


def test_preset_toml_round_trips():
    cfg = RunConfig.from_text(preset_toml("fig2"))
    assert cfg.data == RunConfig.from_text("", preset_name="fig2").data
    assert RunConfig.from_text(cfg.to_toml()).data == cfg.data


def test_overrides_and_inline_preset():
    cfg = RunConfig.from_text('[model]\npreset = "fig2"\nomega0 = 1.0\n',
                              overrides=["model.kappa0=0.1", 'time.kind="log"', "time.start=1.0"])
    p = cfg.waveguide_params()
    assert p.omega0 == 1.0 and p.kappa0 == 0.1
    assert cfg.time_grid()[0] == 1.0 and cfg.time_grid()[-1] == pytest.approx(100.0)


def test_apply_override_creates_tables_and_parses_values():
    d = {}
    apply_override(d, "a.b.c=[1, 2.5]")
    apply_override(d, "a.s=word")
    assert d == {"a": {"b": {"c": [1, 2.5]}, "s": "word"}}
    with pytest.raises(ConfigError):
        apply_override(d, "no_equals_sign")


def test_type_error_reports_line_and_field():
    text = '[model]\npreset = "fig2"\nomega0 = "fast"\n'
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_text(text)
    assert exc.value.field == "model.omega0"
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_text('command = "modes"\n[time\nstop = 3\n')
    assert exc.value.line == 2


@pytest.mark.parametrize("text, overrides, field", [
    ('bogus = 1\n', [], "bogus"),
    ('command = "plot"\n', [], "command"),
    ('[time]\nkind = "random"\n', [], "time.kind"),
    ('[time]\nkind = "log"\nstart = 0.0\n', [], "time.start"),
    ('[time]\nstart = 5.0\nstop = 1.0\n', [], "time"),
    ('', ["oracle.dt=-1.0"], "oracle"),
    ('[sweep.omega0]\nnum = 0\n', [], "sweep.omega0.num"),
    ('[model]\nkind = "other"\n', [], "model.kind"),
    ('', ["model.n_cavities=2.5"], "model.n_cavities"),
])
def test_invalid_configs(text, overrides, field):
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_text(text, overrides=overrides, preset_name="fig2")
    assert exc.value.field == field


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("fig9")


def test_explicit_model():
    text = """
[model]
kind = "explicit"
v_matrix = [[0.25, 0.05], [0.05, 0.3]]
global_coupling = 0.05
[[model.reservoirs]]
temperature = 0.1
[[model.reservoirs.terms]]
matrix = [[1.0, 0.0], [0.0, 1.0]]
profile = { kind = "semicircle", center = 1.0, half_width = 0.4, scale = 1.0 }
"""
    model = RunConfig.from_text(text).build_model()
    np.testing.assert_array_equal(model.v_matrix, [[0.25, 0.05], [0.05, 0.3]])
    assert model.g == 0.05 and model.reservoirs[0].temperature == 0.1


def test_explicit_model_errors():
    with pytest.raises(ConfigError):
        RunConfig.from_text('[model]\nkind = "explicit"\n')
    with pytest.raises(ConfigError):
        RunConfig.from_text('[model]\nkind = "explicit"\nv_matrix = [[1.0, 2.0], [0.0, 1.0]]\n')


def test_initial_states():
    base = RunConfig.from_text("", preset_name="fig2")
    model = base.build_model()
    coh = RunConfig.from_text("", ['initial_state.kind="coherent"', "initial_state.amplitudes=[1.0, [0.0, 2.0]]"],
                              "fig2").initial_state(model)
    w = np.sqrt(np.diag(model.v_matrix))
    assert coh.mean[0] == pytest.approx(np.sqrt(2.0 / w[0]))
    assert coh.mean[model.n + 1] == pytest.approx(2.0 * np.sqrt(2.0 * w[1]))
    with pytest.raises(ConfigError):
        RunConfig.from_text("", ['initial_state.kind="coherent"', "initial_state.amplitudes=[1, 1, 1, 1, 1]"],
                            "fig2")


def test_manifest_json_is_accepted(tmp_path):
    import json

    cfg = RunConfig.from_text("", ["model.omega0=1.0"], "fig2")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"config": cfg.data}))
    assert RunConfig.from_file(path).data == cfg.data
