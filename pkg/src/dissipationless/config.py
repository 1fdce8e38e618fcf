"""Run configuration: TOML schema, presets, overrides and validation.

Schema (all tables optional; defaults shown by ``dissipationless preset``)::

    command    = "modes"            # modes | dynamics | sweep | oracle-diff
    output_dir = "output"
    seed       = 0                  # reserved; every path is deterministic

    [model]                         # either a waveguide array ...
    kind = "waveguide"              # set by preset = "fig2"
    n_cavities = 4
    omega0 = 0.5
    omega1 = 1.0
    kappa = 0.2
    kappa0 = 0.05                   # global coupling g
    alpha_cc = 0.2
    beta = 0.2
    temperature = 0.0
    cavity_coupling = "quadrature"  # or "ladder"

    [model]                         # ... or an explicit model
    kind = "explicit"
    v_matrix = [[0.25, 0.05], [0.05, 0.3]]
    global_coupling = 0.05
    [[model.reservoirs]]
    temperature = 0.0
    [[model.reservoirs.terms]]
    matrix = [[1.0, 0.0], [0.0, 1.0]]
    profile = { kind = "semicircle", center = 1.0, half_width = 0.4, scale = 1.0 }

    [time]
    kind = "uniform"                # uniform | log
    start = 0.0
    stop = 100.0
    num = 1001

    [initial_state]
    kind = "coherent"               # vacuum | coherent | squeezed
    amplitudes = [1.0, 0.0]         # real, or [re, im] pairs
    squeezing = [0.0, 0.0]

    [tolerances]
    green = 1e-10                   # cut-integral convergence
    oracle = 1e-3                   # oracle-diff pass threshold

    [sweep]
    omega0 = { start = 0.2, stop = 1.8, num = 50 }
    kappa0 = { start = 0.0, stop = 0.3, num = 50 }
    workers = 1

    [oracle]
    dt = 0.01
    modes_per_band = 2000
    t_max = 200.0
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:  # Python 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as _toml

import tomli_w

from .errors import ConfigError, DissipationlessError
from .model import GaussianState, ReservoirSpec, SpectralDensity, SystemModel
from .profiles import profile_from_dict
from .waveguide import FIG2, build_waveguide_model

COMMANDS = ("modes", "dynamics", "sweep", "oracle-diff")

_WAVEGUIDE_KEYS = {
    "n_cavities": int, "omega0": float, "omega1": float, "kappa": float,
    "kappa0": float, "alpha_cc": float, "beta": float, "x0": float,
    "temperature": float, "cavity_coupling": str,
}

DEFAULTS = {
    "command": "modes",
    "output_dir": "output",
    "seed": 0,
    "model": {},
    "time": {"kind": "uniform", "start": 0.0, "stop": 100.0, "num": 1001},
    "initial_state": {"kind": "vacuum"},
    "tolerances": {"green": 1e-10, "oracle": 1e-3},
    "sweep": {
        "omega0": {"start": 0.2, "stop": 1.8, "num": 50},
        "kappa0": {"start": 0.0, "stop": 0.3, "num": 50},
        "workers": 1,
    },
    "oracle": {"dt": 0.01, "modes_per_band": 2000, "t_max": 200.0},
}

_SCHEMA = {
    "command": str, "output_dir": str, "seed": int,
    "model": dict, "time": dict, "initial_state": dict, "tolerances": dict,
    "sweep": dict, "oracle": dict,
}
_TIME_KEYS = {"kind": str, "start": float, "stop": float, "num": int}
_STATE_KEYS = {"kind": str, "amplitudes": list, "squeezing": list}
_TOL_KEYS = {"green": float, "oracle": float}
_SWEEP_KEYS = {"omega0": dict, "kappa0": dict, "workers": int}
_ORACLE_KEYS = {"dt": float, "modes_per_band": int, "t_max": float}
_RANGE_KEYS = {"start": float, "stop": float, "num": int}


def preset(name):
    """Model table for a named preset."""
    if name != "fig2":
        raise ConfigError(f"unknown preset '{name}' (available: fig2)", field="model.preset")
    d = FIG2.to_dict()
    d.pop("x0")
    return {"kind": "waveguide", **d}


def preset_toml(name="fig2"):
    data = copy.deepcopy(DEFAULTS)
    data["model"] = preset(name)
    return tomli_w.dumps(data)


def _line_of(text, dotted):
    """Best-effort source line of a dotted key."""
    if not text:
        return None
    parts = dotted.split(".")
    key = parts[-1]
    section = ".".join(parts[:-1])
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    current = ""
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"^\s*\[+([^\]]+)\]+", line)
        if m:
            current = m.group(1).strip()
            continue
        if pat.match(line) and (not section or current == section or section.startswith(current)):
            return i
    return None


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(raw):
    try:
        return _toml.loads(f"v = {raw}")["v"]
    except _toml.TOMLDecodeError:
        return raw


def apply_override(data, assignment):
    """Apply one ``key.path=value`` override in place."""
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value", field=assignment)
    key, raw = assignment.split("=", 1)
    key = key.strip()
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError("cannot descend into a non-table value", field=key)
    node[parts[-1]] = _parse_value(raw.strip())


def _check_type(value, kind, field, text):
    ok = {
        str: isinstance(value, str),
        int: isinstance(value, int) and not isinstance(value, bool),
        float: isinstance(value, (int, float)) and not isinstance(value, bool),
        dict: isinstance(value, dict),
        list: isinstance(value, list),
    }[kind]
    if not ok:
        raise ConfigError(f"expected {kind.__name__}, got {type(value).__name__}",
                          field=field, line=_line_of(text, field))


def _check_table(table, keys, prefix, text):
    for k, v in table.items():
        f = f"{prefix}.{k}" if prefix else k
        if k not in keys:
            raise ConfigError("unknown key", field=f, line=_line_of(text, f))
        _check_type(v, keys[k], f, text)


@dataclass
class RunConfig:
    data: dict
    source_text: str = ""

    # -- construction ----------------------------------------------------
    @classmethod
    def from_text(cls, text, overrides=(), preset_name=None):
        try:
            raw = _toml.loads(text) if text else {}
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(str(exc), line=getattr(exc, "lineno", None)) from None
        return cls._build(raw, text, overrides, preset_name)

    @classmethod
    def from_file(cls, path, overrides=(), preset_name=None):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if path.suffix == ".json":
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(exc.msg, line=exc.lineno) from None
            raw = raw.get("config", raw)  # manifests embed the resolved config
            return cls._build(raw, "", overrides, preset_name)
        return cls.from_text(text, overrides, preset_name)

    @classmethod
    def _build(cls, raw, text, overrides, preset_name):
        if not isinstance(raw, dict):
            raise ConfigError("top level must be a table")
        raw = copy.deepcopy(raw)
        model = raw.get("model", {})
        name = preset_name or (model.get("preset") if isinstance(model, dict) else None)
        if name:
            base_model = preset(name)
            model = {k: v for k, v in model.items() if k != "preset"} if isinstance(model, dict) else {}
            raw["model"] = _merge(base_model, model)
        for o in overrides:
            apply_override(raw, o)
        if isinstance(raw.get("model"), dict) and "preset" in raw["model"]:
            p = raw["model"].pop("preset")
            raw["model"] = _merge(preset(p), raw["model"])
        data = _merge(DEFAULTS, raw)
        cfg = cls(data, text)
        cfg.validate()
        return cfg

    # -- validation --------------------------------------------------------
    def validate(self):
        d, text = self.data, self.source_text
        _check_table(d, _SCHEMA, "", text)
        if d["command"] not in COMMANDS:
            raise ConfigError(f"command must be one of {', '.join(COMMANDS)}",
                              field="command", line=_line_of(text, "command"))
        _check_table(d["time"], _TIME_KEYS, "time", text)
        _check_table(d["initial_state"], _STATE_KEYS, "initial_state", text)
        _check_table(d["tolerances"], _TOL_KEYS, "tolerances", text)
        _check_table(d["sweep"], _SWEEP_KEYS, "sweep", text)
        for axis in ("omega0", "kappa0"):
            _check_table(d["sweep"][axis], _RANGE_KEYS, f"sweep.{axis}", text)
            if d["sweep"][axis].get("num", 1) < 1:
                raise ConfigError("num must be >= 1", field=f"sweep.{axis}.num",
                                  line=_line_of(text, f"sweep.{axis}.num"))
        _check_table(d["oracle"], _ORACLE_KEYS, "oracle", text)
        tm = d["time"]
        if tm["kind"] not in ("uniform", "log"):
            raise ConfigError("time.kind must be 'uniform' or 'log'", field="time.kind",
                              line=_line_of(text, "time.kind"))
        if tm["num"] < 1 or tm["stop"] < tm["start"] or tm["start"] < 0:
            raise ConfigError("need 0 <= start <= stop and num >= 1", field="time",
                              line=_line_of(text, "time.stop"))
        if tm["kind"] == "log" and tm["start"] <= 0:
            raise ConfigError("log-spaced grids need start > 0", field="time.start",
                              line=_line_of(text, "time.start"))
        if d["initial_state"]["kind"] not in ("vacuum", "coherent", "squeezed"):
            raise ConfigError("unknown initial state kind", field="initial_state.kind",
                              line=_line_of(text, "initial_state.kind"))
        if d["oracle"]["dt"] <= 0 or d["oracle"]["modes_per_band"] < 2:
            raise ConfigError("oracle needs dt > 0 and modes_per_band >= 2", field="oracle",
                              line=_line_of(text, "oracle.dt"))
        # building the model validates the physics inputs
        model = self.build_model()
        self.initial_state(model)

    # -- derived objects ---------------------------------------------------
    @property
    def command(self):
        return self.data["command"]

    @property
    def model_kind(self):
        m = self.data["model"]
        if m.get("kind"):
            return m["kind"]
        return "explicit" if "v_matrix" in m else "waveguide"

    def waveguide_params(self):
        m = {k: v for k, v in self.data["model"].items() if k != "kind"}
        for k, v in m.items():
            f = f"model.{k}"
            if k not in _WAVEGUIDE_KEYS:
                raise ConfigError("unknown waveguide key", field=f, line=_line_of(self.source_text, f))
            _check_type(v, _WAVEGUIDE_KEYS[k], f, self.source_text)
        try:
            return FIG2.replace(**m) if m else FIG2
        except DissipationlessError as exc:
            raise ConfigError(str(exc), field="model") from None

    def build_model(self):
        kind = self.model_kind
        text = self.source_text
        if kind == "waveguide":
            params = self.waveguide_params()
            try:
                return build_waveguide_model(params)
            except DissipationlessError as exc:
                raise ConfigError(str(exc), field="model") from None
        if kind != "explicit":
            raise ConfigError("model.kind must be 'waveguide' or 'explicit'", field="model.kind",
                              line=_line_of(text, "model.kind"))
        m = self.data["model"]
        allowed = {"kind", "v_matrix", "global_coupling", "reservoirs"}
        for k in m:
            if k not in allowed:
                raise ConfigError("unknown key", field=f"model.{k}", line=_line_of(text, f"model.{k}"))
        if "v_matrix" not in m:
            raise ConfigError("explicit model needs v_matrix", field="model.v_matrix")
        try:
            reservoirs = []
            for ri, r in enumerate(m.get("reservoirs", [])):
                terms = []
                for ti, t in enumerate(r.get("terms", [])):
                    prof = profile_from_dict(dict(t["profile"]))
                    terms.append((prof, np.array(t["matrix"], dtype=float)))
                reservoirs.append(ReservoirSpec(SpectralDensity(tuple(terms)),
                                                float(r.get("temperature", 0.0))))
            return SystemModel(np.array(m["v_matrix"], dtype=float), tuple(reservoirs),
                               float(m.get("global_coupling", 0.0)))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed model: {exc}", field="model") from None
        except DissipationlessError as exc:
            raise ConfigError(str(exc), field="model") from None

    def time_grid(self):
        tm = self.data["time"]
        if tm["kind"] == "log":
            return np.geomspace(tm["start"], tm["stop"], tm["num"])
        return np.linspace(tm["start"], tm["stop"], tm["num"])

    def initial_state(self, model):
        st = self.data["initial_state"]
        # local oscillator frequencies define the ladder operators of each site
        w = np.sqrt(np.diag(model.v_matrix))
        kind = st["kind"]
        try:
            if kind == "vacuum":
                return GaussianState.vacuum(w)
            if kind == "coherent":
                amps = st.get("amplitudes", [])
                vals = [complex(a[0], a[1]) if isinstance(a, list) else complex(a) for a in amps]
                vals = vals + [0j] * (model.n - len(vals))
                if len(vals) != model.n:
                    raise ValueError("too many amplitudes")
                return GaussianState.coherent(vals, w)
            sq = list(st.get("squeezing", [])) + [0.0] * (model.n - len(st.get("squeezing", [])))
            if len(sq) != model.n:
                raise ValueError("too many squeezing parameters")
            return GaussianState.squeezed([float(s) for s in sq], w)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), field="initial_state",
                              line=_line_of(self.source_text, "initial_state.kind")) from None

    def sweep_axes(self):
        s = self.data["sweep"]

        def axis(a):
            return np.linspace(a["start"], a["stop"], a["num"])

        return axis(s["omega0"]), axis(s["kappa0"])

    def to_toml(self):
        return tomli_w.dumps(self.data)
