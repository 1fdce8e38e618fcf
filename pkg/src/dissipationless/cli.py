"""Command-line front end.

    dissipationless modes       --preset fig2 --set model.omega0=0.5
    dissipationless dynamics    --config run.toml --out results/
    dissipationless sweep       --preset fig2 --set sweep.omega0.num=20
    dissipationless oracle-diff --preset fig2 --set oracle.modes_per_band=500
    dissipationless preset fig2 > run.toml

Exit codes: 0 success, 1 configuration error (nothing written), 2 unstable
model (the modes report is still written), 3 numerical failure.
The output directory is ``--out``, else $DISSIPATIONLESS_OUTPUT_DIR, else the
config's ``output_dir``.
"""

from __future__ import annotations

import argparse
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    critical_coupling,
    find_localized_modes,
    stability_scan,
)
from .config import COMMANDS, RunConfig, preset_toml
from .covariance import cauchy_spread, longtime_covariance, propagate
from .errors import (
    ConfigError,
    DegenerateSpectrum,
    NumericalError,
    PhysicsError,
    UnstableModel,
    WindowTooShort,
)
from .greens import green_function, tail_exponent, upper_envelope
from .oracle import discretize_bath, volterra_solve
from .perturbation import perturbative_modes
from .tables import canonical_hash, sha256_file, write_csv, write_json
from .waveguide import gap_label, reproduce_fig2a

OUTPUT_ENV = "DISSIPATIONLESS_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_NUMERICAL = 0, 1, 2, 3


class _Run:
    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.files = []

    def path(self, name):
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        self.files.append(p)
        return p

    def manifest(self, exit_code):
        data = dict(self.cfg.data)
        hashed = {k: v for k, v in data.items() if k != "output_dir"}
        man = {
            "command": self.cfg.command,
            "config": data,
            "config_sha256": canonical_hash(hashed),
            "exit_code": exit_code,
            "tolerances": data["tolerances"],
            "versions": {
                "dissipationless": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "files": {p.name: sha256_file(p) for p in self.files},
        }
        write_json(self.path("manifest.json"), man)


# -- commands -----------------------------------------------------------------
def _mode_report(model):
    rep = stability_scan(model, threshold=True)
    out = {"stability": rep.to_dict(), "g": model.g,
           "effective_frequencies": model.effective_frequencies.tolist(),
           "gaps": [list(gp) for gp in model.gaps()]}
    if not rep.stable:
        return out, False
    modes = find_localized_modes(model)
    out["modes"] = [dict(m.to_dict(), label=gap_label(m.gap, model)) for m in modes]
    crit = []
    for gi, gap in enumerate(model.gaps()):
        for k in range(model.n):
            try:
                c = critical_coupling(model, k, gap)
                crit.append(dict(c.to_dict(), gap_index=gi))
            except PhysicsError as exc:
                crit.append({"k": k, "gap_index": gi, "g": None,
                             "flag": type(exc).__name__, "detail": str(exc)})
            except NumericalError as exc:
                crit.append({"k": k, "gap_index": gi, "g": None,
                             "flag": type(exc).__name__, "detail": str(exc)})
    out["critical_couplings"] = crit
    try:
        out["perturbative"] = perturbative_modes(model).to_dict()
    except (DegenerateSpectrum, PhysicsError) as exc:
        out["perturbative"] = {"skipped": str(exc)}
    return out, True


def cmd_modes(cfg, run):
    model = cfg.build_model()
    report, stable = _mode_report(model)
    write_json(run.path("modes.json"), report)
    return EXIT_OK if stable else EXIT_UNSTABLE


def _flat_names(prefix, n, m=None):
    m = n if m is None else m
    return [f"{prefix}_{i}{j}" for i in range(n) for j in range(m)]


def cmd_dynamics(cfg, run):
    model = cfg.build_model()
    rep = stability_scan(model)
    if not rep.stable:
        write_json(run.path("modes.json"), _mode_report(model)[0])
        return EXIT_UNSTABLE
    t = cfg.time_grid()
    state0 = cfg.initial_state(model)
    tol = cfg.data["tolerances"]["green"]
    traj = propagate(model, state0, t, tol=tol)
    n = model.n
    prop = traj.propagator
    write_csv(
        run.path("green.csv"),
        ["t"] + _flat_names("G", n) + _flat_names("Gdot", n),
        np.column_stack([t, prop.G.reshape(len(t), -1), prop.Gdot.reshape(len(t), -1)]),
    )
    iu = np.triu_indices(2 * n)
    cov_names = [f"cov_{a}{b}" for a, b in zip(*iu)]
    write_csv(
        run.path("moments.csv"),
        ["t"] + [f"x_{i}" for i in range(n)] + [f"p_{i}" for i in range(n)] + cov_names,
        np.column_stack([t, traj.means, traj.covariances[:, iu[0], iu[1]]]),
    )
    norm_i = np.linalg.norm(prop.transient, ord=2, axis=(1, 2))
    write_csv(
        run.path("transient.csv"),
        ["t", "norm_I", "envelope_I"],
        np.column_stack([t, norm_i, upper_envelope(norm_i)]),
    )
    summary = {"modes": [m.to_dict() for m in prop.modes],
               "cut_nodes": prop.nodes, "sum_rule_error": prop.sum_rule_error}
    pos = t[t > 0]
    if pos.size > 2 and pos[-1] / pos[0] >= 100:
        # tail fit over the last two decades of the grid
        slope, icpt, rates = tail_exponent(t, norm_i, t_min=pos[-1] / 100)
        summary["tail_fit"] = {"t_min": pos[-1] / 100, "exponent": slope, "log_prefactor": icpt,
                               "resonance_rates": rates}
    if traj.thermal is not None and len(t) > 10:
        half = 0.5 * t[-1]
        summary["sigma_spread_late"] = cauchy_spread(traj.thermal, half)
        if prop.modes and model.g > 0:
            try:
                edges = sorted({e for band in model.bands for e in band})
                lt = longtime_covariance(traj.thermal, [m.frequency for m in prop.modes],
                                         window=(half, t[-1]), band_edges=edges)
                summary["longtime"] = {
                    "sigma0": lt.sigma0, "frequencies": lt.frequencies,
                    "refined_modes": lt.refined_modes,
                    "relative_residual": lt.relative_residual,
                }
            except WindowTooShort as exc:
                summary["longtime"] = {"skipped": str(exc)}
    write_json(run.path("summary.json"), summary)
    return EXIT_OK


def cmd_sweep(cfg, run):
    if cfg.model_kind != "waveguide":
        raise ConfigError("sweep is defined for waveguide models", field="model.kind")
    params = cfg.waveguide_params()
    w0, k0 = cfg.sweep_axes()
    pd = reproduce_fig2a(w0, k0, params, workers=cfg.data["sweep"]["workers"])
    ngaps = pd.mode_counts.shape[-1]
    rows = []
    for (i, j, freqs) in pd.frequencies:
        rows.append([i, j, w0[i], k0[j], pd.stable[i, j], pd.min_eigenvalue[i, j]]
                    + list(pd.mode_counts[i, j])
                    + [";".join("%.17g" % f for f in freqs), pd.errors.get((i, j), "")])
    rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(run.path("phase.csv"),
              ["i", "j", "omega0", "kappa0", "stable", "min_lambda0"]
              + [f"modes_gap{g}" for g in range(ngaps)] + ["frequencies", "error"], rows)
    keys = sorted(pd.critical_lines)
    write_csv(run.path("critical_lines.csv"),
              ["omega0", "g_unstable"] + [f"gc_k{k}_gap{g}" for k, g in keys],
              np.column_stack([w0, pd.stability_boundary] + [pd.critical_lines[key] for key in keys]))
    return EXIT_OK


def cmd_oracle_diff(cfg, run):
    model = cfg.build_model()
    if not stability_scan(model).stable:
        write_json(run.path("modes.json"), _mode_report(model)[0])
        return EXIT_UNSTABLE
    oc = cfg.data["oracle"]
    tol = cfg.data["tolerances"]["oracle"]
    bath = discretize_bath(model, oc["modes_per_band"])
    t_end = min(oc["t_max"], 0.5 * bath.t_rec)
    vol = volterra_solve(model, dt=oc["dt"], t_max=t_end)
    stride = max(1, len(vol.t) // 2000)
    t = vol.t[::stride]
    g_contour = green_function(model, t_grid=t, tol=cfg.data["tolerances"]["green"]).G
    g_disc = bath.green(t)[0]
    series = {"contour": g_contour, "volterra": vol.G[::stride], "discrete": g_disc}
    pairs = {}
    for a, b in (("contour", "volterra"), ("contour", "discrete"), ("volterra", "discrete")):
        d = np.abs(series[a] - series[b])
        pairs[f"{a}-{b}"] = {"max": float(d.max()), "rms": float(np.sqrt(np.mean(d**2))),
                             "pass": bool(d.max() < tol)}
    # a method is flagged when it disagrees with both others
    methods = {name: any(v["pass"] for k, v in pairs.items() if name in k.split("-"))
               for name in series}
    report = {"t_end": t_end, "t_rec": bath.t_rec, "dt": oc["dt"],
              "modes_per_band": oc["modes_per_band"], "tolerance": tol, "pairs": pairs,
              "methods": methods, "pass": all(p["pass"] for p in pairs.values())}
    write_json(run.path("oracle_diff.json"), report)
    write_csv(run.path("oracle_g11.csv"), ["t", "contour", "volterra", "discrete"],
              np.column_stack([t, g_contour[:, 0, 0], vol.G[::stride, 0, 0], g_disc[:, 0, 0]]))
    return EXIT_OK


_COMMANDS = {"modes": cmd_modes, "dynamics": cmd_dynamics, "sweep": cmd_sweep,
             "oracle-diff": cmd_oracle_diff}


def build_parser():
    p = argparse.ArgumentParser(prog="dissipationless",
                                description="Localized modes and dissipationless dynamics "
                                            "in band-gapped environments.")
    p.add_argument("command", nargs="?", choices=COMMANDS + ("preset",),
                   help="command to run (default: the config's command)")
    p.add_argument("name", nargs="?", help="preset name for the 'preset' command")
    p.add_argument("--config", "-c", help="TOML config, or a manifest.json to re-run")
    p.add_argument("--preset", help="start from a named model preset (fig2)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. model.omega0=1.0")
    p.add_argument("--out", "-o", help="output directory")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "preset":
        try:
            text = preset_toml(args.name or "fig2")
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    overrides = list(args.set)
    if args.command:
        overrides.append(f'command="{args.command}"')
    try:
        if args.config:
            cfg = RunConfig.from_file(args.config, overrides, args.preset)
        else:
            cfg = RunConfig.from_text("", overrides, args.preset)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or os.environ.get(OUTPUT_ENV) or cfg.data["output_dir"]
    if Path(out).exists() and not Path(out).is_dir():
        print(f"config error: output path {out} is not a directory", file=sys.stderr)
        return EXIT_CONFIG
    run = _Run(cfg, out)
    try:
        code = _COMMANDS[cfg.command](cfg, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnstableModel, PhysicsError) as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        code = EXIT_UNSTABLE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERICAL
    run.manifest(code)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
