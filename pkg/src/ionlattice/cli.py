"""Command-line front end.

Five verbs, each driven by a unit-suffixed config file (YAML or JSON)
and writing fixed-format artifacts into --out:

    equilibrium  -> positions.csv
    modes        -> modes.csv + modes_warnings.json
    scatter      -> scatter.csv + scatter_meta.json
    thermometry  -> temperature.json (from a spots CSV)
    micromotion  -> micromotion.json

All CSV numbers carry 9 significant digits with LF line endings, every
artifact embeds the SHA-256 hash of its canonical config, and identical
config + seed reproduce outputs byte for byte. Exit codes: 0 success,
2 config/parse error, 3 solver error, 4 I/O error.
"""

import argparse
import json
import math
import os
import sys
import warnings
from types import SimpleNamespace

import numpy as np

from . import __version__
from . import constants as cn
from .config import load_config
from .crystal import (
    classify_structure,
    continuation,
    equilibrium,
    gamma_parameters,
    normal_modes,
)
from .ensemble import ScatteringScenario, scan_depth
from .errors import AdiabaticityWarning, ConfigError, exit_code_for
from .micromotion import excess_micromotion
from .thermometry import (
    estimate_temperature,
    fit_spot_profiles,
    read_spot_profiles,
)

__all__ = ["main"]

_FMT = "%.9g"


def _parse_grid(spec):
    """Parse 'start:stop:count:{lin|geom}' into an ascending array."""
    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigError(
            f"--grid must be start:stop:count:{{lin|geom}}, got {spec!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"--grid: {exc}") from None
    if count < 1:
        raise ConfigError("--grid count must be >= 1")
    kind = parts[3]
    if kind == "lin":
        return np.linspace(start, stop, count)
    if kind == "geom":
        if start <= 0 or stop <= 0:
            raise ConfigError("--grid geom needs positive start and stop")
        return np.geomspace(start, stop, count)
    raise ConfigError(f"--grid spacing must be 'lin' or 'geom', got {kind!r}")


def _write_csv(path, header, rows, cfg_hash):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                v if isinstance(v, str) else _FMT % v for v in row) + "\n")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(args, cfg):
    out = args.out if args.out is not None else cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _solve_reference(cfg):
    # the zero-depth structure anchors every command
    return equilibrium(cfg.n_ions, cfg.trap, species=cfg.species,
                       seed=cfg.seed)


def cmd_equilibrium(args):
    cfg = load_config(args.config)
    out = _outdir(args, cfg)
    state = _solve_reference(cfg)
    rows = [(i, x / 1e-6, y / 1e-6, z / 1e-6)
            for i, (x, y, z) in enumerate(state.positions)]
    _write_csv(f"{out}/positions.csv", ["ion", "x_um", "y_um", "z_um"],
               rows, cfg.config_hash)
    return 0


def _require(cfg, attr, key):
    value = getattr(cfg, attr)
    if value is None:
        raise ConfigError(f"{key} is required for this command")
    return value


def cmd_modes(args):
    cfg = load_config(args.config)
    out = _outdir(args, cfg)
    lattice = _require(cfg, "lattice", "lattice block")
    if args.grid is not None:
        nu_grid = _parse_grid(args.grid) * 1e6  # MHz -> Hz
        res = continuation(cfg.n_ions, cfg.trap, lattice,
                           species=cfg.species, seed=cfg.seed,
                           nu_grid=nu_grid)
    else:
        res = continuation(cfg.n_ions, cfg.trap, lattice,
                           species=cfg.species, seed=cfg.seed, steps=200)

    report = classify_structure(_state_like(res), cfg.trap,
                                species=cfg.species)
    phi = report.plane_angle
    nx, ny = -math.sin(phi), math.cos(phi)  # normal of the crystal plane

    n = cfg.n_ions
    axial = res.block_weight("z")  # (3N, n_steps)
    rows = []
    for i in range(len(res.nu_latt)):
        c = res.coordinates[i]
        normal_comp = nx * c[0:n, :] + ny * c[n:2 * n, :]
        plane_w = 1.0 - np.sum(normal_comp * normal_comp, axis=0)
        for p in range(res.n_branches):
            rows.append((res.nu_latt[i] / 1e6, str(p),
                         res.frequencies[p, i] / 1e3,
                         plane_w[p], axial[p, i]))
    _write_csv(f"{out}/modes.csv",
               ["nu_latt_MHz", "branch_id", "freq_kHz", "plane_weight",
                "axial_weight"],
               rows, cfg.config_hash)
    _write_json(f"{out}/modes_warnings.json", {
        "config_hash": cfg.config_hash,
        "flagged": [
            {"step": int(f["step"]), "nu_latt_MHz": float(f["nu_latt"]) / 1e6,
             "branches": [int(b) for b in f["branches"]],
             "overlap_gap": float(f["overlap_gap"])}
            for f in res.flagged],
    })
    return 0


def _state_like(res):
    # zero-depth step of the sweep, wrapped for classify_structure
    return SimpleNamespace(positions=res.positions[0])


def cmd_scatter(args):
    cfg = load_config(args.config)
    out = _outdir(args, cfg)
    lattice = _require(cfg, "lattice", "lattice block")
    ramp = _require(cfg, "ramp", "ramp block")
    t0 = _require(cfg, "T0", "crystal.T0_mK")
    if lattice.detuning == 0.0:
        raise ConfigError("lattice.detuning_THz must be nonzero for scatter")

    state = _solve_reference(cfg)
    scenario = ScatteringScenario(crystal=state, species=cfg.species,
                                  lattice=lattice, ramp=ramp, T0=t0)
    if args.grid is not None:
        depths = _parse_grid(args.grid) * 1e-3 * cn.KB  # mK -> J
    else:
        depths = np.linspace(0.0, abs(lattice.depth_U0), 26)
    # every shallow depth re-warns with its own period in the text, which
    # defeats the dedup in "once"; surface the first (most severe) only
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        table = scan_depth(scenario, cfg.beam, depths)
    seen_adiabatic = False
    for w in caught:
        if issubclass(w.category, AdiabaticityWarning):
            if seen_adiabatic:
                continue
            seen_adiabatic = True
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)

    rows = [(r["depth"] / cn.KB / 1e-3, r["nu_latt"] / 1e6, r["p_per_ion"],
             r["subsequent_fraction"], r["bunching"]) for r in table]
    _write_csv(f"{out}/scatter.csv",
               ["depth_mK", "nu_latt_MHz", "p_per_ion",
                "subsequent_fraction", "bunching"],
               rows, cfg.config_hash)
    _write_json(f"{out}/scatter_meta.json", {
        "config_hash": cfg.config_hash,
        "package_version": __version__,
        "schema_version": 1,
        "seed": cfg.seed,
        "n_ions": cfg.n_ions,
        "T0_mK": t0 / 1e-3,
        "depth_grid_mK": [d / cn.KB / 1e-3 for d in depths],
    })
    return 0


def cmd_thermometry(args):
    cfg = load_config(args.config)
    out = _outdir(args, cfg)
    profiles = read_spot_profiles(args.spots)
    spots = fit_spot_profiles(profiles, cfg.imaging)

    state = _solve_reference(cfg)
    modes = normal_modes(state, cfg.trap, species=cfg.species)
    gamma = gamma_parameters(modes)
    est = estimate_temperature(spots, gamma, cfg.trap, cfg.species,
                               cfg.imaging,
                               include_radial=cfg.include_radial)
    _write_json(f"{out}/temperature.json", {
        "config_hash": cfg.config_hash,
        "T_mK": est.T / 1e-3,
        "ci95_mK": est.ci95 / 1e-3,
        "per_ion_residuals_um2": [r / 1e-12 for r in est.per_ion_residuals],
        "gamma_axial": [float(g) for g in gamma.axial],
        "gamma_radial_projected": [float(g)
                                   for g in gamma.gamma_radial_projected],
        "n_spots_used": len([s for s in spots
                             if s.axis == "axial" or cfg.include_radial]),
    })
    return 0


def cmd_micromotion(args):
    cfg = load_config(args.config)
    out = _outdir(args, cfg)
    state = _solve_reference(cfg)
    rep = excess_micromotion(state, cfg.trap, cfg.species)
    _write_json(f"{out}/micromotion.json", {
        "config_hash": cfg.config_hash,
        "q_radial": rep.q_radial,
        "effective_q_axial": rep.effective_q_axial,
        "variance_broadening_factor": rep.variance_broadening_factor,
        "per_ion": [
            {"ion": i,
             "amplitude_um": [a / 1e-6 for a in rep.amplitude[i]],
             "kinetic_energy_J": list(rep.kinetic_energy[i]),
             "equivalent_temperature_mK":
                 [t / 1e-3 for t in rep.equivalent_temperature[i]]}
            for i in range(rep.amplitude.shape[0])],
    })
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ionlattice",
        description="Ion Coulomb crystals in an optical lattice: "
                    "equilibria, mode spectra, scattering statistics, "
                    "thermometry and micromotion estimates.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="YAML/JSON run configuration")
        p.add_argument("--out", default=None,
                       help="output directory (default: output.dir "
                            "from the config, else '.')")

    p = sub.add_parser("equilibrium",
                       help="solve the lattice-free crystal structure")
    common(p)
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("modes",
                       help="sweep lattice depth, tracking mode branches")
    common(p)
    p.add_argument("--grid", default=None,
                   help="nu_latt grid in MHz: start:stop:count:{lin|geom}")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("scatter",
                       help="scattering statistics vs lattice depth")
    common(p)
    p.add_argument("--grid", default=None,
                   help="depth grid in mK: start:stop:count:{lin|geom}")
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("thermometry",
                       help="fit spot profiles and estimate temperature")
    common(p)
    p.add_argument("--spots", required=True,
                   help="CSV of spot profiles (ion_index, axis, pixel, "
                        "counts)")
    p.set_defaults(func=cmd_thermometry)

    p = sub.add_parser("micromotion",
                       help="per-ion excess-micromotion report")
    common(p)
    p.set_defaults(func=cmd_micromotion)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # uniform diagnostic + exit-code mapping
        print(f"ionlattice: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
