"""Command-line entry point: simulate, sase, optimize, toy, fit-cavity."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ScenarioConfig, load_config
from .errors import NucinvError, ValidationError, exit_code_for
from .units import HBAR_EV_FS

log = logging.getLogger("nucinv")

OUT_ENV = "NUCINV_OUT"


def _out_dir(args, cfg: ScenarioConfig, command: str) -> Path:
    base = args.out or cfg.output.dir or os.environ.get(OUT_ENV) or "nucinv_out"
    path = Path(base)
    if not path.is_absolute() and args.out is None and cfg.output.dir is not None:
        path = cfg.base_dir / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _common_header(cfg: ScenarioConfig, command: str) -> dict:
    head = {"command": command, "config_hash": cfg.config_hash, "seed": cfg.seed}
    if cfg.system is not None:
        p = cfg.system
        head.update(
            {
                "rate_unit": "rad/fs",
                "n_atoms": p.n_atoms,
                "gamma": p.gamma,
                "g": complex(p.g),
                "kappa": p.kappa,
                "kappa_r": p.kappa_r,
                "delta_c": p.delta_c,
                "zeta": p.zeta,
                "xi": p.xi,
            }
        )
    return head


def _analysis_kw(cfg: ScenarioConfig) -> dict:
    a = cfg.analysis
    return {"pad_factor": a.pad_factor, "half_window": a.half_window, "floor": a.floor, "threshold": a.threshold, "half_range": a.half_range}


def _pi(x: float) -> float:
    return x / math.pi


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(cfg: ScenarioConfig, out: Path, threads: int = 1) -> list[str]:
    """Gaussian or file pulses over a pulse-area sweep: spectra, traces and flip summary."""
    from .config import GaussianSpec, PulseFileSpec
    from .pipeline import run_sweep
    from .spectra import classify_sweep

    params = cfg.require_system()
    spec = cfg.pulse
    if not isinstance(spec, (GaussianSpec, PulseFileSpec)):
        raise ValidationError("simulate needs pulse.gaussian or pulse.file (use the sase command for SASE ensembles)")
    areas = cfg.sweep or ((spec.area,) if spec.area is not None else ())
    if not areas:
        raise ValidationError("simulate needs a sweep or pulse area_pi")
    kw = dict(sigma_t=spec.sigma_t) if isinstance(spec, GaussianSpec) else dict(base_pulse=io.read_pulse(cfg.base_dir / spec.path))
    results = run_sweep(params, areas, integrator=cfg.integrator, threads=threads, **kw, **_analysis_kw(cfg))
    head = _common_header(cfg, "simulate")
    files = []
    rows = []
    for k, r in enumerate(results):
        h = dict(head, phi=r.phi, phi_in_pi=_pi(r.phi), asymmetry=r.symmetry.asymmetry, classification=r.symmetry.classification)
        files.append(io.write_spectrum(out / f"spectrum_{k:03d}.txt", r.spectrum, h, cfg.output.digits).name)
        if r.output is not None and (cfg.output.jz_trace or cfg.output.time_trace):
            files.append(io.write_trace(out / f"trace_{k:03d}.txt", r.output, h, cfg.output.time_trace, cfg.output.digits).name)
        rows.append(
            {
                "index": k,
                "phi_pi": _pi(r.phi),
                "asymmetry": r.symmetry.asymmetry,
                "classification": r.symmetry.classification,
                "extrema": r.extrema,
                "final_excited_fraction": math.nan if r.output is None else r.output.final_state.excited_fraction(),
            }
        )
    flips = classify_sweep([r.phi for r in results], [r.symmetry for r in results])
    ref_centre = results[0].symmetry.centre if results else math.nan
    summary_head = dict(head, line_centre=ref_centre, line_halfwidth=results[0].symmetry.halfwidth if results else math.nan)
    files.append(io.write_table(out / "summary.txt", rows, summary_head).name)
    flip_rows = [{"from_pi": _pi(a), "to_pi": _pi(b)} for a, b in flips]
    files.append(io.write_table(out / "flips.txt", flip_rows or [{"from_pi": math.nan, "to_pi": math.nan}], head).name)
    for a, b in flips:
        print(f"symmetry flip between phi = {_pi(a):.3f} pi and {_pi(b):.3f} pi")
    if not flips:
        print("no symmetry flip in the sweep")
    return files


def cmd_sase(cfg: ScenarioConfig, out: Path, threads: int = 1) -> list[str]:
    """SASE ensembles over a phi_max sweep: mean spectra and per-shot asymmetries."""
    from .config import SaseSpec
    from .pipeline import sase_ensemble

    params = cfg.require_system()
    spec = cfg.pulse
    if not isinstance(spec, SaseSpec):
        raise ValidationError("sase needs a pulse.sase section")
    areas = cfg.sweep or ((spec.area,) if spec.area is not None else ())
    if not areas:
        raise ValidationError("sase needs a sweep of phi_max values or pulse.sase.area_pi")
    head = _common_header(cfg, "sase")
    head.update(sigma_t_fs=spec.sigma_t, f_sase=spec.f_sase, n_pulses=spec.n_pulses)
    files = []
    rows = []
    for k, phi_max in enumerate(areas):
        if phi_max <= 0:
            raise ValidationError("SASE sweeps need positive phi_max values")
        res = sase_ensemble(params, spec.sigma_t, spec.f_sase, spec.n_pulses, phi_max, cfg.seed, cfg.integrator, spec.groups, threads, **_analysis_kw(cfg))
        h = dict(head, phi_max=phi_max, phi_max_in_pi=_pi(phi_max), asymmetry=res.symmetry.asymmetry, classification=res.symmetry.classification)
        files.append(io.write_spectrum(out / f"mean_spectrum_{k:03d}.txt", res.spectrum, h, cfg.output.digits).name)
        shot_rows = [{"index": s.index, "resonant_area_pi": _pi(s.resonant_area), "asymmetry": s.asymmetry} for s in res.shots]
        files.append(io.write_table(out / f"shots_{k:03d}.txt", shot_rows, h).name)
        if res.groups:
            grows = []
            for j, g in enumerate(res.groups):
                files.append(io.write_spectrum(out / f"group_spectrum_{k:03d}_{j:02d}.txt", g.spectrum, dict(h, group=j), cfg.output.digits).name)
                grows.append(
                    {
                        "group": j,
                        "size": len(g.members),
                        "mean_resonant_area_pi": _pi(g.mean_resonant_area),
                        "asymmetry": g.symmetry.asymmetry,
                        "classification": g.symmetry.classification,
                    }
                )
            files.append(io.write_table(out / f"groups_{k:03d}.txt", grows, h).name)
        rows.append({"index": k, "phi_max_pi": _pi(phi_max), "asymmetry": res.symmetry.asymmetry, "classification": res.symmetry.classification})
        print(f"phi_max = {_pi(phi_max):.3f} pi: mean-spectrum asymmetry {res.symmetry.asymmetry:+.3e} ({res.symmetry.classification})")
    files.append(io.write_table(out / "summary.txt", rows, head).name)
    return files


def cmd_toy(cfg: ScenarioConfig, out: Path, threads: int = 1) -> list[str]:
    """Analytic single-nucleus spectra over pulse-area and phase grids."""
    from .config import ToySpec
    from .toy import ToyParams, mirror_asymmetry, toy_spectrum, wing_sign

    spec = cfg.toy or ToySpec()
    omega = spec.gamma * np.linspace(-spec.half_range, spec.half_range, spec.points)
    head = {"command": "toy", "config_hash": cfg.config_hash, "seed": cfg.seed, "d": spec.d, "beta": spec.beta, "gamma": spec.gamma}
    files = []
    rows = []
    for i, phi in enumerate(spec.phi):
        for j, phase in enumerate(spec.phase):
            p = ToyParams.for_area(phi, spec.d, spec.beta, spec.gamma, phase)
            s = toy_spectrum(p, omega)
            h = dict(head, phi_in_pi=_pi(phi), phase_in_pi=_pi(phase))
            files.append(io.write_spectrum(out / f"toy_{i:03d}_{j:02d}.txt", s, h, cfg.output.digits, omega_unit="arb").name)
            rows.append({"phi_pi": _pi(phi), "phase_pi": _pi(phase), "mirror_asymmetry": mirror_asymmetry(p), "wing_sign": wing_sign(p),
                         "centre_value": float(np.abs(s.normalized[spec.points // 2]))})
    files.append(io.write_table(out / "summary.txt", rows, head).name)
    return files


def cmd_optimize(cfg: ScenarioConfig, out: Path, threads: int = 1) -> list[str]:
    """Cavity layout search and photon budgets per isotope."""
    from .requirements import load_beams, load_isotopes, optimize_cavity, photon_curve

    spec = cfg.optimize
    if spec is None:
        raise ValidationError("optimize needs an optimize section")
    isotopes = load_isotopes()
    beams = load_beams()
    head = {"command": "optimize", "config_hash": cfg.config_hash, "seed": cfg.seed, "t_fwhm_fs": spec.t_fwhm, "convention": spec.convention}
    table = []
    curves = {"t_fwhm": ("fs", np.asarray(spec.curve_t_fwhm))}
    skipped = []
    for name in spec.isotopes:
        if name not in isotopes:
            raise ValidationError(f"unknown isotope {name!r}; bundled: {sorted(isotopes)}")
        if name not in beams:
            raise ValidationError(f"no beam phase-space product for {name}")
        iso = isotopes[name]
        res = optimize_cavity(iso, spec.mirrors, spec.d_top, spec.d_cen, beams[name], spec.t_fwhm, threads=threads, convention=spec.convention)
        skipped += [(name,) + tuple(k) + (msg,) for k, msg in res.skipped]
        best = res.best
        for alpha in iso.alpha:
            b = best.with_alpha(alpha)
            row = b.row()
            row["E0_keV"] = iso.energy_kev
            table.append(row)
        for alpha, values in photon_curve(best, spec.curve_t_fwhm, iso.alpha).items():
            curves[f"{name}_alpha_{alpha:g}"] = ("photons", values)
        print(f"{name}: best {best.mirror} d_top = {best.d_top:g} nm, d_cen = {best.d_cen:g} nm, N_Ph = {best.n_ph_min:.2e}")
    units = {"E0_keV": "keV", "d_top_nm": "nm", "d_cen_nm": "nm", "theta0_mrad": "mrad", "d_B_um": "um", "theta_B_mrad": "mrad"}
    files = [io.write_table(out / "table.txt", table, head, units).name]
    cols = [(k, u, v) for k, (u, v) in curves.items()]
    files.append(io.write_columns(out / "curves.txt", cols, head).name)
    if skipped:
        rows = [{"isotope": s[0], "mirror": s[1], "d_top_nm": s[2], "d_cen_nm": s[3], "reason": s[4].replace(" ", "_")} for s in skipped]
        files.append(io.write_table(out / "skipped.txt", rows, head).name)
    return files


def cmd_fit_cavity(cfg: ScenarioConfig, out: Path, threads: int = 1) -> list[str]:
    """Single-mode parameters of a layer stack from Parratt reflectivity."""
    from .cavity import Layer, LayerStack, model_reflectivity, nuclear_resonance, rocking_curve
    from .requirements import FitSettings, fit_stack, load_isotopes, materials_for, mode_angles

    st = cfg.stack
    if st is None:
        raise ValidationError("fit-cavity needs system.stack")
    isotopes = load_isotopes()
    iso = isotopes.get(st.isotope) if st.isotope else None
    if st.isotope and iso is None:
        raise ValidationError(f"unknown isotope {st.isotope!r}")
    if iso is None:
        raise ValidationError("fit-cavity needs system.stack.isotope for the nuclear resonance")
    mats = materials_for(iso.name) if abs(iso.energy_kev - st.energy_kev) < 1e-6 else {}
    res = nuclear_resonance(iso.number_density, iso.energy_kev, iso.gamma, iso.alpha[0], iso.f_lm, iso.i_ground, iso.i_excited)
    layers = []
    for i, lay in enumerate(st.layers):
        name = lay["material"]
        if "delta" in lay and "beta" in lay:
            delta, beta = float(lay["delta"]), float(lay["beta"])
        elif name in mats:
            delta, beta = mats[name]["delta"], mats[name]["beta"]
        else:
            raise ValidationError(f"layer {i}: no optical constants for {name!r} at {st.energy_kev} keV; give delta and beta")
        resonant = lay.get("resonant", name == iso.material)
        layers.append(Layer(name, lay["thickness_nm"], delta, beta, res if resonant else None))
    stack = LayerStack(tuple(layers), st.energy_kev)
    settings = FitSettings()
    modes = mode_angles(stack, settings)
    if modes.size < 2:
        raise ValidationError("fewer than two guided modes found in the rocking curve")
    fit = fit_stack(stack, iso.gamma, float(modes[0]), float(modes[1]), settings)
    ev = fit.to_ev()
    head = {
        "command": "fit-cavity",
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "isotope": iso.name,
        "energy_kev": st.energy_kev,
        "theta0_mrad": fit.theta0,
        "kappa_rad_per_fs": fit.kappa,
        "kappa_r_rad_per_fs": fit.kappa_r,
        "g_sqrt_n_rad_per_fs": fit.g_sqrt_n,
        "kappa_eV": ev["kappa"],
        "kappa_r_eV": ev["kappa_r"],
        "g_sqrt_n_eV": ev["g_sqrt_n"],
        "slope_sign": fit.sign,
        "residual_rms": fit.residual,
        "mode_angles_mrad": [float(m) for m in modes[:4]],
    }
    spacing = float(modes[1] - modes[0])
    theta = np.linspace(fit.theta0 - settings.rock_halfwidth * spacing, fit.theta0 + settings.rock_halfwidth * spacing, settings.rock_points)
    data = rocking_curve(stack.without_resonance(), theta)
    model = model_reflectivity(theta, None, fit.theta0, fit.kappa, fit.kappa_r, fit.g_sqrt_n, fit.amplitude, fit.sign, fit.omega0, fit.gamma)
    files = [io.write_columns(out / "rocking_fit.txt", [("theta", "mrad", theta), ("parratt", "1", data), ("model", "1", model)], head).name]
    files.append(io.write_table(out / "fit.txt", [{"kappa_meV": fit.kappa * HBAR_EV_FS * 1e3, "kappa_r_meV": fit.kappa_r * HBAR_EV_FS * 1e3,
                                                   "g_sqrt_n_meV": fit.g_sqrt_n * HBAR_EV_FS * 1e3, "theta0_mrad": fit.theta0, "residual": fit.residual}], head,
                                  {"kappa_meV": "meV", "kappa_r_meV": "meV", "g_sqrt_n_meV": "meV", "theta0_mrad": "mrad"}).name)
    print(f"theta0 = {fit.theta0:.4f} mrad, kappa = {ev['kappa'] * 1e3:.3f} meV, kappa_R = {ev['kappa_r'] * 1e3:.3f} meV, g sqrt(N) = {ev['g_sqrt_n'] * 1e6:.3f} ueV")
    return files


COMMANDS = {
    "simulate": cmd_simulate,
    "sase": cmd_sase,
    "optimize": cmd_optimize,
    "toy": cmd_toy,
    "fit-cavity": cmd_fit_cavity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nucinv", description="Collective nuclear excitation in x-ray cavities.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMANDS[name].__doc__)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--out", default=None, help=f"output directory (default: output.dir, ${OUT_ENV}, or ./nucinv_out)")
        p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps and ensembles")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = _out_dir(args, cfg, args.command)
        files = COMMANDS[args.command](cfg, out, args.threads)
        io.write_sidecar(out / "run.json", args.command, cfg.config_hash, cfg.seed, files)
    except NucinvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
