"""Sweep and ensemble drivers shared by the command line and the tests."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import DickeState, IntegratorConfig, OutputRecord, SystemParams, evolve
from .errors import ValidationError
from .pulses import PulseRecord, SaseConfig, gaussian_pulse_for_area, photons_for_area, pulse_area, sase_pulse, ensemble_average_spectrum
from .records import Spectrum
from .spectra import (
    SymmetryResult,
    coherent_spectrum,
    collective_halfwidth,
    count_extrema,
    detect_symmetry,
    fit_line,
    linear_response_spectrum,
    reference_orientation,
)


@dataclass(frozen=True)
class AnalysisReference:
    """Line centre and half-width from a fit of the weak-excitation line, plus the sign convention."""

    centre: float
    halfwidth: float
    orientation: float


def analysis_reference(params: SystemParams, spontaneous: bool | None = None) -> AnalysisReference:
    width = collective_halfwidth(params, spontaneous)
    omega = params.lamb_shift + width * np.linspace(-60.0, 60.0, 4001)
    fit = fit_line(linear_response_spectrum(params, omega, spontaneous=spontaneous), params, spontaneous)
    return AnalysisReference(fit["centre"], abs(fit["halfwidth"]), reference_orientation(params, spontaneous))


@dataclass
class PointResult:
    phi: float
    spectrum: Spectrum
    symmetry: SymmetryResult
    extrema: int
    output: OutputRecord | None = None


def _analyse(phi, spectrum, ref: AnalysisReference, threshold: float, half_range: float, output=None) -> PointResult:
    sym = detect_symmetry(spectrum, ref.centre, ref.halfwidth, ref.orientation, threshold, half_range)
    return PointResult(phi, spectrum, sym, count_extrema(spectrum, ref.centre, ref.halfwidth), output)


def background_point(params: SystemParams, ref: AnalysisReference, half_window: float = 40.0, points: int = 4001, threshold: float = 2e-3, half_range: float = 40.0) -> PointResult:
    """Zero drive: no nuclear signal, so the ratio is taken as the empty-cavity background."""
    width = collective_halfwidth(params)
    omega = np.linspace(-half_window * width, half_window * width, points)
    bg = abs(params.cavity_reflection) ** 2
    zeros = np.zeros_like(omega)
    meta = {"kind": "background", "halfwidth": width, "lamb_shift": params.lamb_shift, "background": bg}
    spec = Spectrum(omega, zeros, zeros, np.full_like(omega, bg), meta)
    return _analyse(0.0, spec, ref, threshold, half_range)


def simulate_point(
    params: SystemParams,
    pulse: PulseRecord,
    ref: AnalysisReference,
    integrator: IntegratorConfig | None = None,
    pad_factor: int = 8,
    half_window: float = 40.0,
    floor: float = 1e-6,
    threshold: float = 2e-3,
    half_range: float = 40.0,
    keep_output: bool = True,
) -> PointResult:
    out = evolve(params, DickeState.ground(params.n_atoms), pulse, integrator)
    spec = coherent_spectrum(out, params, pad_factor, floor, half_window)
    phi = pulse.area if pulse.area is not None else pulse_area(pulse, params.xi)
    return _analyse(phi, spec, ref, threshold, half_range, out if keep_output else None)


def _point_job(args):
    params, phi, sigma_t, base, ref, integrator, kw = args
    if phi == 0:
        return background_point(params, ref, kw["half_window"], threshold=kw["threshold"], half_range=kw["half_range"])
    if base is None:
        pulse = gaussian_pulse_for_area(phi, params.xi, sigma_t)
    else:
        pulse = base.scaled(phi / pulse_area(base, params.xi))
        pulse.area = phi
    return simulate_point(params, pulse, ref, integrator, **kw)


def run_sweep(
    params: SystemParams,
    areas,
    sigma_t: float | None = None,
    base_pulse: PulseRecord | None = None,
    integrator: IntegratorConfig | None = None,
    threads: int = 1,
    **analysis,
) -> list[PointResult]:
    """Gaussian pulses (or rescaled copies of ``base_pulse``) at each pulse area."""
    if (sigma_t is None) == (base_pulse is None):
        raise ValidationError("give exactly one of sigma_t and base_pulse")
    if base_pulse is not None and pulse_area(base_pulse, params.xi) == 0:
        raise ValidationError("pulse file has zero resonant area and cannot be rescaled")
    kw = {"pad_factor": 8, "half_window": 40.0, "floor": 1e-6, "threshold": 2e-3, "half_range": 40.0}
    kw.update(analysis)
    ref = analysis_reference(params)
    jobs = [(params, float(phi), sigma_t, base_pulse, ref, integrator, kw) for phi in areas]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_point_job, jobs))
    return [_point_job(j) for j in jobs]


# ---------------------------------------------------------------------------
# SASE ensembles


@dataclass
class ShotResult:
    index: int
    resonant_area: float  # 2|xi| |a_in(omega = 0)|, the area seen by the nuclei
    effective_area: float
    asymmetry: float


@dataclass
class GroupResult:
    members: list[int]
    mean_resonant_area: float
    spectrum: Spectrum
    symmetry: SymmetryResult


@dataclass
class EnsembleResult:
    phi_max: float
    spectrum: Spectrum
    symmetry: SymmetryResult
    shots: list[ShotResult]
    groups: list[GroupResult]


# Ensemble members: a looser step cap on the pulse grid changes normalized
# spectra by ~2e-9 and saves a third of the run time.
ENSEMBLE_INTEGRATOR = IntegratorConfig(pulse_max_step=16.0)


def _shot_job(args):
    params, cfg, index, integrator = args
    pulse = sase_pulse(cfg, index)
    out = evolve(params, DickeState.ground(params.n_atoms), pulse, integrator)
    return index, pulse_area(pulse, params.xi), out


def _common_fft_length(outputs: list[OutputRecord], pad_factor: int) -> int:
    longest = max(o.time_grid.size - o.n_pulse_samples + 1 for o in outputs)
    return int(2 ** math.ceil(math.log2(pad_factor * longest)))


def sase_ensemble(
    params: SystemParams,
    sigma_t: float,
    f_sase: float,
    n_pulses: int,
    phi_max: float,
    seed: int,
    integrator: IntegratorConfig | None = None,
    groups: int = 0,
    threads: int = 1,
    pad_factor: int = 8,
    half_window: float = 40.0,
    floor: float = 1e-6,
    threshold: float = 2e-3,
    half_range: float = 40.0,
) -> EnsembleResult:
    """Simulate every member and average: mean(I_coh) / mean(I_in).

    All members carry the photon number of a Fourier-limited Gaussian of
    area ``phi_max``. With ``groups`` > 0 the shots are also split into that
    many equal-size groups ordered by their resonant area, each averaged
    on its own.
    """
    if phi_max <= 0:
        raise ValidationError("phi_max must be positive for a SASE ensemble")
    cfg = SaseConfig(sigma_t, f_sase, n_pulses, seed, photons_for_area(phi_max, params.xi, sigma_t))
    ref = analysis_reference(params)
    integrator = ENSEMBLE_INTEGRATOR if integrator is None else integrator
    jobs = [(params, cfg, i, integrator) for i in range(n_pulses)]
    if threads > 1 and n_pulses > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(_shot_job, jobs))
    else:
        runs = [_shot_job(j) for j in jobs]
    n_fft = _common_fft_length([r[2] for r in runs], pad_factor)
    spectra = [coherent_spectrum(out, params, pad_factor, floor, half_window, n_fft=n_fft) for _, _, out in runs]
    shots = []
    for (index, area, _), spec in zip(runs, spectra):
        try:
            a = detect_symmetry(spec, ref.centre, ref.halfwidth, ref.orientation, threshold, half_range).asymmetry
        except ValidationError:
            a = math.nan
        shots.append(ShotResult(index, area, phi_max, a))
    mean = ensemble_average_spectrum(spectra)
    sym = detect_symmetry(mean, ref.centre, ref.halfwidth, ref.orientation, threshold, half_range)
    group_results = []
    if groups > 0:
        order = np.argsort([s.resonant_area for s in shots], kind="stable")
        for chunk in np.array_split(order, groups):
            members = [int(i) for i in chunk]
            gspec = ensemble_average_spectrum([spectra[i] for i in members])
            gsym = detect_symmetry(gspec, ref.centre, ref.halfwidth, ref.orientation, threshold, half_range)
            group_results.append(GroupResult(members, float(np.mean([shots[i].resonant_area for i in members])), gspec, gsym))
    return EnsembleResult(phi_max, mean, sym, shots, group_results)
