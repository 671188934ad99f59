"""Photon budget for full inversion and the grid search over cavity layouts."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .cavity import (
    CavityFit,
    LayerStack,
    build_cavity,
    find_mode_angles,
    fit_cavity_params,
    nuclear_resonance,
    parratt_reflectivity,
    rocking_curve,
    simulate_cavity_data,
)
from .errors import NucinvError, ValidationError
from .units import FWHM_TO_SIGMA, kev_to_omega, lifetime_ns_to_gamma

log = logging.getLogger(__name__)

PI_32_OVER_8 = math.pi**1.5 / 8.0


# ---------------------------------------------------------------------------
# Data


@dataclass(frozen=True)
class IsotopeData:
    name: str
    energy_kev: float
    lifetime_ns: float
    alpha: tuple[float, ...]
    number_density: float  # nm^-3
    absorption_length_um: float
    f_lm: float = 1.0
    i_ground: float = 0.5
    i_excited: float = 1.5
    resonant_material: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in np.atleast_1d(self.alpha)))
        for key in ("energy_kev", "lifetime_ns", "number_density", "absorption_length_um", "f_lm"):
            if not getattr(self, key) > 0:
                raise ValidationError(f"isotope {self.name}: {key} must be positive")
        if not self.alpha or min(self.alpha) < 0:
            raise ValidationError(f"isotope {self.name}: need at least one non-negative alpha")

    @property
    def gamma(self) -> float:
        return lifetime_ns_to_gamma(self.lifetime_ns)

    @property
    def omega0(self) -> float:
        return kev_to_omega(self.energy_kev)

    @property
    def material(self) -> str:
        return self.resonant_material or self.name


def _data_text(name: str) -> str:
    return resources.files("nucinv").joinpath("data").joinpath(name).read_text()


def load_isotopes(text: str | None = None) -> dict[str, IsotopeData]:
    raw = yaml.safe_load(text if text is not None else _data_text("isotopes.yaml"))
    return {name: IsotopeData(name=name, alpha=tuple(np.atleast_1d(v.pop("alpha"))), **v) for name, v in raw["isotopes"].items()}


def load_materials(text: str | None = None) -> dict[str, dict[str, dict[str, float]]]:
    """material -> isotope tag -> {"delta", "beta"}."""
    raw = yaml.safe_load(text if text is not None else _data_text("materials.yaml"))
    return {name: entry["constants"] for name, entry in raw["materials"].items()}


def materials_for(isotope: str, materials: dict | None = None) -> dict[str, dict[str, float]]:
    """Optical constants of every material tabulated at the isotope's energy."""
    materials = load_materials() if materials is None else materials
    return {name: consts[isotope] for name, consts in materials.items() if isotope in consts}


def load_beams(text: str | None = None) -> dict[str, float]:
    """isotope -> beam phase-space constant d_B * theta_B in um * mrad."""
    raw = yaml.safe_load(text if text is not None else _data_text("beams.yaml"))
    return {name: float(v["phase_space"]) for name, v in raw["beams"].items()}


@dataclass(frozen=True)
class BeamParams:
    d_b: float  # um
    theta_b: float  # mrad
    t_fwhm: float  # fs
    phase_space: float  # um * mrad

    def __post_init__(self):
        if min(self.d_b, self.theta_b, self.t_fwhm, self.phase_space) <= 0:
            raise ValidationError("beam parameters must be positive")
        if abs(self.d_b * self.theta_b / self.phase_space - 1.0) > 0.01:
            raise ValidationError(f"d_B * theta_B = {self.d_b * self.theta_b:.4g} departs from the phase space {self.phase_space:.4g}")

    @classmethod
    def from_divergence(cls, phase_space: float, theta_b: float, t_fwhm: float) -> "BeamParams":
        return cls(phase_space / theta_b, theta_b, t_fwhm, phase_space)

    @property
    def sigma_t(self) -> float:
        return self.t_fwhm / FWHM_TO_SIGMA


# ---------------------------------------------------------------------------
# Formulas


def coherence_volume_nuclei(isotope: IsotopeData, layer_thickness: float) -> float:
    """Nuclei in a disk of diameter = absorption length and the layer's thickness (nm)."""
    if not layer_thickness > 0:
        raise ValidationError("resonant layer thickness must be positive")
    diameter_nm = isotope.absorption_length_um * 1e3
    return math.pi / 4.0 * diameter_nm**2 * layer_thickness * isotope.number_density


def excitation_volume(beam: BeamParams, theta0: float, layer_thickness: float, number_density: float, convention: str = "table") -> tuple[float, float]:
    """V_exc = d_B^2 d / sin(theta0) and the nuclei it holds.

    ``convention="si"`` evaluates everything in nm (volume in nm^3).
    ``convention="table"`` evaluates d_B in um and d in nm, i.e. the volume in
    um^2 nm multiplied directly by the density in nm^-3; this is the
    bookkeeping behind the published nucleus counts and is 10^6 smaller than
    the dimensionally consistent value.
    """
    if not theta0 > 0:
        raise ValidationError("theta0 must be positive")
    if convention not in ("table", "si"):
        raise ValidationError(f"unknown volume convention {convention!r}")
    d_b = beam.d_b * (1e3 if convention == "si" else 1.0)
    volume = d_b**2 * layer_thickness / math.sin(theta0 * 1e-3)
    return volume, volume * number_density


def effective_sigma_t(sigma_t: float, omega0: float, theta0: float, theta_b: float) -> float:
    """1 / sqrt(sigma_omega^2 + (omega0 theta0 theta_B)^2), sigma_omega = 1/sigma_t; angles in mrad."""
    spread = omega0 * theta0 * 1e-3 * theta_b * 1e-3
    return 1.0 / math.hypot(1.0 / sigma_t, spread)


def min_photons(xi: complex | float, sigma_t_eff: float, n_coh: float, n_exc: float) -> float:
    """Smallest N_Ph with 8 N_Ph |xi|^2 sigma_t_eff pi^{-3/2} (V_coh / V_exc) >= 1.

    ``xi`` is the single-nucleus coupling; the volume ratio enters as the
    nucleus-count ratio n_coh / n_exc.
    """
    x2 = abs(xi) ** 2
    if min(x2, sigma_t_eff, n_coh, n_exc) <= 0:
        raise ValidationError("min_photons needs positive |xi|, sigma_t_eff, n_coh and n_exc")
    return PI_32_OVER_8 / (x2 * sigma_t_eff) * (n_exc / n_coh)


def conversion_scaled_coupling(g: complex | float, alpha: float) -> complex | float:
    """g / sqrt(1 + alpha): scattering strength, hence |g|^2 and 1/N_Ph, scale as 1/(1 + alpha)."""
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    return g / math.sqrt(1.0 + alpha)


def rescale_coupling(n_target: float, g_ref: complex | float, n_ref: float) -> complex | float:
    """g keeping g sqrt(N) fixed."""
    if n_target <= 0 or n_ref <= 0:
        raise ValidationError("atom numbers must be positive")
    return g_ref * math.sqrt(n_ref / n_target)


# ---------------------------------------------------------------------------
# Candidate evaluation


@dataclass
class PhotonBudget:
    isotope: str
    alpha: float
    mirror: str
    d_top: float
    d_cen: float
    theta0: float  # mrad
    theta1: float  # mrad
    beam: BeamParams
    n_exc: float
    n_coh: float
    sigma_t_eff: float  # fs
    xi_single: float  # |xi| per nucleus, (rad/fs)^{1/2}
    n_ph_min: float
    fit: CavityFit | None = None
    meta: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple:
        return (self.isotope, self.mirror, self.d_top, self.d_cen)

    def row(self) -> dict:
        return {
            "isotope": self.isotope,
            "E0_keV": None,
            "alpha": self.alpha,
            "mirror": self.mirror,
            "d_top_nm": self.d_top,
            "d_cen_nm": self.d_cen,
            "theta0_mrad": self.theta0,
            "N_exc": self.n_exc,
            "d_B_um": self.beam.d_b,
            "theta_B_mrad": self.beam.theta_b,
            "N_Ph": self.n_ph_min,
        }

    def with_alpha(self, alpha: float, alpha_ref: float | None = None) -> "PhotonBudget":
        """Same layout, other conversion coefficient: |xi|^2 scales by (1+alpha_ref)/(1+alpha)."""
        alpha_ref = self.alpha if alpha_ref is None else alpha_ref
        xi = conversion_scaled_coupling(self.xi_single * math.sqrt(1.0 + alpha_ref), alpha)
        out = PhotonBudget(**{**self.__dict__, "alpha": float(alpha), "xi_single": float(xi)})
        out.n_ph_min = min_photons(xi, self.sigma_t_eff, self.n_coh, self.n_exc)
        return out

    def at_duration(self, t_fwhm: float) -> float:
        """N_Ph,min for another pulse length with the same layout and beam."""
        beam = BeamParams(self.beam.d_b, self.beam.theta_b, t_fwhm, self.beam.phase_space)
        omega0 = self.meta["omega0"]
        s_eff = effective_sigma_t(beam.sigma_t, omega0, self.theta0, beam.theta_b)
        return min_photons(self.xi_single, s_eff, self.n_coh, self.n_exc)


@dataclass(frozen=True)
class FitSettings:
    """Sampling used to build the Parratt data that the model is fitted to."""

    mode_grid_points: int = 12000
    mode_range: tuple[float, float] = (0.15, 2.5)  # in units of the substrate critical angle
    rock_halfwidth: float = 0.25  # in units of the mode spacing theta1 - theta0
    rock_points: int = 301
    spec_offset: float = 0.06  # angle offsets of the side spectra, in mode spacings
    detuning_halfwidths: float = 12.0
    detuning_points: int = 241


def mode_angles(stack: LayerStack, settings: FitSettings = FitSettings()) -> np.ndarray:
    """Rocking-curve minima between the configured multiples of the substrate critical angle."""
    sub = stack.layers[-1]
    theta_c = math.sqrt(2.0 * sub.delta) * 1e3
    lo, hi = settings.mode_range
    grid = np.linspace(lo * theta_c, min(hi * theta_c, 99.0), settings.mode_grid_points)
    return find_mode_angles(grid, rocking_curve(stack, grid))


def _line_halfwidth(stack: LayerStack, theta0: float, gamma: float) -> float:
    """HWHM of the nuclear feature at theta0 from a log-spaced scan."""
    pos = gamma * np.geomspace(1e-2, 1e6, 1601)
    det = np.concatenate([-pos[::-1], [0.0], pos])
    spec = np.abs(parratt_reflectivity(stack, np.full(det.size, theta0), det)) ** 2
    sig = np.abs(spec - 0.5 * (spec[0] + spec[-1]))
    above = np.abs(det[sig >= 0.5 * sig.max()])
    return max(float(above.max()), gamma) if above.size else gamma


def fit_stack(stack: LayerStack, gamma: float, theta0: float, theta1: float, settings: FitSettings = FitSettings()) -> CavityFit:
    spacing = abs(theta1 - theta0)
    thr = np.linspace(theta0 - settings.rock_halfwidth * spacing, theta0 + settings.rock_halfwidth * spacing, settings.rock_points)
    thr = thr[thr > 0]
    th_spec = theta0 + settings.spec_offset * spacing * np.array([-1.0, 0.0, 1.0])
    hw = _line_halfwidth(stack, theta0, gamma)
    det = np.linspace(-1, 1, settings.detuning_points) * settings.detuning_halfwidths * hw
    return fit_cavity_params(simulate_cavity_data(stack, thr, th_spec, det, gamma))


def evaluate_candidate(
    isotope: IsotopeData,
    materials: dict,
    mirror: str,
    d_top: float,
    d_cen: float,
    phase_space: float,
    t_fwhm: float,
    alpha: float | None = None,
    d_res: float = 1.0,
    guide: str = "C",
    convention: str = "table",
    settings: FitSettings = FitSettings(),
) -> PhotonBudget:
    """Parratt -> mode angles -> theta_B,max -> d_B -> fit -> N_Ph,min."""
    alpha = isotope.alpha[0] if alpha is None else float(alpha)
    res = nuclear_resonance(isotope.number_density, isotope.energy_kev, isotope.gamma, alpha, isotope.f_lm, isotope.i_ground, isotope.i_excited)
    stack = build_cavity(materials, isotope.energy_kev, mirror, d_top, d_cen, isotope.material, d_res, guide, res)
    modes = mode_angles(stack, settings)
    if modes.size < 2:
        raise ValidationError("need two guided modes to bound the divergence")
    theta0, theta1 = float(modes[0]), float(modes[1])
    fit = fit_stack(stack, isotope.gamma, theta0, theta1, settings)
    params = fit.system_params(1, delta_c=0.0)
    n_coh = coherence_volume_nuclei(isotope, d_res)
    xi_single = abs(params.xi) / math.sqrt(n_coh)
    beam = BeamParams.from_divergence(phase_space, abs(theta1 - theta0), t_fwhm)
    _, n_exc = excitation_volume(beam, fit.theta0, d_res, isotope.number_density, convention)
    s_eff = effective_sigma_t(beam.sigma_t, isotope.omega0, fit.theta0, beam.theta_b)
    return PhotonBudget(
        isotope=isotope.name,
        alpha=alpha,
        mirror=mirror,
        d_top=float(d_top),
        d_cen=float(d_cen),
        theta0=fit.theta0,
        theta1=theta1,
        beam=beam,
        n_exc=n_exc,
        n_coh=n_coh,
        sigma_t_eff=s_eff,
        xi_single=xi_single,
        n_ph_min=min_photons(xi_single, s_eff, n_coh, n_exc),
        fit=fit,
        meta={"omega0": isotope.omega0, "convention": convention, "energy_kev": isotope.energy_kev},
    )


@dataclass
class OptimizationResult:
    best: PhotonBudget
    ranked: list[PhotonBudget]
    skipped: list[tuple[tuple, str]]


def _evaluate(args):
    key, kwargs = args
    try:
        return key, evaluate_candidate(**kwargs), None
    except NucinvError as exc:
        return key, None, str(exc)


def optimize_cavity(
    isotope: IsotopeData,
    mirrors,
    d_top_grid,
    d_cen_grid,
    phase_space: float,
    t_fwhm: float,
    materials: dict | None = None,
    alpha: float | None = None,
    threads: int = 1,
    convention: str = "table",
    settings: FitSettings = FitSettings(),
) -> OptimizationResult:
    """Grid search over (mirror, d_top, d_cen); ties broken by the candidate key.

    Candidates without optical data or without two guided modes are skipped
    with a logged warning.
    """
    materials = materials_for(isotope.name) if materials is None else materials
    jobs = []
    skipped = []
    for mirror in mirrors:
        for d_top in d_top_grid:
            for d_cen in d_cen_grid:
                key = (str(mirror), float(d_top), float(d_cen))
                missing = [m for m in (mirror, "C", isotope.material) if m not in materials]
                if missing:
                    msg = f"no optical constants for {', '.join(missing)} at {isotope.energy_kev} keV"
                    log.warning("skipping %s: %s", key, msg)
                    skipped.append((key, msg))
                    continue
                jobs.append((key, dict(isotope=isotope, materials=materials, mirror=mirror, d_top=float(d_top), d_cen=float(d_cen),
                                       phase_space=phase_space, t_fwhm=t_fwhm, alpha=alpha, convention=convention, settings=settings)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_evaluate, jobs))
    else:
        results = [_evaluate(j) for j in jobs]
    ranked = []
    for key, budget, err in results:
        if budget is None:
            log.warning("skipping %s: %s", key, err)
            skipped.append((key, err))
        else:
            ranked.append(budget)
    if not ranked:
        raise ValidationError("no feasible cavity candidate (no guided mode found)")
    ranked.sort(key=lambda b: (b.n_ph_min, b.key))
    return OptimizationResult(ranked[0], ranked, skipped)


def photon_curve(budget: PhotonBudget, t_fwhm_grid, alphas=None) -> dict[float, np.ndarray]:
    """N_Ph,min(t_FWHM) for each conversion coefficient."""
    alphas = [budget.alpha] if alphas is None else list(alphas)
    out = {}
    for a in alphas:
        b = budget.with_alpha(a)
        out[float(a)] = np.array([b.at_duration(t) for t in np.asarray(t_fwhm_grid, float)])
    return out


def budget_summary(budget: PhotonBudget) -> dict:
    row = budget.row()
    row["E0_keV"] = budget.meta.get("energy_kev")
    row["sigma_t_eff_fs"] = budget.sigma_t_eff
    row["N_coh"] = budget.n_coh
    if budget.fit is not None:
        row["fit"] = {"kappa": budget.fit.kappa, "kappa_r": budget.fit.kappa_r, "g_sqrt_n": budget.fit.g_sqrt_n, "residual": budget.fit.residual}
    return row
