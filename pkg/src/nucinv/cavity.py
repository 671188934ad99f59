"""Grazing-incidence reflectivity of layered cavities and the quantum-optical parameter fit.

Angles are in mrad at the API, detunings and rates in rad/fs. Refractive
indices follow n = 1 - delta + i beta (time dependence e^{-i omega t}), so
absorption has beta > 0 and the z-wavevector of every layer is taken on the
branch with Im k_z >= 0 (field decaying into the stack).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .errors import ConvergenceError, ValidationError
from .units import HBAR_EV_FS, kev_to_omega, wavelength_nm


@dataclass(frozen=True)
class NuclearResonance:
    """Resonant contribution n - 1 = -beta0 (gamma/2) / (detuning + i gamma/2)."""

    beta0: float
    gamma: float

    def index_shift(self, detuning):
        return -self.beta0 * (0.5 * self.gamma) / (np.asarray(detuning) + 0.5j * self.gamma)


@dataclass(frozen=True)
class Layer:
    material: str
    thickness: float | None  # nm; None marks the semi-infinite substrate
    delta: float
    beta: float
    resonance: NuclearResonance | None = None
    roughness: float = 0.0  # reserved, must be 0

    def index(self, detuning=None):
        n = 1.0 - self.delta + 1j * self.beta
        if self.resonance is not None and detuning is not None:
            n = n + self.resonance.index_shift(detuning)
        return n


@dataclass(frozen=True)
class LayerStack:
    """Layers topmost first; the last entry is the substrate."""

    layers: tuple[Layer, ...]
    photon_energy: float  # keV

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValidationError("stack has no layers")
        if self.photon_energy <= 0:
            raise ValidationError("photon energy must be positive")
        for i, lay in enumerate(self.layers):
            last = i == len(self.layers) - 1
            if last and lay.thickness is not None:
                raise ValidationError("the bottom layer must be a semi-infinite substrate (thickness None)")
            if not last and (lay.thickness is None or lay.thickness < 0):
                raise ValidationError(f"layer {i} ({lay.material}) needs a non-negative finite thickness")
            if lay.delta < 0 or lay.beta < 0:
                raise ValidationError(f"layer {i} ({lay.material}) has negative delta or beta")
            if lay.roughness != 0.0:
                raise ValidationError("interface roughness is not modelled")

    @property
    def wavenumber(self) -> float:
        """Vacuum k in nm^-1."""
        return 2.0 * math.pi / wavelength_nm(self.photon_energy)

    @property
    def resonant_layers(self) -> list[int]:
        return [i for i, lay in enumerate(self.layers) if lay.resonance is not None]

    def without_resonance(self) -> "LayerStack":
        return replace(self, layers=tuple(replace(l, resonance=None) for l in self.layers))

    def inserted(self, position: int, layer: Layer) -> "LayerStack":
        layers = list(self.layers)
        layers.insert(position, layer)
        return replace(self, layers=tuple(layers))


def _kz(k, n, sin2):
    # n^2 - cos^2 written as (n^2 - 1) + sin^2 to avoid cancellation at grazing angles
    kz = k * np.sqrt((n * n - 1.0) + sin2 + 0j)
    return np.where(kz.imag < 0, -kz, kz)


def parratt_reflectivity(stack: LayerStack, theta, detuning=None) -> np.ndarray:
    """Complex reflection amplitude r(theta[, detuning]).

    ``theta`` in mrad; ``detuning`` (rad/fs, relative to the nuclear line)
    broadcasts against it and only affects layers carrying a resonance.
    Recursion runs from the substrate upward,
    X_j = (r_j + X_{j+1} e^{2 i kz_{j+1} d_{j+1}}) / (1 + r_j X_{j+1} e^{2 i kz_{j+1} d_{j+1}}).
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0) or np.any(theta >= 100):
        raise ValidationError("grazing angle must lie in (0, 100) mrad")
    th = theta * 1e-3
    if detuning is not None:
        th, detuning = np.broadcast_arrays(th, np.asarray(detuning, dtype=float))
    k = stack.wavenumber
    sin2 = np.sin(th) ** 2
    kz_above = _kz(k, 1.0 + 0j, sin2)
    kzs = [kz_above] + [_kz(k, lay.index(detuning), sin2) for lay in stack.layers]
    x = np.zeros_like(kz_above)
    for j in range(len(stack.layers) - 1, -1, -1):
        upper, lower = kzs[j], kzs[j + 1]
        r = (upper - lower) / (upper + lower)
        lay = stack.layers[j]
        if lay.thickness is None:
            phase = 1.0
        else:
            phase = np.exp(2j * lower * lay.thickness)
        xp = x * phase
        x = (r + xp) / (1.0 + r * xp)
    return x


def rocking_curve(stack: LayerStack, theta_grid) -> np.ndarray:
    """|r(theta)|^2 without nuclear response."""
    return np.abs(parratt_reflectivity(stack, theta_grid)) ** 2


def find_mode_angles(theta, curve, rel_prominence: float = 0.02, min_points: int = 5) -> np.ndarray:
    """Guided-mode angles: local minima of a rocking curve, ascending.

    A minimum counts when its prominence exceeds ``rel_prominence`` of the
    curve's range and it is resolved by at least ``min_points`` samples.
    """
    theta = np.asarray(theta, dtype=float)
    curve = np.asarray(curve, dtype=float)
    if theta.shape != curve.shape or theta.size < 3:
        raise ValidationError("theta and curve must be equal-length arrays with >= 3 points")
    order = np.argsort(theta)
    theta, curve = theta[order], curve[order]
    span = np.ptp(curve)
    if span == 0:
        raise ValidationError("no minima found in rocking curve")
    idx, props = find_peaks(-curve, prominence=rel_prominence * span, width=1)
    if min_points > 1:
        idx = idx[props["widths"] * 2 >= min_points - 1] if idx.size else idx
    if idx.size == 0:
        raise ValidationError("no minima found in rocking curve")
    return theta[idx]


# ---------------------------------------------------------------------------
# Cavity construction from tabulated materials


def nuclear_resonance(number_density: float, energy_kev: float, gamma: float, alpha: float, f_lm: float, i_ground: float = 0.5, i_excited: float = 1.5) -> NuclearResonance:
    """Forward-scattering strength of a layer of resonant nuclei.

    number_density in nm^-3 (resonant isotope only). beta0 = rho sigma0 f_LM / (2k)
    with sigma0 = (2 pi / k^2) (2Ie+1)/(2Ig+1) / (1+alpha).
    """
    k = 2.0 * math.pi / wavelength_nm(energy_kev)
    sigma0 = 2.0 * math.pi / k**2 * (2 * i_excited + 1) / (2 * i_ground + 1) / (1.0 + alpha)
    return NuclearResonance(number_density * sigma0 * f_lm / (2.0 * k), gamma)


def build_cavity(
    materials: dict,
    energy_kev: float,
    mirror: str,
    d_top: float,
    d_cen: float,
    resonant: str,
    d_res: float = 1.0,
    guide: str = "C",
    resonance: NuclearResonance | None = None,
) -> LayerStack:
    """mirror(d_top) / guide / resonant(d_res) / guide / mirror substrate.

    ``d_cen`` is the total guiding-layer thickness with the resonant layer
    centred in it. ``materials`` maps name -> {"delta": .., "beta": ..} at
    ``energy_kev``.
    """
    if d_cen <= d_res:
        raise ValidationError(f"d_cen = {d_cen} nm must exceed the resonant layer thickness {d_res} nm")
    for name in (mirror, guide, resonant):
        if name not in materials:
            raise ValidationError(f"no optical constants for material {name!r} at {energy_kev} keV")
    half = 0.5 * (d_cen - d_res)

    def lay(name, d, res=None):
        m = materials[name]
        return Layer(name, d, float(m["delta"]), float(m["beta"]), res)

    return LayerStack(
        (lay(mirror, d_top), lay(guide, half), lay(resonant, d_res, resonance), lay(guide, half), lay(mirror, None)),
        energy_kev,
    )


# ---------------------------------------------------------------------------
# Quantum-optical parameter fit


@dataclass
class CavityFit:
    """Single-mode parameters extracted from reflectivity data.

    Rates in rad/fs, theta0 in mrad. The detuning map is
    Delta_C(theta) = slope * (theta - theta0) with slope = sign * omega0 * theta0
    (rad/fs per mrad, see ``delta_c``).
    """

    kappa: float
    kappa_r: float
    theta0: float
    g_sqrt_n: float
    sign: int
    omega0: float
    amplitude: float
    residual: float
    iterations: int
    gamma: float
    meta: dict = field(default_factory=dict)

    @property
    def slope(self) -> float:
        """d Delta_C / d theta in rad/fs per mrad."""
        return self.sign * self.omega0 * self.theta0 * 1e-6

    def delta_c(self, theta) -> np.ndarray:
        return self.slope * (np.asarray(theta, dtype=float) - self.theta0)

    def theta_for_detuning(self, delta_c: float) -> float:
        return self.theta0 + delta_c / self.slope

    def to_ev(self) -> dict:
        return {"kappa": self.kappa * HBAR_EV_FS, "kappa_r": self.kappa_r * HBAR_EV_FS, "g_sqrt_n": self.g_sqrt_n * HBAR_EV_FS}

    def system_params(self, n_atoms: int, delta_c: float | None = None, theta: float | None = None):
        """SystemParams at the given cavity detuning (or angle) with g sqrt(N) preserved."""
        from .dynamics import SystemParams

        if delta_c is None:
            delta_c = 0.0 if theta is None else float(self.delta_c(theta))
        return SystemParams.from_collective(n_atoms, self.g_sqrt_n, self.gamma, self.kappa, self.kappa_r, delta_c)


@dataclass
class CavityData:
    """Rocking curve (no nuclear response) plus nuclear spectra at a few angles.

    spectra has shape (len(theta_spec), len(detuning)).
    """

    theta_rock: np.ndarray
    rock: np.ndarray
    theta_spec: np.ndarray
    detuning: np.ndarray
    spectra: np.ndarray
    omega0: float
    gamma: float

    def __post_init__(self):
        self.theta_rock = np.asarray(self.theta_rock, float)
        self.rock = np.asarray(self.rock, float)
        self.theta_spec = np.atleast_1d(np.asarray(self.theta_spec, float))
        self.detuning = np.asarray(self.detuning, float)
        self.spectra = np.atleast_2d(np.asarray(self.spectra, float))
        if self.rock.shape != self.theta_rock.shape:
            raise ValidationError("rocking curve and angle grid differ in shape")
        if self.spectra.shape != (self.theta_spec.size, self.detuning.size):
            raise ValidationError("spectra must have shape (n_angles, n_detunings)")


def model_reflectivity(theta, detuning, theta0, kappa, kappa_r, g_sqrt_n, amplitude, sign, omega0, gamma):
    """Linear-response reflectivity of the single-mode model, |A (R0 - i xi^2 / (det - Im zeta + i Gamma))|^2.

    Collective quantities (N = 1 with g -> g sqrt(N)); the line width includes gamma/2.
    detuning=None gives the empty-cavity term only.
    """
    dc = sign * omega0 * theta0 * 1e-6 * (np.asarray(theta) - theta0)
    denom = kappa + 1j * dc
    r0 = 2 * kappa_r / denom - 1
    if detuning is None:
        return np.abs(amplitude * r0) ** 2
    zeta = 2 * g_sqrt_n**2 / (3 * denom)
    xi2 = 4 * g_sqrt_n**2 * 3 * kappa_r / (9 * denom**2)
    line = -1j * xi2 / (detuning - zeta.imag + 1j * (zeta.real + 0.5 * gamma))
    return np.abs(amplitude * (r0 + line)) ** 2


def simulate_cavity_data(stack: LayerStack, theta_rock, theta_spec, detuning, gamma: float) -> CavityData:
    """Parratt-generated fit input."""
    theta_spec = np.atleast_1d(np.asarray(theta_spec, float))
    detuning = np.asarray(detuning, float)
    rock = rocking_curve(stack.without_resonance(), theta_rock)
    spectra = np.abs(parratt_reflectivity(stack, theta_spec[:, None], detuning[None, :])) ** 2
    return CavityData(theta_rock, rock, theta_spec, detuning, spectra, kev_to_omega(stack.photon_energy), gamma)


def _dip_width(theta, curve, centre):
    """Half width at half depth of the dip at ``centre``, measured from the local maxima around it."""
    i0 = int(np.argmin(np.abs(theta - centre)))
    lo = i0
    while lo > 0 and curve[lo - 1] >= curve[lo]:
        lo -= 1
    hi = i0
    while hi < curve.size - 1 and curve[hi + 1] >= curve[hi]:
        hi += 1
    base = max(curve[lo], curve[hi])
    half = 0.5 * (base + curve[i0])
    left = theta[lo:i0 + 1][curve[lo:i0 + 1] <= half]
    right = theta[i0:hi + 1][curve[i0:hi + 1] <= half]
    width = 0.5 * ((right.max() if right.size else theta[i0]) - (left.min() if left.size else theta[i0]))
    return max(width, abs(theta[1] - theta[0])), base


def initial_guess(data: CavityData) -> dict:
    """Documented start point: theta0 from the deepest guided-mode minimum,
    kappa from the dip half-width, kappa_R from the dip depth, g sqrt(N)
    from the nuclear line width at theta0 minus gamma/2."""
    modes = find_mode_angles(data.theta_rock, data.rock)
    depths = np.interp(modes, data.theta_rock, data.rock)
    theta0 = float(modes[np.argmin(depths)])
    hw, base = _dip_width(data.theta_rock, data.rock, theta0)
    slope = data.omega0 * theta0 * 1e-6
    kappa = hw * slope
    depth = float(np.interp(theta0, data.theta_rock, data.rock))
    ratio = 0.5 * (1.0 - math.sqrt(max(depth, 0.0) / base))
    kappa_r = max(ratio, 0.02) * kappa

    k = int(np.argmin(np.abs(data.theta_spec - theta0)))
    spec = data.spectra[k]
    signal = np.abs(spec - np.median(spec[[0, -1]]))
    above = data.detuning[signal >= 0.5 * signal.max()]
    gamma_line = max(0.5 * (above.max() - above.min()), 0.5 * data.gamma) if above.size else data.gamma
    g2n = 1.5 * kappa * max(gamma_line - 0.5 * data.gamma, 0.05 * data.gamma)
    return {"theta0": theta0, "kappa": kappa, "kappa_r": kappa_r, "g_sqrt_n": math.sqrt(g2n), "amplitude": math.sqrt(base)}


def fit_cavity_params(data: CavityData, max_nfev: int = 2000, nuclear: bool = True, signs: tuple[int, ...] = (1, -1)) -> CavityFit:
    """Joint least-squares fit over angle and frequency, unit weights.

    Both orientations of the Delta_C(theta) map are tried and the lower
    residual kept. ``nuclear=False`` fits only the rocking curve and pins
    g sqrt(N) at zero.
    """
    p0 = initial_guess(data)
    scale = np.array([p0["theta0"], p0["kappa"], p0["kappa_r"], max(p0["g_sqrt_n"], 1e-30), p0["amplitude"]])
    th_s = data.theta_spec[:, None]
    det = data.detuning[None, :]

    def unpack(x):
        return x * scale

    best = None
    for sign in signs if nuclear else (1,):

        def residuals(x):
            th0, kap, kr, gsn, amp = unpack(x)
            if not nuclear:
                gsn = 0.0
            r1 = model_reflectivity(data.theta_rock, None, th0, kap, kr, gsn, amp, sign, data.omega0, data.gamma) - data.rock
            if not nuclear:
                return r1
            r2 = model_reflectivity(th_s, det, th0, kap, kr, gsn, amp, sign, data.omega0, data.gamma) - data.spectra
            return np.concatenate([r1, r2.ravel()])

        x0 = np.ones(5)
        if not nuclear:
            x0[3] = 0.0
        lower = np.array([0.5, 1e-3, 1e-6, 0.0, 0.1])
        upper = np.array([2.0, 1e3, 1e3, 1e3, 10.0])
        res = least_squares(residuals, x0, bounds=(lower, upper), method="trf", x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
        if best is None or res.cost < best[0].cost:
            best = (res, sign)
    res, sign = best
    if res.status <= 0:
        raise ConvergenceError(f"cavity fit did not converge: {res.message}")
    th0, kap, kr, gsn, amp = unpack(res.x)
    if not nuclear:
        gsn = 0.0
    if not (kr <= kap * (1 + 1e-9)):
        raise ConvergenceError(f"fit gave kappa_R = {kr:.3g} > kappa = {kap:.3g}")
    rms = float(np.sqrt(np.mean(res.fun**2)))
    return CavityFit(
        kappa=float(kap),
        kappa_r=float(kr),
        theta0=float(th0),
        g_sqrt_n=float(gsn),
        sign=int(sign),
        omega0=data.omega0,
        amplitude=float(amp),
        residual=rms,
        iterations=int(res.nfev),
        gamma=data.gamma,
        meta={"initial": p0, "status": int(res.status)},
    )


def reference_cavity() -> dict:
    """Bundled single-mode parameters of the Pt/C/57Fe/C/Pt reference cavity (rad/fs, mrad)."""
    from importlib import resources

    import yaml

    text = resources.files("nucinv").joinpath("data").joinpath("paper_cavity.yaml").read_text()
    return yaml.safe_load(text)


def reference_params(n_atoms: int = 100, detuning_in_kappa: float = 1.0):
    """SystemParams of the reference cavity with Delta_C = detuning_in_kappa * kappa."""
    from .dynamics import SystemParams

    ref = reference_cavity()
    return SystemParams.from_collective(
        n_atoms, ref["g_sqrt_n"], ref["gamma"], ref["kappa"], ref["kappa_r"], detuning_in_kappa * ref["kappa"]
    )
