"""Coherent output spectra, the weak-excitation closed form, and symmetry-flip detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import OutputRecord, SystemParams
from .errors import ValidationError
from .records import Spectrum

DEFAULT_FLOOR = 1e-6


def collective_halfwidth(params: SystemParams, spontaneous: bool | None = None) -> float:
    """Half-width of the weak-excitation nuclear line."""
    if spontaneous is None:
        spontaneous = params.n_atoms == 1
    return params.collective_rate + (0.5 * params.gamma if spontaneous else 0.0)


def _dtft(samples: np.ndarray, t: np.ndarray, omega: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Trapezoidal integral of samples(t) e^{i omega t} on a uniform grid."""
    dt = t[1] - t[0]
    w = np.full(t.size, dt)
    w[0] = w[-1] = 0.5 * dt
    ws = w * samples
    out = np.empty(omega.size, complex)
    for i in range(0, omega.size, chunk):
        om = omega[i : i + chunk]
        out[i : i + chunk] = np.exp(1j * np.outer(om, t)) @ ws
    return out


def coherent_spectrum(
    output: OutputRecord,
    params: SystemParams | None = None,
    pad_factor: int = 8,
    floor: float = DEFAULT_FLOOR,
    half_window: float = 40.0,
    n_fft: int | None = None,
) -> Spectrum:
    """|<a_out(omega)>|^2, |a_in(omega)|^2 and their ratio.

    The coherent-emission tail is transformed with a zero-padded FFT; the
    short pulse segment and the input field are transformed by direct
    quadrature onto the same frequencies, so the pulse never has to be
    resampled onto the coarse tail grid. ``half_window`` is in collective
    half-widths around the resonance. The ratio is NaN where I_in is below
    ``floor`` times its maximum. ``n_fft`` fixes the transform length so that
    runs with different tail lengths share one frequency grid.
    """
    params = params or output.params
    if pad_factor < 1:
        raise ValidationError("pad_factor must be >= 1")
    n_p = output.n_pulse_samples
    t_p = output.time_grid[:n_p]
    t_tail = output.time_grid[n_p - 1 :]
    jm_tail = output.j_minus_expect[n_p - 1 :]
    h = output.tail_dt

    m = int(2 ** math.ceil(math.log2(pad_factor * t_tail.size)))
    if n_fft is not None:
        if n_fft < t_tail.size:
            raise ValidationError(f"n_fft = {n_fft} is shorter than the decay tail ({t_tail.size} samples)")
        m = int(n_fft)
    omega_all = 2 * np.pi * np.fft.fftfreq(m, h)
    width = collective_halfwidth(params)
    sel = np.abs(omega_all) <= half_window * width
    omega = omega_all[sel]
    weights = jm_tail.copy()
    weights[0] *= 0.5
    weights[-1] *= 0.5
    tail_ft = h * m * np.fft.ifft(weights, m)[sel] * np.exp(1j * omega * t_tail[0])

    order = np.argsort(omega)
    omega = omega[order]
    tail_ft = tail_ft[order]
    jm_ft = tail_ft + _dtft(output.j_minus_expect[:n_p], t_p, omega)
    ain_ft = _dtft(output.a_in[:n_p], t_p, omega)
    aout_ft = params.cavity_reflection * ain_ft - 1j * params.xi * jm_ft

    i_coh = np.abs(aout_ft) ** 2
    i_in = np.abs(ain_ft) ** 2
    peak = i_in.max() if i_in.size else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = np.where((i_in > floor * peak) & (peak > 0), i_coh / i_in, np.nan)
    meta = {
        "floor": floor,
        "halfwidth": width,
        "lamb_shift": params.lamb_shift,
        "background": abs(params.cavity_reflection) ** 2,
        "kind": "simulated",
    }
    return Spectrum(omega, i_coh, i_in, norm, meta, aout_ft)


def linear_response_amplitude(params: SystemParams, omega: np.ndarray, spontaneous: bool | None = None) -> np.ndarray:
    """a_out / a_in in the weak-excitation limit.

    With <J_z> pinned at -N/2 the coherence obeys
    d<J->/dt = -(Gamma + i N Im zeta) <J-> - i N xi a_in, Gamma = N Re zeta (+ gamma/2),
    so  a_out/a_in = R0 - i N xi^2 / (omega - N Im zeta + i Gamma).
    See docs/linear_response.md for the derivation.
    """
    omega = np.asarray(omega, dtype=float)
    width = collective_halfwidth(params, spontaneous)
    nxi2 = params.n_atoms * params.xi**2
    return params.cavity_reflection - 1j * nxi2 / (omega - params.lamb_shift + 1j * width)


def linear_response_spectrum(
    params: SystemParams,
    omega: np.ndarray,
    input_intensity: np.ndarray | None = None,
    spontaneous: bool | None = None,
    floor: float = DEFAULT_FLOOR,
) -> Spectrum:
    """Closed-form weak-excitation spectrum; ``input_intensity`` defaults to 1."""
    omega = np.asarray(omega, dtype=float)
    amp = linear_response_amplitude(params, omega, spontaneous)
    ratio = np.abs(amp) ** 2
    i_in = np.ones_like(omega) if input_intensity is None else np.asarray(input_intensity, float)
    peak = i_in.max() if i_in.size else 0.0
    norm = np.where(i_in > floor * peak, ratio, np.nan)
    meta = {
        "floor": floor,
        "halfwidth": collective_halfwidth(params, spontaneous),
        "lamb_shift": params.lamb_shift,
        "background": abs(params.cavity_reflection) ** 2,
        "kind": "analytic",
    }
    return Spectrum(omega, ratio * i_in, i_in, norm, meta, amp * np.sqrt(i_in))


def fit_line(spectrum: Spectrum, params: SystemParams, spontaneous: bool | None = None) -> dict:
    """Least-squares fit of the weak-excitation line shape with free centre and width.

    Returns centre, half-width, the complex line strength and the residual.
    """
    from scipy.optimize import least_squares

    ok = spectrum.mask
    om = spectrum.omega[ok]
    data = spectrum.normalized[ok]
    r0 = params.cavity_reflection
    strength0 = params.n_atoms * params.xi**2
    scale = collective_halfwidth(params, spontaneous)

    def model(p):
        centre, width, sr, si = p
        return np.abs(r0 - 1j * (sr + 1j * si) * scale / (om / scale - centre + 1j * width) / scale) ** 2

    p0 = [params.lamb_shift / scale, 1.0, strength0.real / scale, strength0.imag / scale]
    res = least_squares(lambda p: model(p) - data, p0, method="lm", xtol=1e-14, ftol=1e-14)
    centre, width, sr, si = res.x
    return {
        "centre": centre * scale,
        "halfwidth": width * scale,
        "strength": (sr + 1j * si) * scale,
        "residual": float(np.sqrt(np.mean(res.fun**2))),
    }


def asymmetry_weight(delta: np.ndarray, halfwidth: float) -> np.ndarray:
    """Odd sigmoid, ~0 inside the line core and saturated beyond 5 half-widths."""
    x = np.asarray(delta) / (2.5 * halfwidth)
    return np.tanh(x**3)


@dataclass
class SymmetryResult:
    asymmetry: float
    classification: str  # "positive", "negative" or "indeterminate"
    centre: float
    halfwidth: float

    @property
    def sign(self) -> int:
        return {"positive": 1, "negative": -1}.get(self.classification, 0)


def _raw_asymmetry(omega, values, centre, halfwidth, half_range):
    ok = np.isfinite(values)
    if ok.sum() < 8:
        return math.nan
    om, val = omega[ok], values[ok]
    reach = min(om.max() - centre, centre - om.min(), half_range * halfwidth)
    if reach <= 5 * halfwidth:
        raise ValidationError("spectrum does not extend 5 half-widths either side of the line centre")
    delta = np.linspace(0.0, reach, 4001)
    upper = np.interp(centre + delta, om, val)
    lower = np.interp(centre - delta, om, val)
    w = asymmetry_weight(delta, halfwidth)
    return float(np.trapezoid(w * (upper - lower), delta) / np.trapezoid(w, delta))


def reference_orientation(params: SystemParams, spontaneous: bool | None = None, half_range: float = 40.0) -> float:
    """Sign factor making the weak-excitation spectrum's asymmetry negative."""
    width = collective_halfwidth(params, spontaneous)
    omega = params.lamb_shift + width * np.linspace(-half_range - 1, half_range + 1, 8001)
    values = np.abs(linear_response_amplitude(params, omega, spontaneous)) ** 2
    raw = _raw_asymmetry(omega, values, params.lamb_shift, width, half_range)
    if raw == 0 or not math.isfinite(raw):
        return 1.0
    return -math.copysign(1.0, raw)


def detect_symmetry(
    spectrum: Spectrum,
    centre: float,
    halfwidth: float,
    orientation: float = 1.0,
    threshold: float = 2e-3,
    half_range: float = 40.0,
) -> SymmetryResult:
    """Signed wing asymmetry A of a normalized spectrum about ``centre``.

    A = orientation * <w(d) [S(c + d) - S(c - d)]>_w over 0 <= d <= half_range
    half-widths, with w from ``asymmetry_weight``. Masked points are skipped.
    |A| below ``threshold`` (normalized-intensity units) is "indeterminate".
    """
    raw = _raw_asymmetry(spectrum.omega, spectrum.normalized, centre, halfwidth, half_range)
    if not math.isfinite(raw):
        return SymmetryResult(math.nan, "indeterminate", centre, halfwidth)
    a = orientation * raw
    if abs(a) < threshold:
        label = "indeterminate"
    else:
        label = "positive" if a > 0 else "negative"
    return SymmetryResult(a, label, centre, halfwidth)


def classify_sweep(values: list[float], results: list[SymmetryResult]) -> list[tuple[float, float]]:
    """Intervals (v_i, v_j) between consecutive determinate points whose signs differ."""
    if len(values) != len(results):
        raise ValidationError("values and results differ in length")
    flips = []
    prev = None
    for v, r in zip(values, results):
        if r.sign == 0:
            continue
        if prev is not None and prev[1] != r.sign:
            flips.append((prev[0], v))
        prev = (v, r.sign)
    return flips


def count_extrema(spectrum: Spectrum, centre: float, halfwidth: float, half_range: float = 10.0, rel_prominence: float = 1e-3) -> int:
    """Number of local extrema of the normalized spectrum within +-half_range half-widths."""
    from scipy.signal import find_peaks

    sel = spectrum.mask & (np.abs(spectrum.omega - centre) <= half_range * halfwidth)
    y = spectrum.normalized[sel]
    if y.size < 3:
        return 0
    prom = rel_prominence * max(np.ptp(y), 1e-300)
    peaks, _ = find_peaks(y, prominence=prom)
    dips, _ = find_peaks(-y, prominence=prom)
    return int(peaks.size + dips.size)
