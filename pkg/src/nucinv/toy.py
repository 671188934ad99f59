"""Single-nucleus interference toy model: impulsive drive plus free-induction decay."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .records import Spectrum


@dataclass(frozen=True)
class ToyParams:
    """E(t) = a0 delta(t) - (beta d / 2) sin(Phi) e^{i phase_shift} theta(t) e^{-gamma t / 2}, Phi = 2 d a0.

    The output intensity carries no overall normalization.
    """

    a0: float
    d: float
    beta: float
    gamma: float
    phase_shift: float = 0.0
    omega0: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")
        if not self.d > 0:
            raise ValidationError("dipole magnitude d must be positive")
        for name in ("a0", "beta", "phase_shift", "omega0"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    @property
    def area(self) -> float:
        return 2.0 * self.d * self.a0

    @property
    def scattering_amplitude(self) -> complex:
        """Coefficient s of the scattered term, E_sc(t) = s theta(t) e^{-gamma t/2}."""
        return -0.5 * self.beta * self.d * math.sin(self.area) * np.exp(1j * self.phase_shift)

    @classmethod
    def for_area(cls, phi: float, d: float = 1.0, beta: float = 1.0, gamma: float = 1.0, phase_shift: float = 0.0, omega0: float = 0.0) -> "ToyParams":
        return cls(phi / (2.0 * d), d, beta, gamma, phase_shift, omega0)


@dataclass(frozen=True)
class ToyField:
    """Field split into the analytic impulse weight and the sampled scattered part."""

    impulse: float
    time: np.ndarray
    scattered: np.ndarray


def toy_field(params: ToyParams, t) -> ToyField:
    t = np.asarray(t, dtype=float)
    sc = np.where(t >= 0, params.scattering_amplitude * np.exp(-0.5 * params.gamma * np.clip(t, 0, None)), 0.0)
    return ToyField(params.a0, t, sc.astype(complex))


def toy_amplitude(params: ToyParams, omega) -> np.ndarray:
    """E(omega) = a0 - (i/2) beta d sin(Phi) e^{i phase} / (omega - omega0 + i gamma/2)."""
    omega = np.asarray(omega, dtype=float)
    return params.a0 + 1j * params.scattering_amplitude / (omega - params.omega0 + 0.5j * params.gamma)


def toy_spectrum(params: ToyParams, omega) -> Spectrum:
    """|E(omega)|^2; ``normalized`` divides by the flat impulse spectrum a0^2."""
    omega = np.asarray(omega, dtype=float)
    amp = toy_amplitude(params, omega)
    inten = np.abs(amp) ** 2
    i_in = np.full_like(omega, params.a0**2)
    norm = inten / params.a0**2 if params.a0 != 0 else np.full_like(omega, np.nan)
    return Spectrum(omega, inten, i_in, norm, {"kind": "analytic", "model": "toy", "area": params.area}, amp)


def mirror_asymmetry(params: ToyParams, half_range: float = 50.0, points: int = 20001) -> float:
    """max |S(w0 + d) - S(w0 - d)| relative to the largest deviation of S from a0^2."""
    d = np.linspace(0.0, half_range * params.gamma, points)
    up = np.abs(toy_amplitude(params, params.omega0 + d)) ** 2
    lo = np.abs(toy_amplitude(params, params.omega0 - d)) ** 2
    dev = max(np.abs(up - params.a0**2).max(), np.abs(lo - params.a0**2).max())
    if dev == 0:
        return 0.0
    return float(np.abs(up - lo).max() / dev)


def wing_sign(params: ToyParams) -> int:
    """Sign of S - a0^2 far from resonance, from the even part of the 1/omega^2 tail.

    S - a0^2 -> (|s|^2 + a0 gamma Re s)/w^2 + odd terms; the even part's sign is
    -sign(sin Phi cos phase) whenever a0 gamma |cos phase| exceeds |s|.
    """
    if abs(math.sin(params.area)) < 1e-12:
        return 0
    s = params.scattering_amplitude
    even = abs(s) ** 2 + params.a0 * params.gamma * s.real
    return int(np.sign(even))


def toy_from_simulator(params, phi: float) -> tuple[ToyParams, float]:
    """Map an N = 1 cavity model with an impulsive drive of area ``phi`` onto the toy model.

    Returns (toy parameters, intensity scale): the simulator's normalized
    spectrum equals scale * toy normalized spectrum, with scale = |R0|^2.
    Mapping: d = |xi|, beta = 1/|R0|, a0 = phi / (2|xi|),
    phase = 2 arg(xi) - arg(R0), gamma_toy = gamma + 2 Re zeta, omega0 = Im zeta.
    """
    if params.n_atoms != 1:
        raise ValidationError("toy mapping is defined for a single nucleus")
    xi = params.xi
    r0 = params.cavity_reflection
    if abs(xi) == 0 or abs(r0) == 0:
        raise ValidationError("mapping needs non-zero coupling and empty-cavity reflection")
    toy = ToyParams(
        a0=phi / (2.0 * abs(xi)),
        d=abs(xi),
        beta=1.0 / abs(r0),
        gamma=params.gamma + 2.0 * params.zeta.real,
        phase_shift=float(2.0 * np.angle(xi) - np.angle(r0)),
        omega0=params.zeta.imag,
    )
    return toy, abs(r0) ** 2
