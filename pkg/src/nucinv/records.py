"""Spectrum container shared by the dynamics, pulse and CLI layers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Spectrum:
    """Frequency-domain result.

    ``omega`` is the detuning from the nuclear resonance in the rate unit of the
    producing calculation. ``normalized`` is NaN wherever the input spectrum is
    below the configured floor.
    """

    omega: np.ndarray
    intensity: np.ndarray
    input_intensity: np.ndarray
    normalized: np.ndarray
    meta: dict = field(default_factory=dict)
    amplitude: np.ndarray | None = None  # complex output amplitude, when available

    @property
    def mask(self) -> np.ndarray:
        return np.isfinite(self.normalized)

    def window(self, lo: float, hi: float) -> "Spectrum":
        sel = (self.omega >= lo) & (self.omega <= hi)
        return Spectrum(
            self.omega[sel],
            self.intensity[sel],
            self.input_intensity[sel],
            self.normalized[sel],
            dict(self.meta),
            None if self.amplitude is None else self.amplitude[sel],
        )
