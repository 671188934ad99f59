"""Physical constants and unit conversions.

Library time unit is the femtosecond; rates are angular frequencies in rad/fs.
"""

from __future__ import annotations

import math

HBAR_EV_FS = 0.6582119569  # eV * fs
HC_KEV_NM = 1.23984198  # keV * nm

FWHM_TO_SIGMA = 2.35  # value used for the published photon budgets
FWHM_TO_SIGMA_EXACT = 2.0 * math.sqrt(2.0 * math.log(2.0))

NS = 1.0e6  # fs per ns


def ev_to_rate(energy_ev: float) -> float:
    """Energy (eV) -> angular frequency (rad/fs)."""
    return energy_ev / HBAR_EV_FS


def rate_to_ev(rate: float) -> float:
    return rate * HBAR_EV_FS


def neV_to_rate(energy_nev: float) -> float:
    return ev_to_rate(energy_nev * 1e-9)


def lifetime_ns_to_gamma(lifetime_ns: float) -> float:
    """Lifetime 1/gamma in ns -> gamma in rad/fs."""
    return 1.0 / (lifetime_ns * NS)


def kev_to_omega(energy_kev: float) -> float:
    return ev_to_rate(energy_kev * 1e3)


def wavelength_nm(energy_kev: float) -> float:
    return HC_KEV_NM / energy_kev


def fwhm_to_sigma(t_fwhm: float, exact: bool = False) -> float:
    return t_fwhm / (FWHM_TO_SIGMA_EXACT if exact else FWHM_TO_SIGMA)
