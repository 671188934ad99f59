from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nucinv.errors import ValidationError
from nucinv.requirements import (
    PI_32_OVER_8,
    BeamParams,
    IsotopeData,
    PhotonBudget,
    coherence_volume_nuclei,
    conversion_scaled_coupling,
    effective_sigma_t,
    evaluate_candidate,
    excitation_volume,
    load_beams,
    load_isotopes,
    materials_for,
    min_photons,
    optimize_cavity,
    photon_curve,
    rescale_coupling,
)
from nucinv.units import FWHM_TO_SIGMA


def test_min_photons_reference_point():
    assert min_photons(1.0, 1.0, 5.0, 5.0) == pytest.approx(math.pi**1.5 / 8, rel=1e-12, abs=0)
    assert abs(min_photons(2.0, 0.25, 7.0, 7.0) - PI_32_OVER_8) < 1e-12


@given(x=st.floats(1e-12, 1e-3), s=st.floats(1.0, 1e5), ratio=st.floats(1e-3, 1e3))
def test_min_photons_saturates_condition(x, s, ratio):
    n = min_photons(x, s, 1.0, ratio)
    assert 8 * n * x**2 * s * math.pi**-1.5 / ratio == pytest.approx(1.0, rel=1e-12)


def test_min_photons_rejects_nonpositive():
    with pytest.raises(ValidationError):
        min_photons(0.0, 1.0, 1.0, 1.0)


def test_effective_sigma_limits():
    # bandwidth-limited for short pulses, divergence-limited for long ones
    assert effective_sigma_t(10.0, 21.9, 3.0, 1e-6) == pytest.approx(10.0, rel=1e-9)
    spread = 21.9 * 3e-3 * 1e-3
    assert effective_sigma_t(1e12, 21.9, 3.0, 1.0) == pytest.approx(1 / spread, rel=1e-9)


def _budget(theta_b=1.1, omega0=21.9):
    beam = BeamParams.from_divergence(49.5, theta_b, 100.0)
    s_eff = effective_sigma_t(beam.sigma_t, omega0, 2.8, theta_b)
    return PhotonBudget("X", 0.0, "Pt", 2.0, 20.0, 2.8, 3.9, beam, 1e7, 1e9, s_eff, 1e-9,
                        min_photons(1e-9, s_eff, 1e9, 1e7), meta={"omega0": omega0})


def test_plateau_in_divergence_limited_regime():
    b = _budget()
    long = np.array([b.at_duration(t) for t in (1e6, 1e7, 1e8)])
    np.testing.assert_allclose(long / long[-1], 1.0, rtol=2e-3)
    short = np.array([b.at_duration(t) for t in (1.0, 2.0)])
    # bandwidth-limited: N_Ph proportional to 1/t_FWHM
    assert short[0] / short[1] == pytest.approx(2.0, rel=1e-3)
    # monotone non-increasing in pulse length
    curve = photon_curve(b, np.geomspace(1, 1e8, 60))[0.0]
    assert np.all(np.diff(curve) <= 1e-12 * curve[:-1])


@given(a=st.floats(0.0, 1e4), b=st.floats(0.0, 1e4))
def test_alpha_scaling(a, b):
    base = _budget().with_alpha(a, alpha_ref=0.0)
    other = base.with_alpha(b)
    assert other.n_ph_min / base.n_ph_min == pytest.approx((1 + b) / (1 + a), rel=1e-10)


def test_alpha_scaled_coupling():
    assert conversion_scaled_coupling(3.0, 8.0) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        conversion_scaled_coupling(1.0, -0.1)


def test_rescale_coupling_keeps_collective_coupling():
    g = rescale_coupling(50, 2.0, 100)
    assert g * math.sqrt(50) == pytest.approx(2.0 * math.sqrt(100))


def test_volume_conventions():
    beam = BeamParams.from_divergence(49.5, 1.1, 100.0)
    v_t, n_t = excitation_volume(beam, 2.8, 1.5, 80.0, "table")
    v_s, n_s = excitation_volume(beam, 2.8, 1.5, 80.0, "si")
    assert n_s / n_t == pytest.approx(1e6)
    assert v_t == pytest.approx(45.0**2 * 1.5 / math.sin(2.8e-3))
    with pytest.raises(ValidationError):
        excitation_volume(beam, 2.8, 1.5, 80.0, "cgs")


def test_coherence_volume():
    iso = IsotopeData("X", 14.4, 141.0, (0.0,), 80.0, 20.0)
    assert coherence_volume_nuclei(iso, 1.0) == pytest.approx(math.pi / 4 * 2e4**2 * 80.0)


def test_beam_validation():
    with pytest.raises(ValidationError):
        BeamParams(10.0, 1.0, 100.0, 49.5)
    beam = BeamParams.from_divergence(49.5, 1.1, 100.0)
    assert beam.d_b == pytest.approx(45.0)
    assert beam.sigma_t == pytest.approx(100.0 / FWHM_TO_SIGMA)


def test_bundled_data_loads():
    iso = load_isotopes()
    assert {"57Fe", "193Pt", "119Sn", "169Tm", "187Os"} <= set(iso)
    assert iso["193Pt"].alpha[:3] == (3.5, 2200.0, 3120.0)
    assert set(load_beams()) == set(iso)
    assert {"Pt", "C", "57Fe"} <= set(materials_for("57Fe"))


def test_single_candidate_passthrough():
    iso = load_isotopes()["57Fe"]
    mats = materials_for("57Fe")
    phase = load_beams()["57Fe"]
    single = evaluate_candidate(iso, mats, "Pt", 2.6, 18.7, phase, 100.0)
    res = optimize_cavity(iso, ["Pt"], [2.6], [18.7], phase, 100.0, materials=mats)
    assert res.best.n_ph_min == single.n_ph_min
    assert len(res.ranked) == 1 and not res.skipped
    assert single.theta0 < single.theta1
    # theta_B is the spacing of the rocking-curve minima; theta0 itself is the fitted value
    assert single.beam.theta_b == pytest.approx(single.theta1 - single.theta0, rel=0.02)
    assert single.fit.kappa_r <= single.fit.kappa


def test_missing_material_is_skipped_with_warning(caplog):
    iso = load_isotopes()["57Fe"]
    mats = materials_for("57Fe")
    with caplog.at_level(logging.WARNING):
        res = optimize_cavity(iso, ["Pt", "Unobtainium"], [2.6], [18.7], load_beams()["57Fe"], 100.0, materials=mats)
    assert len(res.ranked) == 1
    assert res.skipped and "Unobtainium" in res.skipped[0][1]
    assert "skipping" in caplog.text


def test_no_feasible_candidate_raises():
    iso = load_isotopes()["57Fe"]
    with pytest.raises(ValidationError):
        optimize_cavity(iso, ["Unobtainium"], [2.6], [18.7], 49.5, 100.0, materials=materials_for("57Fe"))
