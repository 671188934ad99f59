from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nucinv.cavity import reference_params
from nucinv.dynamics import (
    DickeState,
    IntegratorConfig,
    SystemParams,
    apply_delta_pulse,
    build_operators,
    check_density_matrix,
    evolve,
    hamiltonian,
    lindblad_spontaneous_n1,
    lindblad_superradiant,
)
from nucinv.errors import InvariantViolation, OutOfScopeError, ValidationError
from nucinv.pulses import gaussian_pulse_for_area
from oracles import two_level_oracle


# ---------------------------------------------------------------------------
# Parameters and operators


def test_zeta_xi_definitions():
    p = SystemParams(3, 1e-8, 2e-6 + 1e-6j, 4e-3, 1.5e-3, 2e-3)
    zeta = 2 * abs(p.g) ** 2 / (3 * (p.kappa + 1j * p.delta_c))
    assert p.zeta == pytest.approx(zeta, rel=1e-14)
    assert p.xi == pytest.approx(zeta * math.sqrt(3 * p.kappa_r) / np.conj(p.g), rel=1e-13)
    assert p.cavity_reflection == pytest.approx(2 * p.kappa_r / (p.kappa + 1j * p.delta_c) - 1, rel=1e-14)


@given(kappa=st.floats(1e-6, 1.0), delta=st.floats(-10.0, 10.0), g=st.floats(1e-9, 1e-3))
def test_re_zeta_positive(kappa, delta, g):
    p = SystemParams(1, 1e-9, g, kappa, 0.5 * kappa, delta * kappa)
    assert p.zeta.real > 0


@pytest.mark.parametrize("bad", [dict(n_atoms=0), dict(gamma=0.0), dict(kappa=-1.0), dict(kappa_r=0.0), dict(n_atoms=2.5)])
def test_params_reject_invalid(bad):
    base = dict(n_atoms=2, gamma=1e-9, g=1e-6, kappa=1e-3, kappa_r=5e-4)
    base.update(bad)
    with pytest.raises(ValidationError):
        SystemParams(**base)


def test_collective_constructor_keeps_g_sqrt_n():
    p = SystemParams.from_collective(50, 3e-5, 1e-9, 5e-3, 2e-3, 5e-3)
    assert abs(p.g) * math.sqrt(50) == pytest.approx(3e-5)
    q = p.with_atoms(100)
    assert q.collective_rate == pytest.approx(p.collective_rate, rel=1e-13)


@given(st.integers(1, 60))
def test_operator_algebra(n):
    ops = build_operators(n)
    j = n / 2
    for k in range(n):
        m = -j + k
        assert ops.j_plus[k + 1, k] == pytest.approx(math.sqrt(j * (j + 1) - m * (m + 1)), abs=1e-12)
    assert np.array_equal(ops.j_minus, ops.j_plus.conj().T)
    comm = ops.j_plus @ ops.j_minus - ops.j_minus @ ops.j_plus
    np.testing.assert_allclose(comm, 2 * ops.j_z, atol=1e-10 * max(1, n))
    np.testing.assert_allclose(ops.j_z @ ops.j_plus - ops.j_plus @ ops.j_z, ops.j_plus, atol=1e-12 * max(1, n))
    np.testing.assert_allclose(ops.j_z @ ops.j_minus - ops.j_minus @ ops.j_z, -ops.j_minus, atol=1e-12 * max(1, n))
    np.testing.assert_allclose(np.diag(ops.j_plus @ ops.j_minus).real, ops.jpjm_diag, atol=1e-10 * max(1, n))


def test_operator_cap():
    with pytest.raises(ValidationError):
        build_operators(0)
    with pytest.raises(ValidationError):
        build_operators(4097)
    with pytest.raises(ValidationError):
        build_operators(20, max_dim=10)


def test_density_matrix_checks():
    rho = DickeState.ground(3).rho
    check_density_matrix(rho)
    with pytest.raises(InvariantViolation):
        check_density_matrix(1.1 * rho)
    bad = rho.copy()
    bad[0, 1] = 0.1
    with pytest.raises(InvariantViolation):
        check_density_matrix(bad)
    neg = np.diag([1.2, -0.2, 0, 0]).astype(complex)
    with pytest.raises(InvariantViolation):
        check_density_matrix(neg)


# ---------------------------------------------------------------------------
# Delta pulses


@pytest.mark.parametrize("n", [1, 10, 100])
@pytest.mark.parametrize("phi", [0.3, math.pi, 2.7 * math.pi])
def test_rabi_law(n, phi):
    s = apply_delta_pulse(DickeState.ground(n), phi)
    assert s.jz() == pytest.approx(-(n / 2) * math.cos(phi), abs=1e-10 * max(1, n))
    assert s.excited_fraction() == pytest.approx(math.sin(phi / 2) ** 2, abs=1e-10)


@given(n=st.integers(1, 40), phi=st.floats(0.0, 6 * math.pi), phase=st.floats(-math.pi, math.pi))
def test_rabi_law_property(n, phi, phase):
    s = apply_delta_pulse(DickeState.ground(n), phi, phase)
    assert s.excited_fraction() == pytest.approx(math.sin(phi / 2) ** 2, abs=1e-10)
    s.validate()


# ---------------------------------------------------------------------------
# Master equation


def test_liouvillian_matches_dense_form(ref1):
    p = reference_params(4)
    ops = build_operators(4)
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    from nucinv.dynamics import _Liouvillian

    L = _Liouvillian(p, ops, 1.0, False)
    L.drive = lambda s: p.xi * 0.3
    h = hamiltonian(p, ops, 0.3)
    dense = -1j * (h @ rho - rho @ h) + lindblad_superradiant(p, ops, rho)
    np.testing.assert_allclose(L(0.0, rho.ravel()).reshape(5, 5), dense, rtol=1e-10, atol=1e-20)


def test_spontaneous_decay_out_of_scope():
    with pytest.raises(OutOfScopeError):
        lindblad_spontaneous_n1(1.0, np.eye(3) / 3)
    with pytest.raises(OutOfScopeError):
        IntegratorConfig(spontaneous=True).include_spontaneous(5)


def test_single_nucleus_matches_two_level_oracle(ref1):
    sigma_t = 100.0
    phi = 2.3 * math.pi
    pulse = gaussian_pulse_for_area(phi, ref1.xi, sigma_t)
    out = evolve(ref1, DickeState.ground(1), pulse, IntegratorConfig(store_rho=True))
    oracle = two_level_oracle(ref1, sigma_t, phi, out.time_grid)
    assert oracle.shape == out.rho.shape
    assert np.abs(out.rho - oracle).max() < 1e-8


def test_output_relation_and_invariants(ref100):
    pulse = gaussian_pulse_for_area(0.7 * math.pi, ref100.xi, 100.0)
    out = evolve(ref100, DickeState.ground(100), pulse, IntegratorConfig(store_rho=True))
    expected = ref100.cavity_reflection * out.a_in - 1j * ref100.xi * out.j_minus_expect
    np.testing.assert_allclose(out.a_out, expected, rtol=0, atol=1e-15)
    for rho in out.rho[:: max(1, out.rho.shape[0] // 50)]:
        check_density_matrix(rho, 1e-8)
    assert out.final_state.excited_fraction() < 0.5


def test_short_gaussian_matches_delta_pulse(ref100):
    sigma_t = 100.0
    assert sigma_t * ref100.collective_rate < 1e-3
    for phi in (0.4 * math.pi, 1.3 * math.pi):
        pulse = gaussian_pulse_for_area(phi, ref100.xi, sigma_t)
        out = evolve(ref100, DickeState.ground(100), pulse)
        jz_end = out.jz_expect[out.n_pulse_samples - 1]
        jz_delta = -50 * math.cos(phi)
        assert abs(jz_end - jz_delta) <= 1e-3 * abs(jz_delta)


def test_superradiant_burst(ref100):
    def peak_after_pulse(phi):
        out = evolve(ref100, DickeState.ground(100), gaussian_pulse_for_area(phi, ref100.xi, 100.0))
        tail = out.emission_intensity[out.n_pulse_samples - 1 :]
        return int(np.argmax(tail)) > 0, tail

    delayed, _ = peak_after_pulse(0.75 * math.pi)
    assert delayed
    delayed, tail = peak_after_pulse(0.25 * math.pi)
    assert not delayed
    assert np.all(np.diff(tail) <= 1e-12 * tail[0])


def test_integrator_rejects_unknown_method():
    with pytest.raises(ValidationError):
        IntegratorConfig(method="Euler")


def test_state_dimension_mismatch(ref100):
    with pytest.raises(ValidationError):
        evolve(ref100, DickeState.ground(3), gaussian_pulse_for_area(0.1, ref100.xi, 100.0))
