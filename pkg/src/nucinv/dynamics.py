"""Driven, superradiantly damped Dicke ensemble inside an x-ray cavity.

The cavity mode is adiabatically eliminated; the ensemble is restricted to the
N+1 symmetric states |j, m>, j = N/2, stored in ascending m. All dynamics are
in the frame rotating at the nuclear transition frequency.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.integrate import DOP853, RK45
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError, InvariantViolation, OutOfScopeError, ValidationError
from .pulses import PulseRecord

log = logging.getLogger(__name__)

MAX_DIMENSION = 4097


@dataclass(frozen=True)
class SystemParams:
    """Quantum-optical constants. Rates share one angular-frequency unit.

    ``g`` is the coupling of the cavity mode to a single nucleus.
    """

    n_atoms: int
    gamma: float
    g: complex
    kappa: float
    kappa_r: float
    delta_c: float = 0.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValidationError(f"n_atoms must be a positive integer, got {self.n_atoms}")
        for name in ("gamma", "kappa", "kappa_r"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValidationError(f"{name} must be positive and finite, got {value}")
        if not (math.isfinite(self.delta_c) and np.isfinite(complex(self.g))):
            raise ValidationError("delta_c and g must be finite")

    @classmethod
    def from_collective(cls, n_atoms: int, g_sqrt_n: complex, gamma: float, kappa: float, kappa_r: float, delta_c: float = 0.0):
        """Build from the collective coupling g*sqrt(N), which is what spectra fix."""
        return cls(n_atoms, gamma, g_sqrt_n / math.sqrt(n_atoms), kappa, kappa_r, delta_c)

    @property
    def zeta(self) -> complex:
        """2|g|^2 / [3 (kappa + i Delta_C)]."""
        return 2.0 * abs(self.g) ** 2 / (3.0 * (self.kappa + 1j * self.delta_c))

    @property
    def xi(self) -> complex:
        """zeta * sqrt(3 kappa_R) / conj(g), written in a form finite at g = 0."""
        return 2.0 * complex(self.g) * math.sqrt(3.0 * self.kappa_r) / (3.0 * (self.kappa + 1j * self.delta_c))

    @property
    def cavity_reflection(self) -> complex:
        """Empty-cavity response 2 kappa_R / (kappa + i Delta_C) - 1."""
        return 2.0 * self.kappa_r / (self.kappa + 1j * self.delta_c) - 1.0

    @property
    def collective_rate(self) -> float:
        """N Re(zeta): superradiant amplitude decay rate at low excitation."""
        return self.n_atoms * self.zeta.real

    @property
    def lamb_shift(self) -> float:
        """Cooperative Lamb shift N Im(zeta)."""
        return self.n_atoms * self.zeta.imag

    def with_atoms(self, n_atoms: int, keep_collective: bool = True) -> "SystemParams":
        g = self.g * math.sqrt(self.n_atoms / n_atoms) if keep_collective else self.g
        return SystemParams(n_atoms, self.gamma, g, self.kappa, self.kappa_r, self.delta_c)


@dataclass
class CollectiveOperators:
    j_plus: np.ndarray
    j_minus: np.ndarray
    j_z: np.ndarray
    ladder: np.ndarray  # <m+1|J+|m> for ascending m
    m: np.ndarray

    @property
    def dim(self) -> int:
        return self.m.size

    @property
    def jpjm_diag(self) -> np.ndarray:
        """Diagonal of J+J-: j(j+1) - m(m-1)."""
        d = np.zeros(self.dim)
        d[1:] = self.ladder**2
        return d


def build_operators(n_atoms: int, max_dim: int = MAX_DIMENSION) -> CollectiveOperators:
    """Dense J+, J-, Jz on the symmetric ladder.

    Memory for the evolution scales as 16 (N+1)^2 bytes per stored matrix;
    the default cap (N <= 4096) keeps one density matrix below 270 MB.
    """
    if int(n_atoms) != n_atoms or n_atoms < 1:
        raise ValidationError(f"n_atoms must be a positive integer, got {n_atoms}")
    dim = int(n_atoms) + 1
    if dim > max_dim:
        raise ValidationError(f"dimension {dim} exceeds cap {max_dim}")
    j = n_atoms / 2.0
    m = np.arange(dim) - j
    ladder = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    j_plus = np.diag(ladder, k=-1).astype(complex)
    return CollectiveOperators(j_plus, j_plus.T.copy(), np.diag(m).astype(complex), ladder, m)


@dataclass
class DickeState:
    j: float
    rho: np.ndarray
    time: float = 0.0

    @property
    def n_atoms(self) -> int:
        return int(round(2 * self.j))

    @classmethod
    def ground(cls, n_atoms: int, time: float = 0.0) -> "DickeState":
        rho = np.zeros((n_atoms + 1, n_atoms + 1), complex)
        rho[0, 0] = 1.0
        return cls(n_atoms / 2.0, rho, time)

    @classmethod
    def excited(cls, n_atoms: int, time: float = 0.0) -> "DickeState":
        rho = np.zeros((n_atoms + 1, n_atoms + 1), complex)
        rho[-1, -1] = 1.0
        return cls(n_atoms / 2.0, rho, time)

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.rho))

    def jz(self) -> float:
        m = np.arange(self.rho.shape[0]) - self.j
        return float(np.real(np.diag(self.rho)) @ m)

    def excited_fraction(self) -> float:
        return (self.jz() + self.j) / (2 * self.j)

    def validate(self, tol: float = 1e-8) -> None:
        check_density_matrix(self.rho, tol, self.time)


def check_density_matrix(rho: np.ndarray, tol: float = 1e-8, time: float | None = None) -> None:
    """Raise InvariantViolation unless rho is Hermitian, unit-trace and PSD within ``tol``."""
    where = "" if time is None else f" at t={time:.6g}"
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise InvariantViolation(f"trace drifted to {tr:.12g}{where}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > tol:
        raise InvariantViolation(f"Hermiticity error {herm:.3e}{where}")
    try:
        np.linalg.cholesky(rho + tol * np.eye(rho.shape[0]))
    except np.linalg.LinAlgError:
        lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
        raise InvariantViolation(f"smallest eigenvalue {lam:.3e}{where}") from None


def hamiltonian(params: SystemParams, ops: CollectiveOperators, a_in: complex) -> np.ndarray:
    """xi a_in J+ + h.c. + Im(zeta) J+J-."""
    a_in = complex(a_in)
    if not np.isfinite(a_in):
        raise ValidationError("drive amplitude must be finite")
    omega = params.xi * a_in
    return omega * ops.j_plus + np.conj(omega) * ops.j_minus + params.zeta.imag * np.diag(ops.jpjm_diag)


def lindblad_superradiant(params: SystemParams, ops: CollectiveOperators, rho: np.ndarray) -> np.ndarray:
    """-Re(zeta) (J+J- rho - J- rho J+ + h.c.)."""
    jpjm = ops.j_plus @ ops.j_minus
    term = jpjm @ rho - ops.j_minus @ rho @ ops.j_plus
    return -params.zeta.real * (term + term.conj().T)


def lindblad_spontaneous_n1(gamma: float, rho: np.ndarray) -> np.ndarray:
    """Single-nucleus decay at rate gamma; only the N = 1 ladder is modelled."""
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise OutOfScopeError("single-particle spontaneous decay is out of modelled scope for N > 1")
    s_minus = np.array([[0, 1], [0, 0]], complex)
    s_plus = s_minus.T
    term = s_plus @ s_minus @ rho - s_minus @ rho @ s_plus
    return -0.5 * gamma * (term + term.conj().T)


def apply_delta_pulse(state: DickeState, phi: float, phase: float = 0.0) -> DickeState:
    """Exact rotation U = exp(-i (phi/2)(e^{i phase} J+ + e^{-i phase} J-))."""
    ops = build_operators(state.n_atoms)
    gen = np.exp(1j * phase) * ops.j_plus + np.exp(-1j * phase) * ops.j_minus
    w, v = np.linalg.eigh(gen)
    u = (v * np.exp(-0.5j * phi * w)) @ v.conj().T
    return DickeState(state.j, u @ state.rho @ u.conj().T, state.time)


_METHODS = {"RK45": RK45, "DOP853": DOP853}


@dataclass
class IntegratorConfig:
    """Adaptive Runge-Kutta settings (Dormand-Prince 8(5,3) by default). Tail quantities are in units of 1/(N Re zeta)."""

    rtol: float = 1e-10
    atol: float = 1e-12
    tail_dt: float = 0.01
    tail_tolerance: float = 1e-6
    min_tail: float = 2.0
    max_tail: float = 400.0
    invariant_tol: float = 1e-8
    check_invariants: bool = True
    spontaneous: bool | None = None  # None: include gamma iff N == 1
    store_rho: bool = False
    pulse_max_step: float = 4.0  # in pulse samples
    tail_max_step: float = 8.0  # in tail samples; bounds the dense-output error between steps
    method: str = "DOP853"  # or "RK45"

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValidationError(f"unknown integrator {self.method!r}; choose from {sorted(_METHODS)}")

    def include_spontaneous(self, n_atoms: int) -> bool:
        if self.spontaneous is None:
            return n_atoms == 1
        if self.spontaneous and n_atoms > 1:
            raise OutOfScopeError("single-particle spontaneous decay is out of modelled scope for N > 1")
        return self.spontaneous


@dataclass
class OutputRecord:
    """Sampled observables on the pulse grid followed by a uniform decay tail.

    a_out = [2 kappa_R/(kappa + i Delta_C) - 1] a_in - i xi <J->, pointwise.
    """

    time_grid: np.ndarray
    a_in: np.ndarray
    a_out: np.ndarray
    j_minus_expect: np.ndarray
    jz_expect: np.ndarray
    emission_intensity: np.ndarray
    n_pulse_samples: int
    pulse_dt: float
    tail_dt: float
    params: SystemParams
    final_state: DickeState
    rho: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def pulse_end(self) -> float:
        return float(self.time_grid[self.n_pulse_samples - 1])


TINY = 1e-250


@numba.njit(cache=True)
def _rhs_kernel(r, diag, jump, c, om, driven):
    n = r.shape[0]
    out = diag * r
    for k in range(n - 1):
        for l in range(n - 1):
            out[k, l] += jump[k, l] * r[k + 1, l + 1]
    if driven:
        # -i [om J+ + conj(om) J-, rho]
        t1 = -1j * om
        t2 = -1j * np.conj(om)
        for k in range(1, n):
            f = t1 * c[k - 1]
            for l in range(n):
                out[k, l] += f * r[k - 1, l]
        for k in range(n - 1):
            f = t2 * c[k]
            for l in range(n):
                out[k, l] += f * r[k + 1, l]
        for k in range(n):
            for l in range(n - 1):
                out[k, l] -= t1 * c[l] * r[k, l + 1]
            for l in range(1, n):
                out[k, l] -= t2 * c[l - 1] * r[k, l - 1]
    # Weak drives leave the high Dicke levels at ~eps^(k+l); flushing those to
    # zero keeps the solver out of subnormal arithmetic, which is ~100x slower.
    for k in range(n):
        for l in range(n):
            v = out[k, l]
            if abs(v.real) < TINY and abs(v.imag) < TINY:
                out[k, l] = 0j
    return out


class _Liouvillian:
    """O(dim^2) right-hand side exploiting the bidiagonal ladder structure."""

    def __init__(self, params: SystemParams, ops: CollectiveOperators, time_unit: float, spontaneous: bool):
        d = ops.jpjm_diag
        self.n = ops.dim
        self.c = ops.ladder.copy()
        decay = params.zeta.real * time_unit
        if spontaneous:
            decay += 0.5 * params.gamma * time_unit
        shift = params.zeta.imag * time_unit
        self.diag = -1j * shift * (d[:, None] - d[None, :]) - decay * (d[:, None] + d[None, :])
        self.jump = 2.0 * decay * np.outer(self.c, self.c)
        self.drive = None

    def __call__(self, s, y):
        r = y.reshape(self.n, self.n)
        if self.drive is None:
            out = _rhs_kernel(r, self.diag, self.jump, self.c, 0j, False)
        else:
            out = _rhs_kernel(r, self.diag, self.jump, self.c, complex(self.drive(s)), True)
        return out.ravel()


def _observables(rho: np.ndarray, ops: CollectiveOperators) -> tuple[complex, float, float]:
    diag = np.real(np.diagonal(rho))
    jm = complex(np.sum(ops.ladder * np.diagonal(rho, offset=-1)))
    return jm, float(diag @ ops.m), float(diag @ ops.jpjm_diag)


def evolve(
    params: SystemParams,
    state: DickeState,
    pulse: PulseRecord,
    config: IntegratorConfig | None = None,
) -> OutputRecord:
    """Integrate the master equation through the pulse and its decay tail.

    Time is rescaled internally to 1/(N Re zeta). The drive is a cubic-spline
    interpolant of the pulse samples. The tail runs until |<J->| has fallen
    below ``tail_tolerance`` of its maximum with less than half the ensemble
    excited. Invariants are checked at every accepted step; violations abort.
    """
    config = config or IntegratorConfig()
    n = params.n_atoms
    if state.n_atoms != n or state.rho.shape != (n + 1, n + 1):
        raise ValidationError("state dimension does not match params.n_atoms")
    if params.zeta.real <= 0:
        raise ValidationError("evolution needs a non-zero coupling (Re zeta > 0)")
    if config.check_invariants:
        check_density_matrix(state.rho, config.invariant_tol, state.time)
    ops = build_operators(n)
    unit = 1.0 / params.collective_rate
    rhs = _Liouvillian(params, ops, unit, config.include_spontaneous(n))

    t_pulse = pulse.time_grid
    s_pulse = t_pulse / unit
    ds = pulse.dt / unit
    drive_samples = params.xi * pulse.amplitude * unit
    spline = CubicSpline(s_pulse, drive_samples)
    rhs.drive = spline

    dim = n + 1
    times: list[np.ndarray] = []
    samples: list[np.ndarray] = []
    stored: list[np.ndarray] = []
    steps = 0

    last = {}

    def record(s_points, rho_points):
        last["rho"] = rho_points[-1]
        times.append(s_points)
        jm = np.einsum("k,nk->n", ops.ladder, np.diagonal(rho_points, offset=-1, axis1=1, axis2=2))
        diag = np.real(np.diagonal(rho_points, axis1=1, axis2=2))
        samples.append(np.stack([jm, diag @ ops.m + 0j, diag @ ops.jpjm_diag + 0j], axis=1))
        if config.store_rho:
            stored.append(rho_points.copy())

    # Phase 1: through the pulse, hitting every pulse sample.
    y0 = np.ascontiguousarray(state.rho, dtype=complex).ravel()
    record(s_pulse[:1], y0.reshape(1, dim, dim))
    solver = _METHODS[config.method](rhs, s_pulse[0], y0, s_pulse[-1], max_step=config.pulse_max_step * ds, first_step=ds / 4, rtol=config.rtol, atol=config.atol)
    idx = 1
    while solver.status == "running":
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            raise ConvergenceError(f"integrator failed during pulse: {msg}")
        if config.check_invariants:
            check_density_matrix(solver.y.reshape(dim, dim), config.invariant_tol, solver.t * unit)
        hi = np.searchsorted(s_pulse, solver.t, side="right")
        if hi > idx:
            dense = solver.dense_output()
            pts = s_pulse[idx:hi]
            vals = np.array([dense(p) for p in pts]).reshape(-1, dim, dim)
            if hi == s_pulse.size:
                vals[-1] = solver.y.reshape(dim, dim)
            record(pts, vals)
            idx = hi
    if idx < s_pulse.size:
        raise ConvergenceError("pulse window was not fully integrated")

    # Phase 2: free decay on a uniform tail grid.
    rhs.drive = None
    h = config.tail_dt
    s0 = s_pulse[-1]
    y = solver.y.copy()
    jm_max = max(float(np.abs(b[:, 0]).max()) for b in samples)
    tail = _METHODS[config.method](rhs, s0, y, s0 + config.max_tail, first_step=min(h, 1e-3), max_step=config.tail_max_step * h, rtol=config.rtol, atol=config.atol)
    k = 1
    s_stop = None
    while tail.status == "running":
        msg = tail.step()
        steps += 1
        if tail.status == "failed":
            raise ConvergenceError(f"integrator failed in decay tail: {msg}")
        rho_now = tail.y.reshape(dim, dim)
        if config.check_invariants:
            check_density_matrix(rho_now, config.invariant_tol, tail.t * unit)
        k_hi = int(math.floor((tail.t - s0) / h + 1e-9))
        if k_hi >= k:
            dense = tail.dense_output()
            pts = s0 + h * np.arange(k, k_hi + 1)
            vals = np.array([dense(p) for p in pts]).reshape(-1, dim, dim)
            record(pts, vals)
            k = k_hi + 1
        jm_now, jz_now, _ = _observables(rho_now, ops)
        jm_max = max(jm_max, abs(jm_now))
        frac = (jz_now + n / 2) / n
        if (
            tail.t - s0 >= config.min_tail
            and frac < 0.5
            and abs(jm_now) <= config.tail_tolerance * jm_max
            and k > 1
        ):
            s_stop = s0 + h * (k - 1)
            break
    if s_stop is None:
        raise ConvergenceError(
            f"coherence did not decay below {config.tail_tolerance:g} of its peak within {config.max_tail} collective lifetimes"
        )

    s_all = np.concatenate(times)
    obs = np.concatenate(samples)
    t_all = s_all * unit
    a_in = np.zeros(t_all.size, complex)
    a_in[: t_pulse.size] = pulse.amplitude
    jm = obs[:, 0]
    a_out = params.cavity_reflection * a_in - 1j * params.xi * jm
    final = DickeState(state.j, last["rho"].copy(), s_stop * unit)
    return OutputRecord(
        time_grid=t_all,
        a_in=a_in,
        a_out=a_out,
        j_minus_expect=jm,
        jz_expect=obs[:, 1].real,
        emission_intensity=obs[:, 2].real,
        n_pulse_samples=t_pulse.size,
        pulse_dt=pulse.dt,
        tail_dt=h * unit,
        params=params,
        final_state=final,
        rho=np.concatenate(stored) if config.store_rho else None,
        meta={"steps": steps, "time_unit": unit, "tail_length": (s_stop - s0)},
    )
