"""Truncated-Hilbert-space density-matrix engine for emitter-cavity systems.

Builds Jaynes-Cummings / Tavis-Cummings open systems, evolves them under the
Lindblad master equation, finds steady states and computes expectation values
and two-time photon correlations.

Unit convention
---------------
Every user-facing rate, frequency or detuning is an ordinary frequency
nu = omega / 2pi in GHz.  Internally the Hamiltonian and collapse rates are
angular (rad/ns) and time is in ns; since GHz * ns = 1 the conversion is a
single factor of 2pi applied once, in :func:`build_system`.  ``kappa`` and the
emitter linewidth are FWHM energy-decay rates; pure dephasing contributes to
the total emitter linewidth as gamma_rad + 2 * gamma_deph.

The tensor-product ordering is cavity (n_max + 1 levels) first, then one
factor of dimension 2 per emitter with index 0 = ground, 1 = excited.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConfigurationError,
    DegenerateSteadyStateError,
    DimensionMismatchError,
    SolverError,
    StiffnessError,
    UndefinedCorrelationError,
)

TWO_PI = 2.0 * np.pi

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
_EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class HilbertConfig:
    """Cavity truncation and emitter count defining the Hilbert space."""

    n_max: int
    n_emitters: int = 1
    dim_cap: int = 4096

    def __post_init__(self):
        if self.n_max < 1:
            raise ConfigurationError(f"n_max must be >= 1, got {self.n_max}")
        if self.n_emitters < 1:
            raise ConfigurationError(
                f"n_emitters must be >= 1, got {self.n_emitters}")
        if self.dim > self.dim_cap:
            raise ConfigurationError(
                f"Hilbert dimension {self.dim} exceeds cap {self.dim_cap}")

    @property
    def dim(self) -> int:
        return (self.n_max + 1) * 2 ** self.n_emitters


@dataclass(frozen=True)
class SystemParams:
    """Physical rates and detunings, all ordinary frequencies in GHz.

    Detunings are signed offsets (nu_x - nu_reference) in the rotating frame
    anchored at the probe/drive frequency.  The total emitter FWHM linewidth
    is derived, never stored: gamma_total = gamma_rad + 2 * gamma_deph.
    """

    g: float
    kappa: float
    kappa_wg_fraction: float = 1.0
    gamma_rad: float = 0.0
    gamma_deph: float = 0.0
    delta_c: float = 0.0
    delta_a: float = 0.0
    omega_drive: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa", "gamma_rad", "gamma_deph"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if not 0.0 <= self.kappa_wg_fraction <= 1.0:
            raise ConfigurationError("kappa_wg_fraction must lie in [0, 1]")

    @property
    def gamma_total(self) -> float:
        """Total emitter FWHM linewidth in GHz."""
        return self.gamma_rad + 2.0 * self.gamma_deph

    @property
    def kappa_wg(self) -> float:
        """Waveguide-coupled part of the cavity decay rate in GHz."""
        return self.kappa_wg_fraction * self.kappa

    @property
    def kappa_loss(self) -> float:
        """Intrinsic (non-waveguide) part of the cavity decay rate in GHz."""
        return (1.0 - self.kappa_wg_fraction) * self.kappa


def _kron_chain(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _cavity_destroy(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def annihilator(config: HilbertConfig) -> np.ndarray:
    """Cavity annihilation operator on the full space."""
    return _kron_chain([_cavity_destroy(config.n_max)]
                       + [_I2] * config.n_emitters)


def number_op(config: HilbertConfig) -> np.ndarray:
    a = annihilator(config)
    return a.conj().T @ a


def _emitter_op(config: HilbertConfig, op: np.ndarray, k: int) -> np.ndarray:
    if not 0 <= k < config.n_emitters:
        raise ConfigurationError(f"emitter index {k} out of range")
    mats = [np.eye(config.n_max + 1, dtype=complex)]
    mats += [op if j == k else _I2 for j in range(config.n_emitters)]
    return _kron_chain(mats)


def sigma_minus(config: HilbertConfig, k: int = 0) -> np.ndarray:
    """Lowering operator of emitter ``k`` on the full space."""
    return _emitter_op(config, _SIGMA_MINUS, k)


def sigma_z(config: HilbertConfig, k: int = 0) -> np.ndarray:
    return _emitter_op(config, _SIGMA_Z, k)


def excited_projector(config: HilbertConfig, k: int = 0) -> np.ndarray:
    """sigma^+ sigma^- of emitter ``k`` on the full space."""
    return _emitter_op(config, _EXCITED, k)


@dataclass(frozen=True)
class LindbladSystem:
    """Assembled Hamiltonian and collapse operators, angular units (rad/ns)."""

    dim: int
    hamiltonian: np.ndarray
    collapse_ops: tuple  # of (operator matrix, rate in rad/ns)
    config: HilbertConfig
    params: SystemParams

    def __post_init__(self):
        h = self.hamiltonian
        if h.shape != (self.dim, self.dim):
            raise DimensionMismatchError("Hamiltonian shape does not match dim")
        scale = max(np.linalg.norm(h), 1.0)
        if np.linalg.norm(h - h.conj().T) > 1e-12 * scale:
            raise ConfigurationError("Hamiltonian is not Hermitian")
        for op, rate in self.collapse_ops:
            if op.shape != (self.dim, self.dim):
                raise DimensionMismatchError("collapse operator shape mismatch")
            if rate < 0:
                raise ConfigurationError("collapse rates must be >= 0")


@dataclass(frozen=True)
class DensityMatrix:
    """Dense density matrix; entries are read-only after construction."""

    dim: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.entries.shape != (self.dim, self.dim):
            raise DimensionMismatchError("entries shape does not match dim")
        arr = np.array(self.entries, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    def validate(self, trace_tol: float = 1e-9, herm_tol: float = 1e-9,
                 eig_floor: float = -1e-9) -> "DensityMatrix":
        """Check trace, Hermiticity and positivity; returns self on success."""
        r = self.entries
        if abs(np.trace(r) - 1.0) > trace_tol:
            raise ConfigurationError(
                f"trace deviates from 1 by {abs(np.trace(r) - 1.0):.3e}")
        if np.max(np.abs(r - r.conj().T)) > herm_tol:
            raise ConfigurationError("density matrix is not Hermitian")
        w = np.linalg.eigvalsh((r + r.conj().T) / 2.0)
        if w.min() < eig_floor:
            raise ConfigurationError(
                f"negative eigenvalue {w.min():.3e} below floor {eig_floor:.1e}")
        return self


def density_matrix(entries: np.ndarray) -> DensityMatrix:
    entries = np.asarray(entries, dtype=complex)
    return DensityMatrix(dim=entries.shape[0], entries=entries)


def ground_state(config: HilbertConfig) -> DensityMatrix:
    """Cavity vacuum, all emitters in the ground state."""
    r = np.zeros((config.dim, config.dim), dtype=complex)
    r[0, 0] = 1.0
    return DensityMatrix(config.dim, r)


def basis_state(config: HilbertConfig, n_photons: int,
                excited: Sequence[int] = ()) -> DensityMatrix:
    """Product Fock state |n_photons> x |emitters>, given excited indices."""
    if not 0 <= n_photons <= config.n_max:
        raise ConfigurationError("photon number outside truncation")
    vecs = [np.zeros(config.n_max + 1, dtype=complex)]
    vecs[0][n_photons] = 1.0
    for k in range(config.n_emitters):
        e = np.zeros(2, dtype=complex)
        e[1 if k in excited else 0] = 1.0
        vecs.append(e)
    psi = vecs[0]
    for v in vecs[1:]:
        psi = np.kron(psi, v)
    return DensityMatrix(config.dim, np.outer(psi, psi.conj()))


def emitter_excited(config: HilbertConfig, k: int = 0) -> DensityMatrix:
    """Cavity vacuum with emitter ``k`` excited (decay initial condition)."""
    return basis_state(config, 0, excited=(k,))


def build_system(config: HilbertConfig, params: SystemParams) -> LindbladSystem:
    """Assemble the rotating-frame Hamiltonian and collapse operators.

    H/hbar = 2pi [ delta_c a^dag a + sum_i delta_a s+_i s-_i
                   + g sum_i (a^dag s-_i + a s+_i)
                   + (omega_drive/2)(a^dag + a) ]          (rad/ns)

    Collapse channels: a at 2pi*kappa, s-_i at 2pi*gamma_rad and sz_i at
    2pi*gamma_deph/2 per emitter; zero-rate channels are dropped.
    """
    a = annihilator(config)
    ad = a.conj().T
    h = params.delta_c * (ad @ a)
    h = h + (params.omega_drive / 2.0) * (ad + a)
    for k in range(config.n_emitters):
        sm = sigma_minus(config, k)
        h = h + params.delta_a * excited_projector(config, k)
        h = h + params.g * (ad @ sm + a @ sm.conj().T)
    h = TWO_PI * h

    collapse = []
    if params.kappa > 0:
        collapse.append((a, TWO_PI * params.kappa))
    for k in range(config.n_emitters):
        if params.gamma_rad > 0:
            collapse.append((sigma_minus(config, k), TWO_PI * params.gamma_rad))
        if params.gamma_deph > 0:
            collapse.append((sigma_z(config, k), TWO_PI * params.gamma_deph / 2.0))

    return LindbladSystem(dim=config.dim, hamiltonian=h,
                          collapse_ops=tuple(collapse),
                          config=config, params=params)


def _lindblad_rhs_matrix(system: LindbladSystem, rho: np.ndarray) -> np.ndarray:
    out = -1j * (system.hamiltonian @ rho - rho @ system.hamiltonian)
    for op, rate in system.collapse_ops:
        od = op.conj().T
        odo = od @ op
        out = out + rate * (op @ rho @ od
                            - 0.5 * (odo @ rho + rho @ odo))
    return out


def lindblad_derivative(system: LindbladSystem,
                        rho: DensityMatrix | np.ndarray) -> np.ndarray:
    """d(rho)/dt under the system's Lindblad generator (rad/ns time units)."""
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if mat.shape != (system.dim, system.dim):
        raise DimensionMismatchError("state shape does not match system")
    return _lindblad_rhs_matrix(system, mat)


def _integrate(system: LindbladSystem, rho0: np.ndarray,
               sample_times: np.ndarray, rtol: float, atol: float):
    """Adaptive RK integration of the master equation; raw matrices out."""
    dim = system.dim
    h = system.hamiltonian
    pre = [(op, op.conj().T, rate * 0.5 * (op.conj().T @ op), rate)
           for op, rate in system.collapse_ops]

    def rhs(_t, y):
        rho = y.reshape(dim, dim)
        out = -1j * (h @ rho - rho @ h)
        for op, od, half_odo, rate in pre:
            out += rate * (op @ rho @ od)
            out -= half_odo @ rho + rho @ half_odo
        return out.reshape(-1)

    t_final = float(sample_times[-1])
    if t_final == 0.0:
        return [(0.0, rho0.copy())]
    sol = solve_ivp(rhs, (0.0, t_final), rho0.reshape(-1), method="DOP853",
                    t_eval=sample_times, rtol=rtol, atol=atol)
    if not sol.success:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise StiffnessError(reached, sol.message)
    return [(float(t), sol.y[:, i].reshape(dim, dim))
            for i, t in enumerate(sol.t)]


def evolve(system: LindbladSystem, rho0: DensityMatrix, t_final: float,
           sample_times: Sequence[float] | None = None,
           rtol: float = 1e-8, atol: float = 1e-10):
    """Evolve ``rho0`` to ``t_final`` ns, sampling at ``sample_times``.

    Returns a list of (t, DensityMatrix).  Each sampled state is checked
    against the density-matrix invariants at 1e-7 tolerance.
    """
    if t_final <= 0:
        raise ConfigurationError("t_final must be > 0")
    if rho0.dim != system.dim:
        raise DimensionMismatchError("initial state does not match system")
    if sample_times is None:
        ts = np.linspace(0.0, t_final, 201)
    else:
        ts = np.asarray(sample_times, dtype=float)
        if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) <= 0):
            raise ConfigurationError("sample times must be strictly increasing")
        if ts[0] < 0 or ts[-1] > t_final * (1 + 1e-12):
            raise ConfigurationError("sample times must lie in [0, t_final]")
    raw = _integrate(system, rho0.entries, ts, rtol, atol)
    return [(t, DensityMatrix(system.dim, m).validate(1e-7, 1e-7, -1e-7))
            for t, m in raw]


def liouvillian(system: LindbladSystem) -> np.ndarray:
    """Dense generator acting on row-major vectorized density matrices."""
    d = system.dim
    eye = np.eye(d, dtype=complex)
    h = system.hamiltonian
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in system.collapse_ops:
        odo = op.conj().T @ op
        sup += rate * (np.kron(op, op.conj())
                       - 0.5 * (np.kron(odo, eye) + np.kron(eye, odo.T)))
    return sup


def steady_state(system: LindbladSystem) -> DensityMatrix:
    """Solve L(rho) = 0 with trace(rho) = 1 via the vectorized Liouvillian.

    The nullspace is taken from the singular-value decomposition, which also
    certifies uniqueness: a nullspace of dimension > 1 (e.g. a decoupled
    undamped subsystem) raises DegenerateSteadyStateError instead of silently
    returning one of many fixed points.  Residual requirement:
    ||L rho_ss|| < 1e-9 ||L||_F.
    """
    if not system.collapse_ops:
        raise ConfigurationError("steady state requires a dissipative system")
    d = system.dim
    sup = liouvillian(system)
    _u, svals, vh = np.linalg.svd(sup)
    nullity = int(np.sum(svals < svals[0] * 1e-10))
    if nullity > 1:
        raise DegenerateSteadyStateError(
            f"Liouvillian nullspace dimension {nullity}: steady state not unique")

    vec = vh[-1].conj()  # right singular vector of the smallest singular value
    trace = complex(np.trace(vec.reshape(d, d)))
    if abs(trace) < 1e-12:
        raise SolverError("null vector has vanishing trace")
    vec = vec / trace

    residual = np.linalg.norm(sup @ vec)
    if residual > 1e-9 * np.linalg.norm(sup):
        raise SolverError(
            f"steady-state residual {residual:.3e} exceeds tolerance")

    rho = vec.reshape(d, d)
    rho = (rho + rho.conj().T) / 2.0
    rho = rho / np.trace(rho).real
    return DensityMatrix(d, rho).validate(1e-9, 1e-9, -1e-9)


def expectation(op: np.ndarray, rho: DensityMatrix) -> complex:
    """trace(op . rho); imaginary part < 1e-10 for Hermitian observables."""
    if op.shape != (rho.dim, rho.dim):
        raise DimensionMismatchError("operator shape does not match state")
    return complex(np.trace(op @ rho.entries))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) ||rho - sigma||_1."""
    if rho.dim != sigma.dim:
        raise DimensionMismatchError("states differ in dimension")
    diff = rho.entries - sigma.entries
    return 0.5 * float(np.sum(np.linalg.svd(diff, compute_uv=False)))


def g2_correlation(system: LindbladSystem, tau_grid: Sequence[float],
                   rtol: float = 1e-8, atol: float = 1e-10):
    """Normalized second-order photon correlation of the cavity field.

    g2(tau) = <a^dag(0) a^dag(tau) a(tau) a(0)> / <a^dag a>^2, computed by
    propagating the collapsed steady state a rho_ss a^dag under the same
    generator (quantum regression).  Requires a driven dissipative system
    with steady photon number above 1e-12.
    """
    taus = np.asarray(tau_grid, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or np.any(np.diff(taus) <= 0):
        raise ConfigurationError("tau grid must be strictly increasing")
    if taus[0] < 0:
        raise ConfigurationError("tau grid must be nonnegative")

    rho_ss = steady_state(system)
    a = annihilator(system.config)
    n_op = a.conj().T @ a
    nbar = expectation(n_op, rho_ss).real
    if nbar < 1e-12:
        raise UndefinedCorrelationError(
            f"steady-state photon number {nbar:.3e} below 1e-12")

    seed = a @ rho_ss.entries @ a.conj().T / nbar  # unit-trace conditional state
    if taus[0] == 0.0 and taus.size == 1:
        propagated = [(0.0, seed)]
    else:
        ts = taus if taus[0] == 0.0 else np.concatenate(([0.0], taus))
        propagated = _integrate(system, seed, ts, rtol, atol)
        if taus[0] != 0.0:
            propagated = propagated[1:]
    return [(t, float(np.trace(n_op @ m).real / nbar))
            for t, m in propagated]
