"""Time-domain decay simulation and lifetime semantics.

Produces excited-state decay traces on/off resonance from the master
equation, connects fitted rates to the bad-cavity analytic limit
gamma_rad + 4 g^2/kappa, and synthesizes photon-counting traces for
fit-recovery studies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import fitcore, qdyn
from .errors import ConfigurationError, RegimeWarning
from .qdyn import HilbertConfig, SystemParams

TRACE_KINDS = ("population", "counts")


@dataclass(frozen=True)
class DecayTrace:
    """Uniformly binned decay curve, either population or photon counts."""

    t0: float
    dt: float
    values: np.ndarray
    kind: str = "population"

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be > 0")
        if self.kind not in TRACE_KINDS:
            raise ConfigurationError(f"unknown trace kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ConfigurationError("values must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("trace values must be finite")
        if np.any(values < 0):
            raise ConfigurationError("trace values must be >= 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)


def simulate_decay(config: HilbertConfig, params: SystemParams,
                   t_final: float, dt: float,
                   rtol: float = 1e-10, atol: float = 1e-13) -> DecayTrace:
    """Excited-state population vs time from |e, vacuum> with no drive.

    Tolerances default tighter than the engine's: decay traces span many
    cavity lifetimes and accumulated absolute error must stay below the
    state-validity floor.  Solver wobble below 1e-9 is clamped to zero so
    the trace satisfies the nonnegativity invariant.
    """
    if params.omega_drive != 0.0:
        raise ConfigurationError("decay simulation requires omega_drive = 0")
    if dt <= 0 or t_final <= 0 or t_final < dt:
        raise ConfigurationError("need 0 < dt <= t_final")
    n_samples = int(np.floor(t_final / dt + 1e-9)) + 1
    ts = dt * np.arange(n_samples)
    system = qdyn.build_system(config, params)
    rho0 = qdyn.emitter_excited(config, 0)
    proj = qdyn.excited_projector(config, 0)
    samples = qdyn.evolve(system, rho0, float(ts[-1]) if ts[-1] > 0 else dt,
                          ts, rtol=rtol, atol=atol)
    pops = np.array([qdyn.expectation(proj, rho).real for _, rho in samples])
    if pops.min() < -1e-9:
        raise ConfigurationError(
            f"population went negative ({pops.min():.3e}); tighten tolerances")
    return DecayTrace(t0=0.0, dt=dt, values=np.clip(pops, 0.0, None),
                      kind="population")


def effective_rate_bad_cavity(params: SystemParams) -> float:
    """Adiabatic-elimination decay rate (GHz, ordinary frequency).

    Gamma/2pi = gamma_rad + (4 g^2/kappa) / (1 + (2 delta/kappa)^2) with
    delta = delta_a - delta_c.  Warns when kappa < 10 g, outside the
    bad-cavity validity range.
    """
    if params.kappa <= 0:
        raise ConfigurationError("kappa must be > 0")
    if params.kappa < 10.0 * params.g:
        warnings.warn("kappa < 10 g: outside the bad-cavity regime",
                      RegimeWarning, stacklevel=2)
    detuning = params.delta_a - params.delta_c
    lorentz = 1.0 / (1.0 + (2.0 * detuning / params.kappa) ** 2)
    return params.gamma_rad + 4.0 * params.g ** 2 / params.kappa * lorentz


def cavity_loading_time(kappa: float) -> float:
    """Initial-transient span 2/(2pi kappa) ns excluded from lifetime fits."""
    if kappa <= 0:
        raise ConfigurationError("kappa must be > 0")
    return 2.0 / (2.0 * np.pi * kappa)


def fit_decay_lifetime(trace: DecayTrace,
                       skip_initial_ns: float = 0.0) -> fitcore.FitResult:
    """Single-exponential lifetime fit, skipping the early cavity transient.

    Fits value = amplitude * exp(-t/tau) on samples with t >= t0 +
    skip_initial_ns; counts traces are weighted by sqrt(counts).
    """
    times = trace.times
    mask = times >= trace.t0 + skip_initial_ns - 1e-12
    t_fit = times[mask]
    y_fit = trace.values[mask]
    positive = y_fit > 0
    if positive.sum() < 4:
        raise ConfigurationError("too few nonzero samples to fit a lifetime")

    # log-linear regression on the positive samples seeds the fit
    slope, intercept = np.polyfit(t_fit[positive], np.log(y_fit[positive]), 1)
    tau0 = -1.0 / slope if slope < 0 else (t_fit[-1] - t_fit[0])
    amp0 = float(np.exp(intercept))
    model = fitcore.FitModel(
        kind="exp_decay",
        fixed_params={"t0": 0.0, "offset": 0.0},
        free_params=[
            fitcore.FreeParam("tau", max(tau0, trace.dt / 10.0), (0.0, None)),
            fitcore.FreeParam("amplitude", max(amp0, 1e-12), (0.0, None)),
        ],
    )
    sigma = np.sqrt(np.clip(y_fit, 1.0, None)) if trace.kind == "counts" else None
    return fitcore.lm_fit(model, t_fit, y_fit, sigma_y=sigma)


def counts_trace(trace: DecayTrace, peak_counts: float,
                 rng: np.random.Generator) -> DecayTrace:
    """Scale a population trace to ``peak_counts`` and apply Poisson noise."""
    if peak_counts <= 0:
        raise ConfigurationError("peak_counts must be > 0")
    if trace.values.max() <= 0:
        raise ConfigurationError("trace has no signal to scale")
    expected = trace.values / trace.values.max() * peak_counts
    noisy = rng.poisson(expected).astype(float)
    return DecayTrace(t0=trace.t0, dt=trace.dt, values=noisy, kind="counts")
