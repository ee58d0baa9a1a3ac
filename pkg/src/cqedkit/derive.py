"""Closed-form cavity-QED figures of merit with first-order error propagation.

All propagated uncertainties are linearized 1-sigma values assuming
uncorrelated inputs.  Rates and frequencies are ordinary frequencies
(nu = omega/2pi); wavelengths in nm, lifetimes in ns unless noted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import (
    ConfigurationError,
    NoEnhancementError,
    NoEnhancementWarning,
    UnsupportedRegimeError,
)

SPEED_OF_LIGHT_M_PER_S = 299792458.0


@dataclass(frozen=True)
class Measured:
    """A value with 1-sigma uncertainty and a unit label."""

    value: float
    sigma: float = 0.0
    unit: str = ""

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigurationError("sigma must be >= 0")

    def __str__(self):
        if self.sigma:
            return f"{self.value:g} +/- {self.sigma:g} {self.unit}".rstrip()
        return f"{self.value:g} {self.unit}".rstrip()


@dataclass(frozen=True)
class EmitterRecord:
    """Measured lifetimes and intensity ratio of one emitter-cavity system."""

    tau_on: Measured   # ns
    tau_off: Measured  # ns
    intensity_ratio: float  # I_on / I_off, measured input only
    id: str = ""

    def __post_init__(self):
        if self.tau_on.value <= 0 or self.tau_off.value <= 0:
            raise ConfigurationError("lifetimes must be > 0")


@dataclass(frozen=True)
class CavityRecord:
    """Optical-cavity figures: wavelength, Q, normalized mode volume."""

    lambda_c: float          # nm
    q_factor: float
    mode_volume_norm: float  # in (lambda/n)^3
    refractive_index: float = 2.402

    def __post_init__(self):
        for name in ("lambda_c", "q_factor", "mode_volume_norm", "refractive_index"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0")


@dataclass(frozen=True)
class SiVSpec:
    """Color-center line structure: four optical transitions A-D."""

    transition_freqs: tuple[float, float, float, float]  # GHz
    ground_splitting: float = 0.0                        # GHz
    branching_xi_max: float = 1.0
    linewidths: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.transition_freqs) != 4 or len(self.linewidths) != 4:
            raise ConfigurationError("four transition lines (A-D) are required")
        if not 0.0 < self.branching_xi_max <= 1.0:
            raise ConfigurationError("branching_xi_max must lie in (0, 1]")
        if self.ground_splitting < 0:
            raise ConfigurationError("ground_splitting must be >= 0")


def beta_factor(tau_on: Measured, tau_off: Measured) -> Measured:
    """Fraction of decay into the cavity mode: beta = 1 - tau_on/tau_off.

    A negative result (tau_on > tau_off) is returned but flagged with
    NoEnhancementWarning.
    """
    if tau_on.value <= 0 or tau_off.value <= 0:
        raise ConfigurationError("lifetimes must be > 0")
    ratio = tau_on.value / tau_off.value
    sigma = ratio * math.hypot(tau_on.sigma / tau_on.value,
                               tau_off.sigma / tau_off.value)
    beta = 1.0 - ratio
    if beta < 0:
        warnings.warn("tau_on exceeds tau_off: no enhancement",
                      NoEnhancementWarning, stacklevel=2)
    return Measured(beta, sigma, "")


def lifetime_ratio(tau_on: Measured, tau_off: Measured) -> Measured:
    """tau_off / tau_on with propagated uncertainty."""
    if tau_on.value <= 0 or tau_off.value <= 0:
        raise ConfigurationError("lifetimes must be > 0")
    r = tau_off.value / tau_on.value
    sigma = r * math.hypot(tau_on.sigma / tau_on.value,
                           tau_off.sigma / tau_off.value)
    return Measured(r, sigma, "")


def cooperativity(g: Measured, kappa: Measured, gamma: Measured) -> Measured:
    """C = 4 g^2 / (kappa gamma), unit-free under common rescaling."""
    if kappa.value <= 0 or gamma.value <= 0 or g.value < 0:
        raise ConfigurationError("g >= 0 and kappa, gamma > 0 required")
    c = 4.0 * g.value ** 2 / (kappa.value * gamma.value)
    dg = 8.0 * g.value / (kappa.value * gamma.value) * g.sigma
    dk = c / kappa.value * kappa.sigma
    dgam = c / gamma.value * gamma.sigma
    return Measured(c, math.sqrt(dg * dg + dk * dk + dgam * dgam), "")


def min_purcell(lifetime_ratio: Measured, xi_max: float) -> Measured:
    """Lower bound on the Purcell factor from the lifetime-reduction ratio.

    F_min = (tau_off/tau_on - 1) / xi_max where xi_max is the upper bound on
    the off-resonance branching ratio into the enhanced line.
    """
    if not 0.0 < xi_max <= 1.0:
        raise ConfigurationError("xi_max must lie in (0, 1]")
    if lifetime_ratio.value < 1.0:
        raise NoEnhancementError(
            f"lifetime ratio {lifetime_ratio.value:g} < 1: no enhancement")
    f = (lifetime_ratio.value - 1.0) / xi_max
    return Measured(f, lifetime_ratio.sigma / xi_max, "")


def theoretical_purcell(cav: CavityRecord) -> float:
    """Ideal resonant Purcell factor F = (3/4pi^2) Q / V_norm."""
    return 3.0 / (4.0 * math.pi ** 2) * cav.q_factor / cav.mode_volume_norm


def purcell_lorentzian(f0: float, detuning: float, kappa: float) -> float:
    """Purcell factor vs cavity detuning: F = f0 / (1 + (2 delta/kappa)^2)."""
    if kappa <= 0:
        raise ConfigurationError("kappa must be > 0")
    return f0 / (1.0 + (2.0 * detuning / kappa) ** 2)


def fourier_limited_linewidth(tau_ns: float) -> float:
    """Fourier-transform-limited FWHM (MHz) of a lifetime tau (ns)."""
    if tau_ns <= 0:
        raise ConfigurationError("tau must be > 0")
    return 1e3 / (2.0 * math.pi * tau_ns)


def q_kappa_convert(value: Measured, lambda_nm: float, direction: str) -> Measured:
    """Convert between quality factor and FWHM decay rate kappa (GHz).

    Q = f / kappa with f = c / lambda.  ``direction`` is "to_q" (input kappa)
    or "to_kappa" (input Q).  No default wavelength: bare and tuned cavities
    sit at different resonances.
    """
    if value.value <= 0 or lambda_nm <= 0:
        raise ConfigurationError("value and wavelength must be > 0")
    f_ghz = SPEED_OF_LIGHT_M_PER_S / lambda_nm  # (m/s)/nm = GHz exactly
    if direction == "to_q":
        out_unit = ""
    elif direction == "to_kappa":
        out_unit = "GHz"
    else:
        raise ConfigurationError(f"unknown direction {direction!r}")
    out = f_ghz / value.value
    sigma = f_ghz * value.sigma / value.value ** 2
    return Measured(out, sigma, out_unit)


def emission_rate_into_cavity(beta: float, tau_on_ns: float) -> float:
    """Single-photon emission rate (beta/tau_on)/2pi in GHz."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError("beta must lie in [0, 1]")
    if tau_on_ns <= 0:
        raise ConfigurationError("tau_on must be > 0")
    return beta / tau_on_ns / (2.0 * math.pi)


def strong_coupling_threshold(g: float, kappa: float,
                              gamma: float) -> tuple[bool, int]:
    """Collective strong-coupling onset with N identical emitters.

    The coupled eigenfrequencies split once g_eff = g sqrt(N) exceeds
    (kappa - gamma)/4; returns (reached at N = 1, smallest such N).
    """
    if g <= 0 or kappa <= 0 or gamma <= 0:
        raise ConfigurationError("g, kappa, gamma must be > 0")
    if kappa <= gamma:
        raise UnsupportedRegimeError(
            "criterion assumes kappa > gamma (cavity-dominated losses)")
    threshold = (kappa - gamma) / 4.0
    n_needed = math.floor((threshold / g) ** 2) + 1
    return g > threshold, n_needed
