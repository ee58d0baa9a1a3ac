"""Frequency-domain models: cavity transmission with and without a coupled
emitter (dipole-induced transparency) and the cavity-tuning PL intensity map.

Probe grids are caller-supplied and never resampled.  The transmission
follows the drop-filter convention: a bare waveguide-loaded cavity suppresses
transmission at resonance, and a resonant emitter restores a narrow
transparency peak.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import qdyn
from .derive import SPEED_OF_LIGHT_M_PER_S, SiVSpec, purcell_lorentzian
from .errors import ConfigurationError
from .qdyn import HilbertConfig, SystemParams

AXIS_KINDS = ("freq_ghz", "wavelength_nm")
NONNEGATIVE_VALUE_KINDS = ("transmission", "intensity", "counts")


@dataclass(frozen=True)
class SpectrumSeries:
    """Sampled spectrum: monotone axis, same-length values, label metadata."""

    axis: np.ndarray
    values: np.ndarray
    axis_kind: str
    value_kind: str
    meta: dict

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if axis.ndim != 1 or axis.size == 0 or axis.shape != values.shape:
            raise ConfigurationError("axis and values must match and be nonempty")
        d = np.diff(axis)
        if axis.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigurationError("axis must be strictly monotone")
        if self.axis_kind not in AXIS_KINDS:
            raise ConfigurationError(f"unknown axis kind {self.axis_kind!r}")
        if self.value_kind in NONNEGATIVE_VALUE_KINDS and np.any(values < 0):
            raise ConfigurationError(
                f"{self.value_kind} values must be >= 0")
        if not (np.all(np.isfinite(axis)) and np.all(np.isfinite(values))):
            raise ConfigurationError("axis and values must be finite")
        axis.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "values", values)


def transmission_amplitude(nu, nu_c: float, nu_a: float, g: float,
                           kappa: float, gamma: float,
                           kappa_wg_fraction: float = 1.0):
    """Complex transmission t(nu) of the waveguide-coupled cavity + emitter.

    t = (i(nu_c - nu) + kappa_loss/2 + S) / (i(nu_c - nu) + kappa/2 + S)
    with S = g^2 / (i(nu_a - nu) + gamma/2) and kappa_loss the non-waveguide
    part of kappa.  gamma is the total emitter FWHM linewidth.
    """
    if kappa <= 0:
        raise ConfigurationError("kappa must be > 0")
    nu = np.asarray(nu, dtype=float)
    kappa_loss = (1.0 - kappa_wg_fraction) * kappa
    base = 1j * (nu_c - nu)
    if g == 0.0:
        coupling = np.zeros_like(base)
    else:
        pole = 1j * (nu_a - nu) + gamma / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            coupling = np.where(pole == 0, np.inf, g ** 2 / np.where(
                pole == 0, 1.0, pole))
    denom = base + kappa / 2.0 + coupling
    numer = base + kappa_loss / 2.0 + coupling
    with np.errstate(invalid="ignore"):
        t = np.where(np.isinf(coupling), 1.0, numer / denom)
    return t


def dit_transmission(params: SystemParams, probe_grid: Sequence[float]) -> SpectrumSeries:
    """Transmission spectrum |t(nu)|^2 over a monotone probe grid (GHz).

    The cavity sits at params.delta_c and the emitter at params.delta_a in
    the common rotating frame of the grid.
    """
    grid = np.asarray(probe_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("probe grid must be strictly increasing")
    t = transmission_amplitude(grid, params.delta_c, params.delta_a,
                               params.g, params.kappa, params.gamma_total,
                               params.kappa_wg_fraction)
    values = np.abs(t) ** 2
    meta = {
        "model": "dit",
        "g_ghz": f"{params.g:.12g}",
        "kappa_ghz": f"{params.kappa:.12g}",
        "gamma_ghz": f"{params.gamma_total:.12g}",
        "kappa_wg_fraction": f"{params.kappa_wg_fraction:.12g}",
    }
    return SpectrumSeries(grid, values, "freq_ghz", "transmission", meta)


def bare_cavity_transmission(params: SystemParams,
                             probe_grid: Sequence[float]) -> SpectrumSeries:
    """g -> 0 limit of dit_transmission: single Lorentzian suppression dip."""
    series = dit_transmission(replace(params, g=0.0), probe_grid)
    series.meta["model"] = "bare_cavity"
    return series


def me_transmission(params: SystemParams, probe_grid: Sequence[float],
                    n_max: int = 2, drive: float | None = None) -> np.ndarray:
    """Master-equation transmission via weak-drive steady states.

    Independent route to the analytic spectrum: for each probe frequency the
    system is driven coherently at rate ``drive`` (default kappa/1000), the
    steady state solved, and t = 1 - i kappa_wg <a>/drive read off the
    input-output relation.  Returns |t|^2 on the grid.
    """
    grid = np.asarray(probe_grid, dtype=float)
    if drive is None:
        drive = params.kappa * 1e-3
    if drive <= 0:
        raise ConfigurationError("drive must be > 0")
    config = HilbertConfig(n_max=n_max, n_emitters=1)
    a = qdyn.annihilator(config)
    out = np.empty(grid.shape, dtype=float)
    for i, nu in enumerate(grid):
        shifted = replace(params, delta_c=params.delta_c - nu,
                          delta_a=params.delta_a - nu, omega_drive=drive)
        system = qdyn.build_system(config, shifted)
        rho = qdyn.steady_state(system)
        alpha = qdyn.expectation(a, rho)
        t = 1.0 - 1j * params.kappa_wg * alpha / drive
        out[i] = abs(t) ** 2
    return out


class TuningPoint(NamedTuple):
    cavity_pos: float
    line: str
    intensity_rel: float


LINE_LABELS = ("A", "B", "C", "D")


def pl_tuning_map(siv: SiVSpec, kappa: float, f0_per_line: Sequence[float],
                  cavity_center_grid: Sequence[float],
                  grid_kind: str = "freq_ghz") -> list[TuningPoint]:
    """Relative PL intensity of each line as the cavity is tuned across it.

    Line X at cavity detuning delta has relative intensity
    1 + purcell_lorentzian(f0_X, delta, kappa); far detuned the baseline is
    exactly 1.  The grid may be in GHz or nm (tag with ``grid_kind``);
    detunings are always evaluated in GHz, the emitted axis keeps the
    caller's units.
    """
    f0 = list(f0_per_line)
    if len(f0) != 4:
        raise ConfigurationError("one peak enhancement per line A-D required")
    if any(v < 0 for v in f0):
        raise ConfigurationError("peak enhancements must be >= 0")
    grid = np.asarray(cavity_center_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigurationError("cavity grid must be a nonempty 1-d sequence")
    d = np.diff(grid)
    if grid.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ConfigurationError("cavity grid must be strictly monotone")
    if grid_kind == "freq_ghz":
        pos_ghz = grid
    elif grid_kind == "wavelength_nm":
        pos_ghz = SPEED_OF_LIGHT_M_PER_S / grid
    else:
        raise ConfigurationError(f"unknown grid kind {grid_kind!r}")

    rows = []
    for pos, pos_f in zip(grid, pos_ghz):
        for label, line_freq, peak in zip(LINE_LABELS, siv.transition_freqs, f0):
            detuning = pos_f - line_freq
            rows.append(TuningPoint(
                float(pos), label,
                1.0 + purcell_lorentzian(peak, detuning, kappa)))
    return rows
