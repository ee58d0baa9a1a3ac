"""FastAPI service exposing the toolkit: derived quantities, spectra, decay
simulation, the tuning map, least-squares fits, photon correlations and
streak-image binning.

Error mapping: invalid inputs and file content -> 400 (code ``invalid_input``),
degenerate fits -> 409 (``fit_degenerate``), solver breakdowns -> 409
(``solver_failure``).  Fit non-convergence is not an error: the result is
returned with ``converged = false``.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import FORMAT_VERSION, __version__, derive, dynamics, fileio, fitcore
from .. import qdyn, spectra
from ..derive import Measured
from ..errors import (
    ConfigurationError,
    CqedError,
    DegenerateFitError,
    DegenerateSteadyStateError,
    DimensionMismatchError,
    NoEnhancementError,
    ParseError,
    SolverError,
    StiffnessError,
    UndefinedCorrelationError,
    UnsupportedRegimeError,
)
from . import schemas

_INPUT_ERRORS = (ConfigurationError, ParseError, DimensionMismatchError,
                 NoEnhancementError, UnsupportedRegimeError)
_SOLVER_ERRORS = (StiffnessError, DegenerateSteadyStateError, SolverError,
                  UndefinedCorrelationError)


def _error_response(status: int, code: str, exc: Exception) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"detail": {"code": code, "message": str(exc)}})


def create_app() -> FastAPI:
    app = FastAPI(title="cqedkit service", version=__version__)

    @app.exception_handler(CqedError)
    async def _handle(_request, exc: CqedError):
        if isinstance(exc, _INPUT_ERRORS):
            return _error_response(400, "invalid_input", exc)
        if isinstance(exc, DegenerateFitError):
            return _error_response(409, "fit_degenerate", exc)
        if isinstance(exc, _SOLVER_ERRORS):
            return _error_response(409, "solver_failure", exc)
        return _error_response(500, "internal_error", exc)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/version", response_model=schemas.VersionResponse)
    def version():
        return schemas.VersionResponse(package=__version__,
                                       format=FORMAT_VERSION)

    @app.post("/derive", response_model=schemas.DeriveReport)
    def derive_report(req: schemas.DeriveRequest):
        return _derive_report(req)

    @app.post("/spectrum", response_model=schemas.SeriesResponse)
    def spectrum(req: schemas.SpectrumRequest):
        series = spectra.dit_transmission(req.params.to_core(), req.grid)
        return schemas.SeriesResponse(
            axis=series.axis.tolist(), values=series.values.tolist(),
            axis_kind=series.axis_kind, value_kind=series.value_kind,
            meta=series.meta)

    @app.post("/decay", response_model=schemas.DecayResponse)
    def decay(req: schemas.DecayRequest):
        trace = dynamics.simulate_decay(req.config.to_core(),
                                        req.params.to_core(),
                                        req.t_final_ns, req.dt_ns)
        if req.kind == "counts":
            rng = np.random.default_rng(req.seed)
            trace = dynamics.counts_trace(trace, req.peak_counts, rng)
        elif req.kind != "population":
            raise ConfigurationError(f"unknown trace kind {req.kind!r}")
        return schemas.DecayResponse(t0=trace.t0, dt=trace.dt,
                                     values=trace.values.tolist(),
                                     kind=trace.kind)

    @app.post("/tuning-map", response_model=schemas.TuningMapResponse)
    def tuning_map(req: schemas.TuningMapRequest):
        siv = derive.SiVSpec(
            transition_freqs=tuple(req.siv.transition_freqs),
            ground_splitting=req.siv.ground_splitting,
            branching_xi_max=req.siv.branching_xi_max,
            linewidths=tuple(req.siv.linewidths))
        rows = spectra.pl_tuning_map(siv, req.kappa_ghz, req.f0_per_line,
                                     req.grid, req.grid_kind)
        return schemas.TuningMapResponse(
            rows=[schemas.TuningRow(cavity_pos=r.cavity_pos, line=r.line,
                                    intensity_rel=r.intensity_rel)
                  for r in rows])

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit(req: schemas.FitRequest):
        model = fitcore.FitModel(
            kind=req.kind, fixed_params=dict(req.fixed),
            free_params=[
                fitcore.FreeParam(p.name, p.init,
                                  None if p.lower is None and p.upper is None
                                  else (p.lower, p.upper))
                for p in req.free])
        result = fitcore.lm_fit(model, req.x, req.y, sigma_y=req.sigma_y)
        params = [schemas.FitParam(
            name=name, value=result.params[name].value,
            sigma=None if math.isinf(result.params[name].sigma)
            else result.params[name].sigma)
            for name in result.free_names]
        return schemas.FitResponse(
            converged=result.converged, n_iterations=result.n_iterations,
            chi2_reduced=result.chi2_reduced, params=params,
            free_names=list(result.free_names),
            covariance=result.covariance.tolist(),
            unidentifiable=list(result.unidentifiable),
            residuals=result.residuals.tolist() if req.include_residuals
            else None)

    @app.post("/g2", response_model=schemas.G2Response)
    def g2(req: schemas.G2Request):
        system = qdyn.build_system(req.config.to_core(), req.params.to_core())
        pairs = qdyn.g2_correlation(system, req.tau_grid)
        return schemas.G2Response(tau_ns=[t for t, _ in pairs],
                                  g2=[v for _, v in pairs])

    @app.post("/streak-bin", response_model=schemas.DecayResponse)
    def streak_bin(req: schemas.StreakBinRequest):
        img = fileio.parse_streak_text(req.content, req.filename)
        trace = fileio.bin_streak_region(img, req.lambda_min_nm,
                                         req.lambda_max_nm)
        return schemas.DecayResponse(t0=trace.t0, dt=trace.dt,
                                     values=trace.values.tolist(),
                                     kind=trace.kind)

    return app


def _derive_report(req: schemas.DeriveRequest) -> schemas.DeriveReport:
    tau_on = Measured(req.tau_on_ns, req.tau_on_sigma_ns, "ns")
    tau_off = Measured(req.tau_off_ns, req.tau_off_sigma_ns, "ns")
    g = Measured(req.g_ghz, req.g_sigma_ghz, "GHz")
    kappa = Measured(req.kappa_ghz, req.kappa_sigma_ghz, "GHz")
    gamma = Measured(req.gamma_ghz, req.gamma_sigma_ghz, "GHz")

    quantities: list[schemas.Quantity] = []

    def add(name, value, sigma=0.0, unit="", note=""):
        quantities.append(schemas.Quantity(name=name, value=value, sigma=sigma,
                                           unit=unit, note=note))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        beta = derive.beta_factor(tau_on, tau_off)
    add("beta_percent", 100 * beta.value, 100 * beta.sigma, "%",
        "" if beta.value >= 0 else "no enhancement (tau_on > tau_off)")

    ratio = derive.lifetime_ratio(tau_on, tau_off)
    add("lifetime_ratio", ratio.value, ratio.sigma)

    coop = derive.cooperativity(g, kappa, gamma)
    add("cooperativity", coop.value, coop.sigma)

    # a directly measured ratio, when supplied, wins over the propagated one
    if req.lifetime_ratio is not None:
        ratio_in = Measured(req.lifetime_ratio, req.lifetime_ratio_sigma, "")
        ratio_note = "from measured ratio"
    else:
        ratio_in, ratio_note = ratio, "from lifetimes"
    fmin = derive.min_purcell(ratio_in, req.xi_max)
    add("purcell_min", fmin.value, fmin.sigma,
        note=f"xi_max = {req.xi_max:g}, {ratio_note}")

    if req.q_factor is not None and req.mode_volume is not None:
        cav = derive.CavityRecord(lambda_c=req.wavelength_nm or 737.0,
                                  q_factor=req.q_factor,
                                  mode_volume_norm=req.mode_volume)
        add("purcell_theory", derive.theoretical_purcell(cav))

    if req.wavelength_nm is not None:
        q = derive.q_kappa_convert(kappa, req.wavelength_nm, "to_q")
        add("q_from_kappa", q.value, q.sigma,
            note=f"at {req.wavelength_nm:g} nm")

    fourier = derive.fourier_limited_linewidth(tau_off.value)
    add("fourier_limit_mhz", fourier, unit="MHz", note="from tau_off")
    if req.linewidth_mhz is not None:
        add("fourier_ratio", req.linewidth_mhz / fourier,
            note=f"measured {req.linewidth_mhz:g} MHz over the limit")

    add("emission_rate_ghz",
        derive.emission_rate_into_cavity(max(beta.value, 0.0), tau_on.value),
        unit="GHz", note="beta/tau_on over 2pi")

    strong_now, n_strong = derive.strong_coupling_threshold(
        g.value, kappa.value, gamma.value)
    add("strong_coupling_n", float(n_strong),
        note="already strong at N=1" if strong_now
        else f"g sqrt(N) must exceed {(kappa.value - gamma.value) / 4:.4g} GHz")

    return schemas.DeriveReport(quantities=quantities)


app = create_app()
