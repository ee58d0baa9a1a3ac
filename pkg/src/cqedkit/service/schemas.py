"""Pydantic request/response models for the HTTP service.

JSON cannot carry inf, so an unidentifiable fit parameter is returned with
``sigma = null`` and its name listed in ``unidentifiable``.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..qdyn import HilbertConfig, SystemParams


class SystemParamsModel(BaseModel):
    """Physical rates and detunings, ordinary frequencies in GHz."""

    g: float = Field(ge=0)
    kappa: float = Field(ge=0)
    kappa_wg_fraction: float = Field(default=1.0, ge=0, le=1)
    gamma_rad: float = Field(default=0.0, ge=0)
    gamma_deph: float = Field(default=0.0, ge=0)
    delta_c: float = 0.0
    delta_a: float = 0.0
    omega_drive: float = 0.0

    def to_core(self) -> SystemParams:
        return SystemParams(**self.model_dump())


class HilbertConfigModel(BaseModel):
    n_max: int = Field(ge=1)
    n_emitters: int = Field(default=1, ge=1)

    def to_core(self) -> HilbertConfig:
        return HilbertConfig(**self.model_dump())


class Quantity(BaseModel):
    name: str
    value: float
    sigma: float = 0.0
    unit: str = ""
    note: str = ""


class DeriveRequest(BaseModel):
    tau_on_ns: float = Field(gt=0)
    tau_on_sigma_ns: float = Field(default=0.0, ge=0)
    tau_off_ns: float = Field(gt=0)
    tau_off_sigma_ns: float = Field(default=0.0, ge=0)
    xi_max: float = Field(gt=0, le=1)
    lifetime_ratio: float | None = Field(default=None, ge=1)
    lifetime_ratio_sigma: float = Field(default=0.0, ge=0)
    g_ghz: float = Field(gt=0)
    g_sigma_ghz: float = Field(default=0.0, ge=0)
    kappa_ghz: float = Field(gt=0)
    kappa_sigma_ghz: float = Field(default=0.0, ge=0)
    gamma_ghz: float = Field(gt=0)
    gamma_sigma_ghz: float = Field(default=0.0, ge=0)
    wavelength_nm: float | None = Field(default=None, gt=0)
    q_factor: float | None = Field(default=None, gt=0)
    mode_volume: float | None = Field(default=None, gt=0)
    linewidth_mhz: float | None = Field(default=None, gt=0)


class DeriveReport(BaseModel):
    quantities: list[Quantity]


class SeriesResponse(BaseModel):
    axis: list[float]
    values: list[float]
    axis_kind: str
    value_kind: str
    meta: dict[str, str] = {}


class SpectrumRequest(BaseModel):
    params: SystemParamsModel
    grid: list[float] = Field(min_length=1)


class DecayRequest(BaseModel):
    config: HilbertConfigModel
    params: SystemParamsModel
    t_final_ns: float = Field(gt=0)
    dt_ns: float = Field(gt=0)
    kind: str = "population"
    peak_counts: float = Field(default=10000.0, gt=0)
    seed: int = 0


class DecayResponse(BaseModel):
    t0: float
    dt: float
    values: list[float]
    kind: str


class SiVSpecModel(BaseModel):
    transition_freqs: list[float] = Field(min_length=4, max_length=4)
    ground_splitting: float = Field(default=0.0, ge=0)
    branching_xi_max: float = Field(default=1.0, gt=0, le=1)
    linewidths: list[float] = Field(default=[0.0, 0.0, 0.0, 0.0],
                                    min_length=4, max_length=4)


class TuningMapRequest(BaseModel):
    siv: SiVSpecModel
    kappa_ghz: float = Field(gt=0)
    f0_per_line: list[float] = Field(min_length=4, max_length=4)
    grid: list[float] = Field(min_length=1)
    grid_kind: str = "freq_ghz"


class TuningRow(BaseModel):
    cavity_pos: float
    line: str
    intensity_rel: float


class TuningMapResponse(BaseModel):
    rows: list[TuningRow]


class FreeParamModel(BaseModel):
    name: str
    init: float
    lower: float | None = None
    upper: float | None = None


class FitRequest(BaseModel):
    kind: str
    fixed: dict[str, float] = {}
    free: list[FreeParamModel] = Field(min_length=1)
    x: list[float] = Field(min_length=2)
    y: list[float] = Field(min_length=2)
    sigma_y: list[float] | None = None
    include_residuals: bool = False


class FitParam(BaseModel):
    name: str
    value: float
    sigma: float | None  # null = unidentifiable (infinite uncertainty)


class FitResponse(BaseModel):
    converged: bool
    n_iterations: int
    chi2_reduced: float
    params: list[FitParam]
    free_names: list[str]
    covariance: list[list[float]]
    unidentifiable: list[str]
    residuals: list[float] | None = None


class G2Request(BaseModel):
    config: HilbertConfigModel
    params: SystemParamsModel
    tau_grid: list[float] = Field(min_length=1)


class G2Response(BaseModel):
    tau_ns: list[float]
    g2: list[float]


class StreakBinRequest(BaseModel):
    content: str
    lambda_min_nm: float = Field(gt=0)
    lambda_max_nm: float = Field(gt=0)
    filename: str = "<upload>"


class VersionResponse(BaseModel):
    package: str
    format: str
