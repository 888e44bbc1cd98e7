"""HTTP facade over the analysis library.

Request and response schemas are pydantic models; handlers are plain
functions so the CLI can invoke them in process, while the FastAPI app
exposes the same contract to remote clients (run it with
``uvicorn moelab.service:app`` or ``moelab serve``).
"""

from __future__ import annotations

import base64
from typing import Any, Literal, Union

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__ as _version
from . import analysis, checks
from .config import (
    HARDWARE_FIXTURES,
    MODEL_FIXTURES,
    HardwareSpec,
    MoEConfig,
    fixtures_dir,
    load_hardware_spec,
    load_model_config,
)
from .errors import MoeLabError
from .goldenio import encode_vector
from .scaling import (
    AccuracyPoint,
    epm_lambda,
    fit_log_linear,
    invert_scaling_law,
    iso_accuracy_size,
)


class ModelConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    layers: int
    hidden_dim: int
    latent_dim: int
    routed_experts: int
    active_experts: int
    shared_experts: int
    intermediate_dim: int
    activation: Literal["swiglu", "squared_relu"]
    variant: Literal["standard", "latent_eff", "latent_acc"]

    def to_config(self) -> MoEConfig:
        return MoEConfig.from_dict(self.model_dump())


class HardwareSpecModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    peak_flops: float
    bw_hbm: float
    bw_nvl: float
    ep: int
    bytes_dispatch: float = 0.5
    bytes_aggregate: float = 2.0
    bytes_weight: float = 0.5

    def to_spec(self) -> HardwareSpec:
        return HardwareSpec.from_dict(self.model_dump())


# A model/hardware reference is either a fixture name or an inline config.
ModelRef = Union[str, ModelConfigModel]
HardwareRef = Union[str, HardwareSpecModel]


def _resolve_model(ref: ModelRef) -> MoEConfig:
    if isinstance(ref, str):
        if "/" in ref or "\\" in ref or not (fixtures_dir() / f"{ref}.json").is_file():
            raise HTTPException(status_code=400,
                                detail=f"unknown model fixture {ref!r}")
        return load_model_config(ref)
    return ref.to_config()


def _resolve_hardware(ref: HardwareRef) -> HardwareSpec:
    if isinstance(ref, str):
        if "/" in ref or "\\" in ref or not (fixtures_dir() / f"{ref}.json").is_file():
            raise HTTPException(status_code=400,
                                detail=f"unknown hardware fixture {ref!r}")
        return load_hardware_spec(ref)
    return ref.to_spec()


class WorkloadModel(BaseModel):
    t_total: float
    t_exp_standard: float
    t_exp: float


class MemoryModel(BaseModel):
    arithmetic_intensity: float
    compute_bound_intensity: float
    t_exp_threshold: float | None
    regime: str


class CommunicationModel(BaseModel):
    comm_compute_ratio: float
    comm_bytes_per_gpu_layer: float


class CostRowModel(BaseModel):
    variant: str
    n_routed_eff: int
    k_active: int
    routed_dim: int
    t_exp: float
    comm_bytes: float
    compute_flops: float
    weight_bytes_per_expert: float
    t_comm: float
    t_comp: float
    ratio: float | None
    intensity: float
    regime: str
    comm_ratio_vs_standard: float | None = None
    weight_ratio_vs_standard: float | None = None


class ParamReportModel(BaseModel):
    routed_total: int
    shared_total: int
    router_total: int
    projection_total: int
    model_total: int
    active_per_token: int
    layers: int


class FlopReportModel(BaseModel):
    routed: int
    shared: int
    router: int
    projection: int
    layer_total: int
    layers: int
    model_total: int


class DiversityModel(BaseModel):
    n: int
    k: int
    alpha: int
    log_binom_base: float
    log_binom_scaled: float
    log_gain: float
    u_eff: int | None


class AnalyzeRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: ModelRef
    hardware: HardwareRef
    t_exp: float | None = None
    t_total: float | None = None


class AnalyzeResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: dict[str, Any]
    hardware: dict[str, Any]
    workload: WorkloadModel
    memory: MemoryModel
    communication: CommunicationModel
    cost_table: list[CostRowModel]
    params: ParamReportModel
    flops: FlopReportModel
    diversity: DiversityModel
    notes: list[str]


class RooflineRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: ModelRef
    hardware: HardwareRef
    t_exp: list[float] = Field(min_length=1)


class RooflinePointModel(BaseModel):
    t_exp: float
    intensity: float
    attainable_flops: float
    regime: str


class RooflineResponse(BaseModel):
    rows: list[RooflinePointModel]


class CompareRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: ModelRef
    hardware: HardwareRef
    t_exp: float = 256.0


class CompareResponse(BaseModel):
    rows: list[CostRowModel]


class ForwardRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: ModelRef
    seed: int = 0
    tokens: int = Field(default=3, ge=1)
    renormalize_gates: bool = False
    identity_projections: bool = False


class ForwardResponse(BaseModel):
    digest: str
    tokens: int
    hidden_dim: int
    elements: int
    data_base64: str


class EpmFitPoint(BaseModel):
    n_params: float
    score: float


class EpmFitRequest(BaseModel):
    points: list[EpmFitPoint] = Field(min_length=2)


class EpmFitResponse(BaseModel):
    a: float
    b: float
    residual_rms: float
    n_points: int


class EpmLambdaRequest(BaseModel):
    n_eff: float
    n_treat: float


class EpmLambdaResponse(BaseModel):
    n_eff: float
    n_treat: float
    epm_lambda: float


class EpmIsoRequest(BaseModel):
    epm_lambda: float
    n_treat: float


class EpmIsoResponse(BaseModel):
    epm_lambda: float
    n_treat: float
    n_iso: float
    delta: float


class CheckRequest(BaseModel):
    seed: int = 0
    full: bool = False


class CheckResultModel(BaseModel):
    name: str
    passed: bool
    detail: str


class CheckResponse(BaseModel):
    passed: bool
    results: list[CheckResultModel]


class FixturesResponse(BaseModel):
    models: list[str]
    hardware: list[str]


# ---------------------------------------------------------------------------
# Handlers (shared by the HTTP endpoints and the in-process CLI client)

def handle_analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    report = analysis.analyze(_resolve_model(req.model),
                              _resolve_hardware(req.hardware),
                              t_exp=req.t_exp, t_total=req.t_total)
    return AnalyzeResponse(**report)


def handle_roofline(req: RooflineRequest) -> RooflineResponse:
    rows = analysis.roofline_rows(_resolve_model(req.model),
                                  _resolve_hardware(req.hardware), req.t_exp)
    return RooflineResponse(rows=[RooflinePointModel(**row) for row in rows])


def handle_compare(req: CompareRequest) -> CompareResponse:
    rows = analysis.compare_rows(_resolve_model(req.model),
                                 _resolve_hardware(req.hardware), req.t_exp)
    return CompareResponse(rows=[CostRowModel(**row) for row in rows])


def handle_forward(req: ForwardRequest) -> ForwardResponse:
    config = _resolve_model(req.model)
    y, digest = analysis.run_forward(
        config, req.seed, req.tokens,
        renormalize_gates=req.renormalize_gates,
        use_identity_projections=req.identity_projections)
    return ForwardResponse(
        digest=digest, tokens=req.tokens, hidden_dim=config.hidden_dim,
        elements=y.size,
        data_base64=base64.b64encode(encode_vector(y)).decode("ascii"))


def handle_epm_fit(req: EpmFitRequest) -> EpmFitResponse:
    fit = fit_log_linear([AccuracyPoint(p.n_params, p.score) for p in req.points])
    return EpmFitResponse(**fit.to_dict())


def handle_epm_lambda(req: EpmLambdaRequest) -> EpmLambdaResponse:
    return EpmLambdaResponse(n_eff=req.n_eff, n_treat=req.n_treat,
                             epm_lambda=epm_lambda(req.n_eff, req.n_treat))


def handle_epm_iso(req: EpmIsoRequest) -> EpmIsoResponse:
    n_iso, delta = iso_accuracy_size(req.epm_lambda, req.n_treat)
    return EpmIsoResponse(epm_lambda=req.epm_lambda, n_treat=req.n_treat,
                          n_iso=n_iso, delta=delta)


def handle_check(req: CheckRequest) -> CheckResponse:
    results = checks.run_checks(seed=req.seed, full=req.full)
    return CheckResponse(passed=all(r.passed for r in results),
                         results=[CheckResultModel(**r.to_dict()) for r in results])


def handle_fixtures() -> FixturesResponse:
    return FixturesResponse(models=list(MODEL_FIXTURES),
                            hardware=list(HARDWARE_FIXTURES))


# ---------------------------------------------------------------------------
# FastAPI app

app = FastAPI(title="moelab", version=_version,
              description="MoE / latent-MoE serving-cost analysis service")


@app.exception_handler(MoeLabError)
async def _moelab_error(request, exc: MoeLabError):
    from fastapi.responses import JSONResponse
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok", "version": _version}


@app.get("/fixtures", response_model=FixturesResponse)
def fixtures() -> FixturesResponse:
    return handle_fixtures()


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze_endpoint(req: AnalyzeRequest) -> AnalyzeResponse:
    return handle_analyze(req)


@app.post("/roofline", response_model=RooflineResponse)
def roofline_endpoint(req: RooflineRequest) -> RooflineResponse:
    return handle_roofline(req)


@app.post("/compare", response_model=CompareResponse)
def compare_endpoint(req: CompareRequest) -> CompareResponse:
    return handle_compare(req)


@app.post("/forward", response_model=ForwardResponse)
def forward_endpoint(req: ForwardRequest) -> ForwardResponse:
    return handle_forward(req)


@app.post("/epm/fit", response_model=EpmFitResponse)
def epm_fit_endpoint(req: EpmFitRequest) -> EpmFitResponse:
    return handle_epm_fit(req)


@app.post("/epm/lambda", response_model=EpmLambdaResponse)
def epm_lambda_endpoint(req: EpmLambdaRequest) -> EpmLambdaResponse:
    return handle_epm_lambda(req)


@app.post("/epm/iso", response_model=EpmIsoResponse)
def epm_iso_endpoint(req: EpmIsoRequest) -> EpmIsoResponse:
    return handle_epm_iso(req)


@app.post("/check", response_model=CheckResponse)
def check_endpoint(req: CheckRequest) -> CheckResponse:
    return handle_check(req)
