"""Read-only HTTP serving of forecasts, what-ifs, and explanations.

The model is loaded once at startup and never mutated, so request handling
is stateless and safe to run concurrently. Every non-2xx response body is
a single ApiError: {"code": ..., "message": ...} with code one of
schema_error | not_trained | bad_window | internal.
"""

from __future__ import annotations

from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .causal import InterventionSpec, counterfactual_predict
from .checkpoint import ModelCheckpoint, model_from_checkpoint
from .errors import ContractError, DiffcastError, SchemaError
from .forecaster import ForecastResult
from .graph_encoder import influencer_ranking
from .models import HybridModel
from .synth import DatasetBundle


class ApiError(Exception):
    """Carries the machine code and HTTP status for an error response."""

    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


class RawWindow(BaseModel):
    ad: list[list[float]]
    consumer: list[list[float]]
    graph_vec: list[float] | None = None


class ForecastRequest(BaseModel):
    series_id: int | None = None
    t: int | None = None
    window: RawWindow | None = None


class SpecPayload(BaseModel):
    treatment: str
    a0: float
    a1: float
    covariates: list[str] = []


class InterveneRequest(BaseModel):
    spec: SpecPayload
    series_id: int | None = None
    t: int | None = None


class ServiceState:
    def __init__(self, checkpoint: ModelCheckpoint | None, bundle: DatasetBundle | None):
        self.checkpoint = checkpoint
        self.model = model_from_checkpoint(checkpoint) if checkpoint else None
        self.bundle = bundle

    def require_model(self):
        if self.model is None:
            raise ApiError("not_trained", "no model checkpoint is loaded", status=409)
        return self.model

    def require_bundle(self) -> DatasetBundle:
        if self.bundle is None:
            raise ApiError(
                "bad_window",
                "series windows need a dataset; start the service with --data",
            )
        return self.bundle

    def resolve_end(self, t: int | None) -> int:
        bundle = self.require_bundle()
        window = self.model.cfg.window
        end = bundle.data.steps - 1 if t is None else t
        if end < window - 1 or end >= bundle.data.steps:
            raise ApiError(
                "bad_window",
                f"window end {end} out of range [{window - 1}, {bundle.data.steps - 1}]",
            )
        return end

    def resolve_series(self, series_id: int | None) -> int:
        bundle = self.require_bundle()
        s = 0 if series_id is None else series_id
        if not 0 <= s < bundle.data.n_series:
            raise ApiError("bad_window", f"series {s} out of range [0, {bundle.data.n_series - 1}]")
        return s

    def forecast_series(self, series: int, end: int) -> ForecastResult:
        model = self.require_model()
        bundle = self.require_bundle()
        start = end - model.cfg.window + 1
        ad = bundle.data.ad[series, start : end + 1]
        cons = bundle.data.consumer[series, start : end + 1]
        if isinstance(model, HybridModel):
            return model.forecast_one(bundle.graph, bundle.node_features(series), ad, cons, end=end)
        return model.forecast_one(ad, cons, end=end)

    def forecast_raw(self, window: RawWindow) -> ForecastResult:
        model = self.require_model()
        cfg = model.cfg
        ad = np.asarray(window.ad, dtype=np.float64)
        cons = np.asarray(window.consumer, dtype=np.float64)
        if ad.ndim != 2 or cons.ndim != 2 or ad.shape != (cfg.window, cfg.ad_dim) or cons.shape != (cfg.window, cfg.consumer_dim):
            raise ApiError(
                "bad_window",
                f"expected ad {cfg.window}x{cfg.ad_dim} and consumer {cfg.window}x{cfg.consumer_dim}, "
                f"got {list(ad.shape)} and {list(cons.shape)}",
            )
        if isinstance(model, HybridModel):
            from .forecaster import build_window, forecast_window
            from .numerics import Tensor

            vec = np.zeros(cfg.graph_dim) if window.graph_vec is None else np.asarray(window.graph_vec)
            if vec.shape != (cfg.graph_dim,):
                raise ApiError("bad_window", f"graph_vec must have length {cfg.graph_dim}")
            return forecast_window(build_window(Tensor(vec), ad, cons), model.tf)
        return model.forecast_one(ad, cons)


def _forecast_body(result: ForecastResult) -> dict[str, Any]:
    return {
        "horizon": result.horizon,
        "values": [float(v) for v in result.values],
        "anomaly_probs": [float(p) for p in result.anomaly_probs],
        "window_end_t": result.window_end,
    }


def create_app(checkpoint: ModelCheckpoint | None = None, bundle: DatasetBundle | None = None) -> FastAPI:
    state = ServiceState(checkpoint, bundle)
    app = FastAPI(title="diffcast", version=__version__)
    app.state.service = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def error_body(code: str, message: str, status: int) -> JSONResponse:
        return JSONResponse(status_code=status, content={"code": code, "message": message})

    @app.exception_handler(ApiError)
    async def handle_api_error(_: Request, exc: ApiError):
        return error_body(exc.code, exc.message, exc.status)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(_: Request, exc: RequestValidationError):
        return error_body("schema_error", str(exc.errors()[:1]), 400)

    @app.exception_handler(SchemaError)
    async def handle_schema(_: Request, exc: SchemaError):
        return error_body("schema_error", str(exc), 400)

    @app.exception_handler(DiffcastError)
    async def handle_domain(_: Request, exc: DiffcastError):
        return error_body("bad_window", str(exc), 400)

    @app.exception_handler(Exception)
    async def handle_internal(_: Request, exc: Exception):
        return error_body("internal", f"{type(exc).__name__}: {exc}", 500)

    from starlette.exceptions import HTTPException as StarletteHTTPException

    @app.exception_handler(StarletteHTTPException)
    async def handle_http(_: Request, exc: StarletteHTTPException):
        code = "schema_error" if exc.status_code < 500 else "internal"
        return error_body(code, str(exc.detail), exc.status_code)

    @app.get("/health")
    def health():
        return {"status": "ok", "model_loaded": state.model is not None}

    @app.get("/v1/model")
    def model_info():
        ckpt = state.checkpoint
        if ckpt is None:
            raise ApiError("not_trained", "no model checkpoint is loaded", status=409)
        data_info: dict[str, Any] = {"loaded": state.bundle is not None}
        if state.bundle is not None:
            data_info["series"] = state.bundle.data.n_series
            data_info["steps"] = state.bundle.data.steps
        return {
            "format_version": ckpt.format_version,
            "config": ckpt.config,
            "training": ckpt.metadata,
            "data": data_info,
        }

    @app.post("/v1/forecast")
    def forecast(req: ForecastRequest):
        if req.window is not None:
            result = state.forecast_raw(req.window)
            return {**_forecast_body(result), "history": []}
        state.require_model()
        series = state.resolve_series(req.series_id)
        end = state.resolve_end(req.t)
        result = state.forecast_series(series, end)
        window = state.model.cfg.window
        history = state.bundle.data.y[series, end - window + 1 : end + 1]
        return {**_forecast_body(result), "history": [float(v) for v in history]}

    @app.post("/v1/intervene")
    def intervene(req: InterveneRequest):
        model = state.require_model()
        bundle = state.require_bundle()
        try:
            spec = InterventionSpec(
                treatment=req.spec.treatment,
                a0=req.spec.a0,
                a1=req.spec.a1,
                covariates=req.spec.covariates,
            )
        except (SchemaError, ContractError) as exc:
            raise ApiError("schema_error", str(exc))
        series = state.resolve_series(req.series_id)
        end = state.resolve_end(req.t)
        pair = counterfactual_predict(model, bundle, series, end, spec)
        return {
            "trajectory_a0": [float(v) for v in pair.low.values],
            "trajectory_a1": [float(v) for v in pair.high.values],
            "ace_rollout": pair.rollout_effect,
            "per_step_delta": [float(v) for v in pair.delta],
            "window_end_t": end,
        }

    @app.get("/v1/explain")
    def explain(series_id: int | None = None, t: int | None = None):
        model = state.require_model()
        bundle = state.require_bundle()
        series = state.resolve_series(series_id)
        end = state.resolve_end(t)
        result = state.forecast_series(series, end)
        if result.attention.size == 0:
            raise ApiError("bad_window", "this model family has no attention maps")
        final = result.attention[-1]  # (heads, T, T)
        influencers = []
        if isinstance(model, HybridModel):
            ranking = influencer_ranking(
                bundle.graph, bundle.node_features(series), model.gnn, model.cfg.neighborhood
            )
            influencers = [{"node_id": nid, "score": score} for nid, score in ranking[:10]]
        return {
            "temporal_attention": final.tolist(),
            "attention_row_sums": final.sum(axis=-1).tolist(),
            "top_influencers": influencers,
            "window_end_t": end,
        }

    return app
