"""Batch scoring service over HTTP/JSON.

Endpoints: POST /v1/score, POST /v1/groups/fit, GET /v1/stats,
POST /v1/stats/restore, GET /healthz, GET /v1/config. Normalizer updates
are serialized through a single lock; reads never mutate state. The group
model and config are immutable shares swapped atomically.
"""

from __future__ import annotations

import threading
import time
from contextlib import asynccontextmanager
from typing import Any

import anyio.to_thread
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from .config import ServiceConfig
from .grouping import (
    DEFAULT_CLUSTER_COUNT,
    CharacterProfile,
    fallback_embedding,
    fit_kmeans,
    inertia,
    load_profiles,
    silhouette,
)
from .normalizer import NormalizerState, SnapshotError, VersionError, restore, snapshot
from .pipeline import NoGroupModelError, RewardPipeline
from .rewards import GoldAnnotation
from .trajectory import FocusDimension

__all__ = ["create_app", "ServiceState"]


class GoldPayload(BaseModel):
    gold_foci: list[str]
    gold_attrs: dict[str, str] = Field(default_factory=dict)
    reference_response: str
    character_id: str | None = None


class ScoreItemPayload(BaseModel):
    request_id: str
    character_id: str
    raw_output: str
    gold: GoldPayload


class ScoreRequestPayload(BaseModel):
    items: list[ScoreItemPayload]
    update_stats: bool = False


class ProfilePayload(BaseModel):
    character_id: str
    profile_text: str
    embedding: list[float] | None = None


class FitRequestPayload(BaseModel):
    profiles: list[ProfilePayload] | None = None
    profiles_path: str | None = None
    G: int = DEFAULT_CLUSTER_COUNT
    seed: int = 0


class ServiceState:
    """Mutable service internals behind one writer lock."""

    def __init__(self, config: ServiceConfig) -> None:
        self.config = config
        self.lock = threading.Lock()
        self.pipeline = RewardPipeline(
            weights=config.weights,
            ref_config=config.ref_config(),
            normalizer=NormalizerState(
                epsilon=config.epsilon_norm, decay=config.decay
            ),
            group_model=None,
        )
        self.stats_version = 0

    def write_snapshot_if_configured(self) -> None:
        if self.config.snapshot_path:
            import json

            with self.lock:
                document = snapshot(self.pipeline.normalizer)
            with open(self.config.snapshot_path, "w", encoding="utf-8") as handle:
                json.dump(document, handle)


def _gold_from_payload(item: ScoreItemPayload) -> GoldAnnotation:
    foci = []
    for label in item.gold.gold_foci:
        dim = FocusDimension.from_label(label)
        if dim is None:
            raise ValueError(f"unknown gold focus label: {label!r}")
        foci.append(dim)
    attrs = {}
    for label, text in item.gold.gold_attrs.items():
        dim = FocusDimension.from_label(label)
        if dim is None:
            raise ValueError(f"unknown gold focus label: {label!r}")
        attrs[dim] = text
    return GoldAnnotation(
        character_id=item.gold.character_id or item.character_id,
        gold_foci=frozenset(foci),
        gold_attrs=attrs,
        reference_response=item.gold.reference_response,
    )


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    state = ServiceState(config or ServiceConfig())

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        state.write_snapshot_if_configured()

    app = FastAPI(title="rolereward scoring service", lifespan=lifespan)
    app.state.service = state

    @app.exception_handler(RequestValidationError)
    async def _schema_error(_request: Request, exc: RequestValidationError):
        # error contexts can carry raw (non-serializable) body bytes
        detail = [
            {"loc": [str(part) for part in error.get("loc", ())], "msg": str(error.get("msg", ""))}
            for error in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {
            "status": "ok",
            "model_fitted": state.pipeline.group_model is not None,
            "stats_version": state.stats_version,
        }

    @app.get("/v1/config")
    def effective_config() -> dict[str, Any]:
        return state.config.as_dict()

    def _score_body(body: bytes) -> JSONResponse:
        # Runs on a worker thread: body parsing and validation of large
        # batches must not stall the event loop (health checks stay live).
        try:
            payload = ScoreRequestPayload.model_validate_json(body)
        except PydanticValidationError as exc:
            detail = [
                {"loc": [str(part) for part in error.get("loc", ())], "msg": str(error.get("msg", ""))}
                for error in exc.errors()
            ]
            return JSONResponse(status_code=400, content={"detail": detail})
        if not payload.items:
            return JSONResponse(status_code=400, content={"detail": "items must be non-empty"})
        ids = [item.request_id for item in payload.items]
        if len(set(ids)) != len(ids):
            return JSONResponse(
                status_code=400, content={"detail": "request_id values must be unique"}
            )
        try:
            golds = [_gold_from_payload(item) for item in payload.items]
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        if state.pipeline.group_model is None:
            return JSONResponse(status_code=409, content={"detail": "no group model fitted"})

        results = []
        with state.lock:
            for index, (item, gold) in enumerate(zip(payload.items, golds)):
                if index % 32 == 31:
                    time.sleep(0)  # yield the GIL to concurrent health checks
                result = state.pipeline.score_item(
                    character_id=item.character_id,
                    raw_output=item.raw_output,
                    gold=gold,
                    update_stats=payload.update_stats,
                )
                if payload.update_stats:
                    state.stats_version += 1
                results.append(result.to_wire(item.request_id))
            version = state.stats_version
        return JSONResponse({"items": results, "stats_version": version})

    @app.post("/v1/score")
    async def score(request: Request) -> JSONResponse:
        body = await request.body()
        return await anyio.to_thread.run_sync(_score_body, body)

    @app.post("/v1/groups/fit")
    def fit_groups(payload: FitRequestPayload) -> JSONResponse:
        if (payload.profiles is None) == (payload.profiles_path is None):
            return JSONResponse(
                status_code=400,
                content={"detail": "provide exactly one of profiles or profiles_path"},
            )
        try:
            if payload.profiles_path is not None:
                profiles = load_profiles(payload.profiles_path)
            else:
                profiles = [
                    CharacterProfile(
                        p.character_id,
                        p.profile_text,
                        p.embedding
                        if p.embedding is not None
                        else fallback_embedding(p.profile_text),
                    )
                    for p in payload.profiles or []
                ]
        except (OSError, ValueError) as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        if payload.G < 1:
            return JSONResponse(status_code=400, content={"detail": "G must be >= 1"})
        if len(profiles) < payload.G:
            return JSONResponse(
                status_code=422,
                content={"detail": f"need at least G={payload.G} profiles, got {len(profiles)}"},
            )
        try:
            model = fit_kmeans(profiles, payload.G, seed=payload.seed)
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        summary = {
            "G": model.cluster_count,
            "inertia": inertia(model, profiles),
            "silhouette": (
                silhouette(model, profiles)
                if model.cluster_count >= 2 and len(profiles) >= 2
                else None
            ),
        }
        with state.lock:
            state.pipeline.group_model = model
        return JSONResponse(summary)

    @app.get("/v1/stats")
    def get_stats() -> JSONResponse:
        with state.lock:
            document = snapshot(state.pipeline.normalizer)
        return JSONResponse(document)

    @app.post("/v1/stats/restore")
    async def restore_stats(request: Request) -> JSONResponse:
        try:
            document = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"detail": "body is not valid JSON"})
        try:
            new_state = restore(document)
        except VersionError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        except SnapshotError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        with state.lock:
            state.pipeline.normalizer = new_state
        return JSONResponse({"ok": True})

    return app
