"""HTTP JSON API over the shared engine."""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse

from ..dedup import ProductClusterMap
from ..engine import Engine, outcome_payload, window_from
from ..errors import StorageError, StoreMissingError, UnknownUserError, ValidationError
from ..eventstore import EventStore
from .schemas import Health, IngestResponse, RecommendationResponse, RefreshResponse, Rejection

log = logging.getLogger(__name__)

STORE_ENV = "SWIPECF_STORE"


def _parse_body(raw: bytes) -> list:
    """A JSON array, a single JSON object, or JSON-lines."""
    text = raw.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        lines = [l for l in text.splitlines() if l.strip()]
        if len(lines) < 2:
            raise
        return [json.loads(l) for l in lines]
    if isinstance(doc, list):
        return doc
    return [doc]


def create_app(
    store_dir=None,
    *,
    clusters_path=None,
    refresh_seconds: Optional[float] = 30.0,
) -> FastAPI:
    store_dir = Path(store_dir or os.environ.get(STORE_ENV, "store"))
    app = FastAPI(title="swipecf", version="1")
    state: dict = {}

    def engine() -> Engine:
        eng = state.get("engine")
        if eng is None:
            try:
                clusters = ProductClusterMap.read(clusters_path) if clusters_path else None
                eng = Engine(EventStore(store_dir), clusters, refresh_seconds)
            except (StoreMissingError, StorageError, OSError) as exc:
                raise HTTPException(503, f"store unavailable: {exc}") from exc
            state["engine"] = eng
        else:
            try:
                eng.maybe_refresh()
            except (StorageError, OSError) as exc:
                raise HTTPException(503, f"store unavailable: {exc}") from exc
        return eng

    @app.exception_handler(ValidationError)
    async def _validation(request: Request, exc: ValidationError):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    @app.get("/v1/healthz", response_model=Health)
    def healthz():
        return Health()

    @app.get("/v1/recommendations/{user_id}", response_model=RecommendationResponse)
    def recommendations(user_id: str, n: int = Query(5, ge=1, le=100)):
        eng = engine()
        try:
            outcome = eng.recommend(user_id, n)
        except UnknownUserError as exc:
            raise HTTPException(404, str(exc)) from exc
        return RecommendationResponse(**outcome_payload(outcome))

    @app.post("/v1/events", status_code=202, response_model=IngestResponse)
    async def ingest(request: Request):
        raw = await request.body()
        try:
            items = _parse_body(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise HTTPException(400, f"malformed JSON: {exc}") from exc
        if not items:
            raise HTTPException(400, "no events in request body")
        eng = engine()
        try:
            positions, rejected = eng.store.append_many(items)
        except StorageError as exc:
            raise HTTPException(503, str(exc)) from exc
        body = IngestResponse(
            accepted=len(positions),
            rejected=len(rejected),
            positions=positions,
            rejections=[Rejection(index=i, reason=r) for i, r in rejected],
        )
        if not positions:
            return JSONResponse(body.model_dump(), status_code=400)
        return body

    @app.get("/v1/metrics")
    def metrics(
        start: Optional[str] = Query(None, alias="from"),
        end: Optional[str] = Query(None, alias="to"),
    ):
        window = window_from(start, end)
        eng = engine()
        try:
            return eng.evaluate(window)
        except (StorageError, OSError) as exc:
            raise HTTPException(503, f"store unavailable: {exc}") from exc

    @app.post("/v1/admin/refresh", response_model=RefreshResponse)
    def refresh():
        eng = engine()
        m = eng.refresh()
        return RefreshResponse(
            users=len(m.users), products=len(m.products), raids=len(m.raids), dislikes=len(m.dislikes), as_of=m.as_of
        )

    return app
