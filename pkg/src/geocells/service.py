"""REST service: geocode text, inspect the partition, report health.

The partition and scorer are loaded once at startup and shared
read-only across requests; swap models by restarting.  Every response
body is a pure function of the request and the loaded artifacts, so
identical requests get byte-identical replies.

Endpoints (JSON, versioned under /v1):

* POST /v1/geocode {text, top_k?, beam_width?} ranks cells for a text.
  Each prediction carries its center, its polygon, and its ancestor
  polygons so a client can draw the cell against its coarser context.
* GET /v1/partition/leaves?bbox=minLon,minLat,maxLon,maxLat returns the
  leaf cells intersecting the bbox (all leaves without a bbox) as a
  FeatureCollection.
* GET /v1/health reports readiness plus the partition checksum and
  model id; 503 until loading finishes.

The model path may point at a trained baseline file or at an external
scores file; the file is sniffed and the matching scorer is used.
"""

from __future__ import annotations

import hashlib
import os
from contextlib import asynccontextmanager
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import labelcodec
from .cellgeo import cell_center
from .decode import (
    DEFAULT_BEAM_WIDTH,
    DEFAULT_TOP_K,
    Prediction,
    SequenceScorer,
    beam_search,
    load_scorer,
    trie_for,
)
from .geojson import GeoJsonError, cell_geometry, leaves_geojson, parse_bbox
from .partition import AdaptivePartition, load_partition, partition_checksum

MAX_TEXT_BYTES = 2048


class ServiceError(ValueError):
    """Bad service configuration or unloadable artifacts."""


@dataclass(frozen=True)
class ServiceConfig:
    partition_path: str
    model_path: str
    host: str = "127.0.0.1"
    port: int = 8000
    beam_width: int = DEFAULT_BEAM_WIDTH
    top_k: int = DEFAULT_TOP_K
    cors_origins: tuple[str, ...] = ("*",)
    edge_samples: int | None = None

    def __post_init__(self):
        if not (isinstance(self.port, int) and 0 < self.port < 65536):
            raise ServiceError(f"port must be in [1, 65535], got {self.port!r}")
        if not (isinstance(self.beam_width, int) and self.beam_width >= 1):
            raise ServiceError(f"beam_width must be >= 1, got {self.beam_width!r}")
        if not (isinstance(self.top_k, int) and 1 <= self.top_k <= self.beam_width):
            raise ServiceError(
                f"top_k must be in [1, beam_width={self.beam_width}], got {self.top_k!r}"
            )


class Engine:
    """Loaded partition + scorer, ready to rank cells for a text."""

    def __init__(
        self,
        partition: AdaptivePartition,
        scorer: SequenceScorer,
        model_id: str,
        beam_width: int = DEFAULT_BEAM_WIDTH,
        top_k: int = DEFAULT_TOP_K,
        edge_samples: int | None = None,
    ):
        self.partition = partition
        self.scorer = scorer
        self.model_id = model_id
        self.beam_width = beam_width
        self.top_k = top_k
        self.edge_samples = edge_samples
        self.partition_checksum = partition_checksum(partition)
        self.trie = trie_for(partition)

    def predict(
        self, text: str, top_k: int | None = None, beam_width: int | None = None
    ) -> list[Prediction]:
        return beam_search(
            self.scorer,
            text,
            self.trie,
            beam_width=beam_width or self.beam_width,
            top_k=top_k or self.top_k,
        )


def _file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_engine(config: ServiceConfig) -> Engine:
    """Load the partition and sniff the model file for its scorer type."""
    partition = load_partition(config.partition_path)
    scorer, kind = load_scorer(config.model_path, partition)
    model_id = f"{kind}/{_file_digest(config.model_path)[:12]}"
    return Engine(
        partition,
        scorer,
        model_id,
        beam_width=config.beam_width,
        top_k=config.top_k,
        edge_samples=config.edge_samples,
    )


class GeocodeRequest(BaseModel):
    text: str
    top_k: int | None = None
    beam_width: int | None = None


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def create_app(config: ServiceConfig | None = None, engine: Engine | None = None) -> FastAPI:
    """Build the app; the engine loads on startup unless one is injected."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if app.state.engine is None and config is not None:
            app.state.engine = load_engine(config)
        yield

    app = FastAPI(title="geocells", lifespan=lifespan)
    app.state.engine = engine
    origins = list(config.cors_origins) if config else ["*"]
    app.add_middleware(
        CORSMiddleware,
        allow_origins=origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def current_engine() -> Engine | None:
        return app.state.engine

    @app.post("/v1/geocode")
    def geocode(body: GeocodeRequest, request: Request):
        eng = current_engine()
        if eng is None:
            return _error(503, "model not loaded")
        if not body.text.strip():
            return _error(400, "text must be non-empty")
        if len(body.text.encode("utf-8")) > MAX_TEXT_BYTES:
            return _error(400, f"text exceeds {MAX_TEXT_BYTES} bytes")
        beam_width = body.beam_width if body.beam_width is not None else eng.beam_width
        top_k = body.top_k if body.top_k is not None else eng.top_k
        if beam_width < 1:
            return _error(422, "beam_width must be >= 1")
        if top_k < 1:
            return _error(422, "top_k must be >= 1")
        if top_k > beam_width:
            return _error(422, f"top_k={top_k} exceeds beam_width={beam_width}")
        predictions = eng.predict(body.text, top_k=top_k, beam_width=beam_width)
        out = []
        for pred in predictions:
            cell = labelcodec.decode(pred.label)
            center = cell_center(cell)
            out.append(
                {
                    "label": pred.label,
                    "probability": pred.probability,
                    "level": cell.level,
                    "center": {"lat": center.lat, "lon": center.lon},
                    "polygon": cell_geometry(cell, eng.edge_samples),
                    "ancestors": [
                        {
                            "label": anc,
                            "polygon": cell_geometry(labelcodec.decode(anc), eng.edge_samples),
                        }
                        for anc in labelcodec.ancestors(pred.label)
                    ],
                }
            )
        return {"model_id": eng.model_id, "text": body.text, "predictions": out}

    @app.get("/v1/partition/leaves")
    def partition_leaves(bbox: str | None = None):
        eng = current_engine()
        if eng is None:
            return _error(503, "model not loaded")
        parsed = None
        if bbox is not None:
            try:
                parsed = parse_bbox(bbox)
            except GeoJsonError as exc:
                return _error(400, str(exc))
        return leaves_geojson(eng.partition, parsed, eng.edge_samples)

    @app.get("/v1/health")
    def health():
        eng = current_engine()
        if eng is None:
            return _error(503, "loading")
        return {
            "status": "ok",
            "partition_checksum": eng.partition_checksum,
            "model_id": eng.model_id,
            "max_level": eng.partition.params.max_level,
        }

    return app


def run_service(config: ServiceConfig) -> None:
    """Blocking uvicorn runner used by the command line."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")


# Allows `uvicorn geocells.service:app_from_env` style deployment via
# GEOCELLS_* variables; the command line wraps run_service instead.
def app_from_env() -> FastAPI:
    env = os.environ
    partition_path = env.get("GEOCELLS_PARTITION")
    model_path = env.get("GEOCELLS_MODEL")
    if not partition_path or not model_path:
        raise ServiceError("GEOCELLS_PARTITION and GEOCELLS_MODEL must be set")
    config = ServiceConfig(
        partition_path=partition_path,
        model_path=model_path,
        host=env.get("GEOCELLS_HOST", "127.0.0.1"),
        port=int(env.get("GEOCELLS_PORT", "8000")),
        beam_width=int(env.get("GEOCELLS_BEAM_WIDTH", str(DEFAULT_BEAM_WIDTH))),
        top_k=int(env.get("GEOCELLS_TOP_K", str(DEFAULT_TOP_K))),
        cors_origins=tuple(env.get("GEOCELLS_CORS_ORIGINS", "*").split(",")),
    )
    return create_app(config)
