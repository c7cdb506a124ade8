"""FastAPI application exposing /parse, /embed, /detect and /health.

All endpoints are stateless between requests; model objects are built once
at startup from the config's model ids and shared read-only.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from mpve_sidecar import __version__
from mpve_sidecar.config import (
    BUILTIN_DETECTOR,
    BUILTIN_EMBEDDER,
    BUILTIN_PARSER,
    SidecarConfig,
)
from mpve_sidecar.detector import ColorDetector, VideoUnreadable
from mpve_sidecar.embedder import HashEmbedder
from mpve_sidecar import parser as rule_parser


class ParseRequest(BaseModel):
    texts: list[str]


class EmbedRequest(BaseModel):
    kind: str
    texts: list[str]


class DetectRequest(BaseModel):
    video_ref: str
    captions: list[str]
    stride: int = Field(default=1, ge=1)


def _load_models(cfg: SidecarConfig):
    """Resolve model ids; anything unknown aborts startup (exit nonzero)."""
    if cfg.parser_model_id != BUILTIN_PARSER:
        raise RuntimeError(f"parser model {cfg.parser_model_id!r} is not available")
    if BUILTIN_EMBEDDER not in (cfg.sentence_model_id, cfg.word_model_id):
        raise RuntimeError("no available embedding model configured")
    if cfg.sentence_model_id != cfg.word_model_id:
        raise RuntimeError("builtin embedder serves both kinds; ids must match")
    if cfg.detector_model_id != BUILTIN_DETECTOR:
        raise RuntimeError(f"detector model {cfg.detector_model_id!r} is not available")
    return HashEmbedder(dim=cfg.dim), ColorDetector()


def create_app(cfg: SidecarConfig | None = None) -> FastAPI:
    cfg = cfg or SidecarConfig.load()
    embedder, detector = _load_models(cfg)
    app = FastAPI(title="mpve-sidecar", version=__version__)

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "models": {
                "parser": cfg.parser_model_id,
                "sentence": cfg.sentence_model_id,
                "word": cfg.word_model_id,
                "detector": cfg.detector_model_id,
            },
            "dim": cfg.dim,
        }

    @app.post("/parse")
    def parse(req: ParseRequest):
        if not req.texts:
            raise HTTPException(400, "texts must be non-empty")
        if any(not t.strip() for t in req.texts):
            raise HTTPException(400, "texts must not contain empty strings")
        try:
            return {"conllu": [rule_parser.to_conllu(t) for t in req.texts]}
        except Exception as exc:  # defensive: a parser bug is a 500, not a hang
            raise HTTPException(500, f"parser failure: {exc}") from exc

    @app.post("/embed")
    def embed(req: EmbedRequest):
        if req.kind not in ("sentence", "word"):
            raise HTTPException(400, f"unknown kind {req.kind!r}")
        if not req.texts:
            raise HTTPException(400, "texts must be non-empty")
        if any(not t.strip() for t in req.texts):
            raise HTTPException(400, "texts must not contain empty strings")
        try:
            vectors = embedder.embed(req.kind, req.texts)
        except Exception as exc:
            raise HTTPException(500, f"embedder failure: {exc}") from exc
        return {"dim": embedder.dim, "vectors": [v.tolist() for v in vectors]}

    @app.post("/detect")
    def detect(req: DetectRequest):
        if not req.captions:
            raise HTTPException(400, "captions must be non-empty")
        try:
            return detector.detect(req.video_ref, req.captions, req.stride)
        except VideoUnreadable as exc:
            raise HTTPException(404, str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        except Exception as exc:
            raise HTTPException(500, f"detector failure: {exc}") from exc

    return app
