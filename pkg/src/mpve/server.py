"""Read-only HTTP query surface over a loaded index.

Endpoints:
  GET  /health                          -> {"status": "ok", "entries": N, "dim": D}
  POST /search   {"prompt", "top_k"?}   -> JSON array of ranked matches
  POST /vectorize {"text"}              -> prompt semantics with vectors

The index is immutable after load, so requests are served concurrently by
plain threads with no locking.  While the index is still loading every
endpoint answers 503.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional

from mpve.index import CorpusIndex
from mpve.matching import MatchConfig, retrieve
from mpve.semantic import PromptSemantics

logger = logging.getLogger(__name__)


def semantics_to_json_dict(sem: PromptSemantics) -> dict:
    def values(v):
        return None if v is None else [float(x) for x in v.values]

    return {
        "text": sem.raw_text,
        "total": values(sem.total),
        "units": [
            {
                "motion": values(u.motion),
                "actor": values(u.actor),
                "recipient": values(u.recipient),
                "motion_text": u.motion_text,
                "actor_text": u.actor_text,
                "recipient_text": u.recipient_text,
                "span": list(u.source_span),
            }
            for u in sem.units
        ],
        "core_index": sem.core_index,
    }


class EngineState:
    """What the handlers need; `index` flips from None once loading finishes."""

    def __init__(
        self,
        vectorize_prompt: Callable[[str], PromptSemantics],
        match_cfg: Optional[MatchConfig] = None,
    ):
        self.index: Optional[CorpusIndex] = None
        self.vectorize_prompt = vectorize_prompt
        self.match_cfg = match_cfg or MatchConfig()

    def set_index(self, index: CorpusIndex) -> None:
        self.index = index


class _Handler(BaseHTTPRequestHandler):
    state: EngineState  # injected by make_server

    def _reply(self, status: int, payload) -> None:
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def _error(self, status: int, message: str) -> None:
        self._reply(status, {"error": message})

    def _body(self) -> Optional[dict]:
        try:
            length = int(self.headers.get("Content-Length", "0"))
            data = json.loads(self.rfile.read(length))
        except (ValueError, json.JSONDecodeError):
            return None
        return data if isinstance(data, dict) else None

    def do_GET(self):
        if self.path != "/health":
            return self._error(404, "unknown endpoint")
        index = self.state.index
        if index is None:
            return self._reply(503, {"status": "loading"})
        self._reply(200, {"status": "ok", "entries": len(index), "dim": index.dim})

    def do_POST(self):
        if self.path not in ("/search", "/vectorize"):
            return self._error(404, "unknown endpoint")
        index = self.state.index
        if index is None:
            return self._error(503, "index is still loading")
        body = self._body()
        if body is None:
            return self._error(400, "malformed JSON body")
        try:
            if self.path == "/search":
                self._search(index, body)
            else:
                self._vectorize(body)
        except Exception as exc:
            logger.exception("request failed")
            self._error(500, str(exc))

    def _search(self, index, body):
        prompt_text = body.get("prompt")
        if not isinstance(prompt_text, str) or not prompt_text.strip():
            return self._error(400, "search needs a non-empty string 'prompt'")
        top_k = body.get("top_k", self.state.match_cfg.top_k)
        if not isinstance(top_k, int) or top_k < 1:
            return self._error(400, "'top_k' must be a positive integer")
        cfg = MatchConfig(**{**_cfg_dict(self.state.match_cfg), "top_k": top_k})
        sem = self.state.vectorize_prompt(prompt_text)
        matches = retrieve(sem, index, cfg)
        self._reply(200, [m.to_json_dict() for m in matches])

    def _vectorize(self, body):
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return self._error(400, "vectorize needs a non-empty string 'text'")
        self._reply(200, semantics_to_json_dict(self.state.vectorize_prompt(text)))

    def log_message(self, fmt, *args):
        logger.debug("http: " + fmt, *args)


def _cfg_dict(cfg: MatchConfig) -> dict:
    from dataclasses import asdict

    return asdict(cfg)


def make_server(listen: str, state: EngineState) -> ThreadingHTTPServer:
    """Bind the server (without starting it); index may load afterwards."""
    host, _, port = listen.rpartition(":")
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)


def serve_forever(
    listen: str,
    load_index: Callable[[], CorpusIndex],
    vectorize_prompt: Callable[[str], PromptSemantics],
    match_cfg: Optional[MatchConfig] = None,
) -> None:
    """Start listening immediately and load the index in the background."""
    state = EngineState(vectorize_prompt, match_cfg)
    server = make_server(listen, state)

    def load():
        state.set_index(load_index())
        logger.info("index loaded: %d entries", len(state.index))

    threading.Thread(target=load, daemon=True).start()
    host, port = server.server_address[:2]
    print(f"listening on {host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
