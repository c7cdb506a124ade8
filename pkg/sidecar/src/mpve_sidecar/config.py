"""Sidecar configuration: model identifiers are config, never code.

The builtin deterministic backends ship with the package; pointing a model
id at anything unknown fails at startup, loudly, so a misconfigured
deployment never serves garbage.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

BUILTIN_PARSER = "rule-en-v1"
BUILTIN_EMBEDDER = "hash-en-v1"
BUILTIN_DETECTOR = "color-v1"

ENV_PREFIX = "MPVE_SIDECAR_"


@dataclass(frozen=True)
class SidecarConfig:
    listen_addr: str = "127.0.0.1:9901"
    parser_model_id: str = BUILTIN_PARSER
    sentence_model_id: str = BUILTIN_EMBEDDER
    word_model_id: str = BUILTIN_EMBEDDER
    detector_model_id: str = BUILTIN_DETECTOR
    device: str = "cpu"
    dim: int = 384

    @classmethod
    def load(cls, path: str | None = None) -> "SidecarConfig":
        """Config file first, then MPVE_SIDECAR_* environment overrides."""
        values: dict = {}
        if path:
            with open(path, "r", encoding="utf-8") as fh:
                values.update(json.load(fh))
        for f in cls.__dataclass_fields__:
            env = os.environ.get(ENV_PREFIX + f.upper())
            if env is not None:
                values[f] = int(env) if f == "dim" else env
        return cls(**values)
