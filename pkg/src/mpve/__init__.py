"""mpve — motion-prior video engine.

Retrieves, from a captioned-video corpus, the entry whose motion semantics
best match a text prompt, and packages the retrieved video's key frames as
a motion-prior bundle for downstream video-model tuning.
"""

__version__ = "0.1.0"

from mpve.semantic import (
    SemanticVector,
    SemanticUnit,
    PromptSemantics,
    cosine_sim,
    cos_distance,
    unit_pair_sim,
)
from mpve.matching import MatchConfig, RankedMatch, retrieve, brute_force_retrieve

__all__ = [
    "SemanticVector",
    "SemanticUnit",
    "PromptSemantics",
    "cosine_sim",
    "cos_distance",
    "unit_pair_sim",
    "MatchConfig",
    "RankedMatch",
    "retrieve",
    "brute_force_retrieve",
    "__version__",
]
