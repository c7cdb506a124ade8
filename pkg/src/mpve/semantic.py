"""Vector kernels and the semantic domain types shared by all other modules.

Everything here is immutable after construction and every operation is a
pure function, so the whole module is safe to use from concurrent threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

# Norms below this are treated as degenerate (a zero embedding).
NORM_EPS = 1e-12

# Engine-wide default embedding width; any width works, the index records it.
DEFAULT_DIM = 384


class SemanticError(Exception):
    """Base class for semantic-layer errors."""


class ZeroNormVector(SemanticError):
    """A vector with (near-)zero norm was used where a direction is required."""


class DimensionMismatch(SemanticError):
    """Two vectors of different widths were combined."""


@dataclass(frozen=True, eq=False)
class SemanticVector:
    """A fixed-width embedding vector with all-finite coordinates."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("SemanticVector requires a non-empty 1-d array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("SemanticVector coordinates must be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values.astype(np.float64)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SemanticVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __repr__(self) -> str:  # keep test failure output short
        return f"SemanticVector(dim={self.dim})"


@dataclass(frozen=True)
class SemanticUnit:
    """One complete motion abstracted from a sentence.

    A unit is anchored by a verb (``motion`` is always present); the actor
    and recipient slots are optional.  Role texts are the bare head lemmas,
    with modifier words already stripped.
    """

    motion: SemanticVector
    actor: Optional[SemanticVector] = None
    recipient: Optional[SemanticVector] = None
    motion_text: Optional[str] = None
    actor_text: Optional[str] = None
    recipient_text: Optional[str] = None
    source_span: tuple[int, int] = (0, 0)

    def __post_init__(self):
        start, end = self.source_span
        if start < 0 or end < start:
            raise ValueError(f"invalid source span {self.source_span}")
        for part in (self.actor, self.recipient):
            if part is not None and part.dim != self.motion.dim:
                raise DimensionMismatch(
                    f"unit component widths differ: {part.dim} vs {self.motion.dim}"
                )

    def phrase(self) -> str:
        """Reconstruct the unit's phrase as '<actor> <motion> <recipient>'."""
        words = [self.actor_text, self.motion_text, self.recipient_text]
        return " ".join(w for w in words if w)


@dataclass(frozen=True)
class PromptSemantics:
    """Sentence-level vector plus the ordered unit set for one text."""

    total: SemanticVector
    units: tuple[SemanticUnit, ...] = ()
    core_index: Optional[int] = None
    raw_text: str = ""

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        if self.units:
            if self.core_index is None or not 0 <= self.core_index < len(self.units):
                raise ValueError(
                    f"core_index {self.core_index} out of range for {len(self.units)} units"
                )
        elif self.core_index is not None:
            raise ValueError("core_index given but the unit set is empty")

    @property
    def core(self) -> Optional[SemanticUnit]:
        if self.core_index is None:
            return None
        return self.units[self.core_index]


def cosine_sim(a: SemanticVector, b: SemanticVector) -> float:
    """Cosine similarity of two vectors, in [-1, 1].

    Raises ZeroNormVector when either vector is degenerate; callers that
    want "degenerate means unrelated" should use :func:`cosine_sim_or_zero`.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"dims differ: {a.dim} vs {b.dim}")
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na < NORM_EPS or nb < NORM_EPS:
        raise ZeroNormVector(f"degenerate vector norm ({na:.3e}, {nb:.3e})")
    sim = float(np.dot(av, bv) / (na * nb))
    # guard against float drift beyond the mathematical range
    return max(-1.0, min(1.0, sim))


def cosine_sim_or_zero(a: Optional[SemanticVector], b: Optional[SemanticVector]) -> float:
    """Cosine similarity, treating absent or degenerate vectors as 0."""
    if a is None or b is None:
        return 0.0
    try:
        return cosine_sim(a, b)
    except ZeroNormVector:
        return 0.0


def cos_distance(a: SemanticVector, b: SemanticVector) -> float:
    """Cosine distance 1 - cosine_sim, in [0, 2]."""
    return 1.0 - cosine_sim(a, b)


def component_sim(a: Optional[SemanticVector], b: Optional[SemanticVector]) -> float:
    """Similarity of one unit component under the absence rule.

    Both absent means the two units agree on structure and scores 1.0;
    exactly one absent scores 0.0; both present scores the cosine clamped
    to [0, 1] (anti-correlated embeddings mean "unrelated", not negative
    evidence).
    """
    if a is None and b is None:
        return 1.0
    if a is None or b is None:
        return 0.0
    return max(0.0, cosine_sim_or_zero(a, b))


def unit_pair_sim(a: SemanticUnit, b: SemanticUnit) -> float:
    """Similarity of two units: summed motion/actor/recipient terms, in [0, 3]."""
    return (
        component_sim(a.motion, b.motion)
        + component_sim(a.actor, b.actor)
        + component_sim(a.recipient, b.recipient)
    )
