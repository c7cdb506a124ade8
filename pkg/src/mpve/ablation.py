"""Corpus-size ablation: top-1 ranking score as a function of corpus fraction.

Subsampling is nested — one seeded permutation, fractions taken as
prefixes — so a smaller fraction's entry set is always a subset of a
larger one's.  Under nesting the headline trend (bigger corpus, better
best match) is exact per prompt, not statistical: adding candidates can
only raise a maximum.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from math import ceil
from typing import Callable, Sequence

import numpy as np

from mpve.index import CorpusIndex
from mpve.matching import MatchConfig, retrieve
from mpve.semantic import PromptSemantics

DEFAULT_FRACTIONS = (1.0, 0.5, 0.25, 0.1, 0.05, 0.01)
AVG_PROMPT_ID = "__avg__"


class EmptyPromptList(Exception):
    pass


def default_prompts() -> list[str]:
    """The packaged evaluation prompt set."""
    text = resources.files("mpve.data").joinpath("ablation_prompts.txt").read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class AblationConfig:
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    seed: int = 0
    prompts: tuple[str, ...] = ()
    match: MatchConfig = field(default_factory=MatchConfig)

    def __post_init__(self):
        if not self.fractions:
            raise ValueError("fractions must be non-empty")
        if any(not 0.0 < f <= 1.0 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        if list(self.fractions) != sorted(set(self.fractions), reverse=True):
            raise ValueError("fractions must be unique and sorted descending")


@dataclass(frozen=True)
class AblationRow:
    fraction: float
    prompt_id: str
    score: float


@dataclass
class AblationResult:
    rows: list[AblationRow]

    def averages(self) -> dict[float, float]:
        return {
            row.fraction: row.score for row in self.rows if row.prompt_id == AVG_PROMPT_ID
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["fraction", "prompt_id", "score"])
        for row in self.rows:
            writer.writerow([f"{row.fraction:g}", row.prompt_id, f"{row.score:.12g}"])
        return buf.getvalue()


def run_ablation(
    index: CorpusIndex,
    cfg: AblationConfig,
    vectorize_prompt: Callable[[str], PromptSemantics],
) -> AblationResult:
    """Evaluate top-1 retrieval score per prompt across nested corpus fractions.

    For each fraction, ceil(f * N) entries are drawn by taking a prefix of
    one seeded permutation (kept in ingestion order within the subset);
    each prompt's rank-1 score is recorded, followed by the fraction's
    average row.
    """
    if not cfg.prompts:
        raise EmptyPromptList("ablation needs at least one prompt")
    semantics = [vectorize_prompt(p) for p in cfg.prompts]
    rng = np.random.default_rng(cfg.seed)
    permutation = rng.permutation(len(index))

    rows: list[AblationRow] = []
    for fraction in cfg.fractions:
        size = max(1, ceil(fraction * len(index)))
        positions = np.sort(permutation[:size])
        sub = index.subset(positions.tolist())
        scores = []
        for prompt_id, sem in enumerate(semantics):
            top = retrieve(sem, sub, cfg.match)[0]
            scores.append(top.score)
            rows.append(AblationRow(fraction, str(prompt_id), top.score))
        rows.append(AblationRow(fraction, AVG_PROMPT_ID, float(np.mean(scores))))
    return AblationResult(rows=rows)
