"""Coarse-to-fine caption search: filter rounds, ranking score, retrieval.

The searchable quantity is a sum of four terms: sentence-vector similarity,
core-motion and core-actor similarity (weighted alpha/beta), and the
weighted (gamma) best-match average of unit-pair similarities from prompt
units into caption units.  Filtering runs three sequential threshold
rounds (sentence, core motion, core actor) with a per-round fail-safe that
keeps at least the top k of that round's criterion, so a thin corpus can
never filter down to nothing.

All similarity math here is float64, computed from the stored float32
vectors; `retrieve` (vectorized) and `brute_force_retrieve` (per-entry
reference math) therefore agree to well below 1e-9 on scores.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from mpve.index import CorpusIndex, EmptyIndex
from mpve.semantic import (
    NORM_EPS,
    DimensionMismatch,
    PromptSemantics,
    SemanticUnit,
    component_sim,
    cosine_sim_or_zero,
    unit_pair_sim,
)


@dataclass(frozen=True)
class MatchConfig:
    """Search thresholds and ranking weights.

    The defaults are the engine's operating point: filter thresholds 0.3
    (sentence), 0.9 (core motion), 0.4 (core actor); ranking weights 1, 1
    and 0.5; every filter round keeps at least the top 10.
    """

    t_total: float = 0.3
    t_mot: float = 0.9
    t_atr: float = 0.4
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.5
    failsafe_k: int = 10
    top_k: int = 1

    def __post_init__(self):
        for name in ("t_total", "t_mot", "t_atr"):
            value = getattr(self, name)
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1], got {value}")
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.failsafe_k < 1:
            raise ValueError("failsafe_k must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MatchConfig":
        data = json.loads(text)
        allowed = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(data) - set(allowed)
        if unknown:
            raise ValueError(f"unknown match config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class ScoreParts:
    """Unweighted decomposition of one ranking score."""

    total_sim: float
    core_mot_sim: float
    core_atr_sim: float
    unit_set_sim: float


@dataclass(frozen=True)
class RankedMatch:
    entry_id: str
    score: float
    parts: ScoreParts
    survived_rounds: int  # consecutive filter rounds passed, counting executed rounds only

    def __post_init__(self):
        if not 0 <= self.survived_rounds <= 3:
            raise ValueError("survived_rounds must lie in 0..3")

    def to_json_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "score": self.score,
            "parts": asdict(self.parts),
            "survived_rounds": self.survived_rounds,
        }


@dataclass(frozen=True)
class RoundTrace:
    """Diagnostics for one filter round."""

    criterion: str
    input_size: int
    threshold: float
    passed: int          # entries meeting the threshold
    output_size: int     # after the fail-safe floor
    failsafe_used: bool


@dataclass
class FilterTrace:
    rounds: list[RoundTrace] = field(default_factory=list)
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))


def unit_set_sim(units_i: Sequence[SemanticUnit], units_p: Sequence[SemanticUnit]) -> float:
    """Best-match average of unit-pair similarity from prompt units into
    caption units; 0 when either side is empty.  Range [0, 3]."""
    if not units_i or not units_p:
        return 0.0
    acc = 0.0
    for p in units_p:
        acc += max(unit_pair_sim(p, u) for u in units_i)
    return acc / len(units_p)


def _core_component_sims(
    entry: PromptSemantics, prompt: PromptSemantics
) -> tuple[float, float]:
    """(core-motion, core-actor) similarity with absence handling.

    A side with no core unit at all contributes 0 to both terms; otherwise
    each term follows the component absence rule (both absent = 1, one
    absent = 0, both present = clamped cosine).
    """
    ec, pc = entry.core, prompt.core
    if ec is None or pc is None:
        return 0.0, 0.0
    mot = max(0.0, cosine_sim_or_zero(ec.motion, pc.motion))
    atr = component_sim(ec.actor, pc.actor)
    return mot, atr


def match_score(
    entry_semantics: PromptSemantics,
    prompt: PromptSemantics,
    cfg: MatchConfig,
    entry_id: str = "",
) -> RankedMatch:
    """Reference (per-entry) ranking score with its decomposition."""
    total = cosine_sim_or_zero(entry_semantics.total, prompt.total)
    mot, atr = _core_component_sims(entry_semantics, prompt)
    uss = unit_set_sim(entry_semantics.units, prompt.units)
    score = total + cfg.alpha * mot + cfg.beta * atr + cfg.gamma * uss
    return RankedMatch(
        entry_id=entry_id,
        score=score,
        parts=ScoreParts(total, mot, atr, uss),
        survived_rounds=_survived_rounds(total, mot, atr, bool(prompt.units), cfg),
    )


def _survived_rounds(
    total: float, mot: float, atr: float, prompt_has_units: bool, cfg: MatchConfig
) -> int:
    if total < cfg.t_total:
        return 0
    if not prompt_has_units:
        return 1
    if mot < cfg.t_mot:
        return 1
    if atr < cfg.t_atr:
        return 2
    return 3


# --- vectorized criterion math ----------------------------------------------

def _prompt_arrays(prompt: PromptSemantics):
    """Prompt-side quantities reused across criteria, all float64."""
    q_total = prompt.total.values.astype(np.float64)
    q_total_norm = float(np.linalg.norm(q_total))
    core = prompt.core
    out = {
        "q_total": q_total,
        "q_total_norm": q_total_norm,
        "core_mot": None,
        "core_mot_norm": 0.0,
        "core_atr": None,
        "core_atr_norm": 0.0,
    }
    if core is not None:
        m = core.motion.values.astype(np.float64)
        out["core_mot"] = m
        out["core_mot_norm"] = float(np.linalg.norm(m))
        if core.actor is not None:
            a = core.actor.values.astype(np.float64)
            out["core_atr"] = a
            out["core_atr_norm"] = float(np.linalg.norm(a))
    return out


def _total_sims(index: CorpusIndex, q: np.ndarray, q_norm: float,
                positions: Optional[np.ndarray] = None) -> np.ndarray:
    """Raw sentence-vector cosine for all (or selected) entries, float64.

    einsum keeps the accumulation in float64 without materializing a
    float64 copy of the vector matrix.
    """
    mat = index.totals if positions is None else index.totals[positions]
    norms = index.total_norms if positions is None else index.total_norms[positions]
    dots = np.einsum("ij,j->i", mat, q, dtype=np.float64)
    denom = norms * q_norm
    safe = denom > NORM_EPS
    return np.divide(dots, denom, out=np.zeros_like(dots), where=safe)


def _core_mot_sims(index: CorpusIndex, pa: dict, positions: np.ndarray) -> np.ndarray:
    """Clamped core-motion similarity for the given entries (0 where the
    entry has no units or the prompt has no core)."""
    out = np.zeros(len(positions))
    if pa["core_mot"] is None:
        return out
    rows = index.core_rows[positions]
    valid = rows >= 0
    if not np.any(valid):
        return out
    vrows = rows[valid]
    mat = index.unit_mot[vrows]
    dots = np.einsum("ij,j->i", mat, pa["core_mot"], dtype=np.float64)
    norms = np.linalg.norm(mat.astype(np.float64), axis=1) * pa["core_mot_norm"]
    safe = norms > NORM_EPS
    sims = np.divide(dots, norms, out=np.zeros_like(dots), where=safe)
    out[valid] = np.clip(sims, 0.0, 1.0)
    return out


def _core_atr_sims(index: CorpusIndex, pa: dict, positions: np.ndarray) -> np.ndarray:
    """Core-actor similarity under the absence rule for the given entries."""
    out = np.zeros(len(positions))
    rows = index.core_rows[positions]
    valid = rows >= 0
    if pa["core_mot"] is None or not np.any(valid):
        return out  # prompt has no core unit: both core terms are 0 everywhere
    vrows = rows[valid]
    entry_has_atr = index.unit_mask[vrows, 1]
    if pa["core_atr"] is None:
        # prompt core lacks an actor: agreement (1.0) iff the entry core also lacks one
        vals = np.where(entry_has_atr, 0.0, 1.0)
    else:
        mat = index.unit_atr[vrows]
        dots = np.einsum("ij,j->i", mat, pa["core_atr"], dtype=np.float64)
        norms = np.linalg.norm(mat.astype(np.float64), axis=1) * pa["core_atr_norm"]
        safe = norms > NORM_EPS
        sims = np.divide(dots, norms, out=np.zeros_like(dots), where=safe)
        vals = np.where(entry_has_atr, np.clip(sims, 0.0, 1.0), 0.0)
    out[valid] = vals
    return out


def _unit_set_sims(index: CorpusIndex, prompt: PromptSemantics,
                   positions: np.ndarray) -> np.ndarray:
    """Vectorized unit-set similarity for the given entries."""
    out = np.zeros(len(positions))
    m = len(prompt.units)
    if m == 0:
        return out
    p_mot = np.stack([u.motion.values.astype(np.float64) for u in prompt.units])
    p_atr = np.stack(
        [
            u.actor.values.astype(np.float64) if u.actor is not None else np.zeros(index.dim)
            for u in prompt.units
        ]
    )
    p_rec = np.stack(
        [
            u.recipient.values.astype(np.float64)
            if u.recipient is not None
            else np.zeros(index.dim)
            for u in prompt.units
        ]
    )
    p_has_atr = np.array([u.actor is not None for u in prompt.units])
    p_has_rec = np.array([u.recipient is not None for u in prompt.units])
    p_mot_n = np.linalg.norm(p_mot, axis=1)
    p_atr_n = np.linalg.norm(p_atr, axis=1)
    p_rec_n = np.linalg.norm(p_rec, axis=1)

    def comp(mat_rows, e_norms, e_has, p_vecs, p_norms, p_has):
        # (E, P) pair similarities for one component under the absence rule
        dots = mat_rows.astype(np.float64) @ p_vecs.T
        denom = np.outer(e_norms, p_norms)
        safe = denom > NORM_EPS
        sims = np.clip(np.divide(dots, denom, out=np.zeros_like(dots), where=safe), 0.0, 1.0)
        both = np.outer(e_has, p_has)
        neither = np.outer(~e_has, ~p_has)
        return np.where(both, sims, np.where(neither, 1.0, 0.0))

    for k, pos in enumerate(positions):
        lo, hi = int(index.unit_offsets[pos]), int(index.unit_offsets[pos + 1])
        if hi == lo:
            continue
        e_mot = index.unit_mot[lo:hi]
        e_atr = index.unit_atr[lo:hi]
        e_rec = index.unit_rec[lo:hi]
        mask = index.unit_mask[lo:hi]
        pair = (
            comp(e_mot, np.linalg.norm(e_mot.astype(np.float64), axis=1), mask[:, 0],
                 p_mot, p_mot_n, np.ones(m, bool))
            + comp(e_atr, np.linalg.norm(e_atr.astype(np.float64), axis=1), mask[:, 1],
                   p_atr, p_atr_n, p_has_atr)
            + comp(e_rec, np.linalg.norm(e_rec.astype(np.float64), axis=1), mask[:, 2],
                   p_rec, p_rec_n, p_has_rec)
        )
        out[k] = float(np.mean(np.max(pair, axis=0)))
    return out


# --- filtering and retrieval --------------------------------------------------

def _top_k_positions(criterion: np.ndarray, positions: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k largest criterion values; ties keep ingestion order."""
    if len(positions) <= k:
        return positions
    order = np.lexsort((positions, -criterion))
    return np.sort(positions[order[:k]])


def _coarse_filter_trace(
    prompt: PromptSemantics, index: CorpusIndex, cfg: MatchConfig
) -> FilterTrace:
    if len(index) == 0:
        raise EmptyIndex("cannot filter an empty index")
    if prompt.total.dim != index.dim:
        raise DimensionMismatch(f"prompt dim {prompt.total.dim} != index dim {index.dim}")

    trace = FilterTrace()
    pa = _prompt_arrays(prompt)
    positions = np.arange(len(index), dtype=np.int64)

    def total_crit(pos):
        # avoid a full-matrix fancy-index copy on the opening round
        subset = None if len(pos) == len(index) else pos
        return _total_sims(index, pa["q_total"], pa["q_total_norm"], subset)

    rounds = [("total_sim", cfg.t_total, total_crit)]
    if prompt.units:
        rounds.append(("core_mot_sim", cfg.t_mot, lambda pos: _core_mot_sims(index, pa, pos)))
        rounds.append(("core_atr_sim", cfg.t_atr, lambda pos: _core_atr_sims(index, pa, pos)))

    for name, threshold, crit_fn in rounds:
        crit = crit_fn(positions)
        keep = crit >= threshold
        passed = int(np.count_nonzero(keep))
        if passed < cfg.failsafe_k:
            survivors = _top_k_positions(crit, positions, cfg.failsafe_k)
            failsafe = True
        else:
            survivors = positions[keep]
            failsafe = False
        trace.rounds.append(
            RoundTrace(
                criterion=name,
                input_size=len(positions),
                threshold=threshold,
                passed=passed,
                output_size=len(survivors),
                failsafe_used=failsafe,
            )
        )
        positions = survivors
    trace.positions = positions
    return trace


def coarse_filter(prompt: PromptSemantics, index: CorpusIndex, cfg: MatchConfig) -> set[str]:
    """Candidate entry ids surviving the three filter rounds."""
    trace = _coarse_filter_trace(prompt, index, cfg)
    return {index.ids[p] for p in trace.positions}


def _score_positions(
    index: CorpusIndex, prompt: PromptSemantics, cfg: MatchConfig, positions: np.ndarray
) -> list[RankedMatch]:
    pa = _prompt_arrays(prompt)
    total = _total_sims(index, pa["q_total"], pa["q_total_norm"], positions)
    mot = _core_mot_sims(index, pa, positions)
    atr = _core_atr_sims(index, pa, positions)
    uss = _unit_set_sims(index, prompt, positions)
    scores = total + cfg.alpha * mot + cfg.beta * atr + cfg.gamma * uss
    has_units = bool(prompt.units)
    return [
        RankedMatch(
            entry_id=index.ids[int(pos)],
            score=float(scores[k]),
            parts=ScoreParts(float(total[k]), float(mot[k]), float(atr[k]), float(uss[k])),
            survived_rounds=_survived_rounds(
                float(total[k]), float(mot[k]), float(atr[k]), has_units, cfg
            ),
        )
        for k, pos in enumerate(positions)
    ]


def _rank(matches: list[RankedMatch], positions: np.ndarray, top_k: int) -> list[RankedMatch]:
    order = sorted(range(len(matches)), key=lambda k: (-matches[k].score, positions[k]))
    return [matches[k] for k in order[:top_k]]


def retrieve(
    prompt: PromptSemantics, index: CorpusIndex, cfg: Optional[MatchConfig] = None
) -> list[RankedMatch]:
    """Best top_k corpus entries for a prompt: filter, score, rank.

    Results come back in descending score order, ties broken by ingestion
    order, each with its full score decomposition.
    """
    cfg = cfg or MatchConfig()
    trace = _coarse_filter_trace(prompt, index, cfg)
    matches = _score_positions(index, prompt, cfg, trace.positions)
    return _rank(matches, trace.positions, cfg.top_k)


def brute_force_retrieve(
    prompt: PromptSemantics, index: CorpusIndex, cfg: Optional[MatchConfig] = None
) -> list[RankedMatch]:
    """Score every entry with the reference math; no filtering.

    Testing oracle for `retrieve`: whenever this function's top entry
    passes all filter thresholds, `retrieve` must return the same entry at
    rank 1 with the same score.  Divergence is only possible when the top
    entry would have been removed by a filter round and rescued entries
    rank differently; such rescues are visible as survived_rounds lower
    than the number of executed rounds.
    """
    cfg = cfg or MatchConfig()
    if len(index) == 0:
        raise EmptyIndex("cannot retrieve from an empty index")
    matches = [
        match_score(index.semantics_at(pos), prompt, cfg, entry_id=index.ids[pos])
        for pos in range(len(index))
    ]
    return _rank(matches, np.arange(len(index)), cfg.top_k)
