"""Shared test utilities: fixture vectors, synthetic corpora, and independent
pure-Python oracles for the similarity and filtering math.

The oracles deliberately avoid the engine's vector code paths (plain
math.fsum over Python floats) so they can catch systematic errors in the
numpy implementations.
"""

from __future__ import annotations

import math
import os
from typing import Optional

import numpy as np

from mpve.index import CorpusIndex, build_index
from mpve.semantic import PromptSemantics, SemanticUnit, SemanticVector

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURE_DIR, name)


def vec(*values: float) -> SemanticVector:
    return SemanticVector(np.asarray(values, dtype=np.float32))


def basis(dim: int, axis: int) -> SemanticVector:
    v = np.zeros(dim, dtype=np.float32)
    v[axis] = 1.0
    return SemanticVector(v)


def unit_norm(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


def perturbed(base: np.ndarray, rng: np.random.Generator, scale: float) -> np.ndarray:
    v = base.astype(np.float64) + scale * rng.standard_normal(base.shape)
    return (v / np.linalg.norm(v)).astype(np.float32)


def random_unit(rng: np.random.Generator, dim: int, p_actor=0.8, p_rec=0.5) -> SemanticUnit:
    return SemanticUnit(
        motion=SemanticVector(unit_norm(rng, dim)),
        actor=SemanticVector(unit_norm(rng, dim)) if rng.random() < p_actor else None,
        recipient=SemanticVector(unit_norm(rng, dim)) if rng.random() < p_rec else None,
        motion_text="m",
        actor_text="a",
        recipient_text="r",
    )


def random_semantics(rng: np.random.Generator, dim: int, max_units=3, p_unitless=0.1,
                     text="") -> PromptSemantics:
    total = SemanticVector(unit_norm(rng, dim))
    if rng.random() < p_unitless:
        return PromptSemantics(total=total, units=(), core_index=None, raw_text=text)
    n_units = int(rng.integers(1, max_units + 1))
    units = tuple(random_unit(rng, dim) for _ in range(n_units))
    core = int(rng.integers(0, n_units))
    return PromptSemantics(total=total, units=units, core_index=core, raw_text=text)


def echo_semantics(prompt: PromptSemantics, rng: np.random.Generator, scale: float) -> PromptSemantics:
    """Semantics near the prompt's: every vector perturbed by `scale` noise.

    With small scale the result passes all filter thresholds against the
    prompt, making it a plantable near-match.
    """

    def pvec(v: Optional[SemanticVector]) -> Optional[SemanticVector]:
        if v is None:
            return None
        return SemanticVector(perturbed(v.values, rng, scale))

    units = tuple(
        SemanticUnit(
            motion=pvec(u.motion),
            actor=pvec(u.actor),
            recipient=pvec(u.recipient),
            motion_text=u.motion_text,
            actor_text=u.actor_text,
            recipient_text=u.recipient_text,
            source_span=u.source_span,
        )
        for u in prompt.units
    )
    return PromptSemantics(
        total=pvec(prompt.total),
        units=units,
        core_index=prompt.core_index,
        raw_text=prompt.raw_text,
    )


def slerp_echo(prompt: PromptSemantics, rng: np.random.Generator,
               target_cos: float) -> PromptSemantics:
    """Semantics whose every vector sits at an exact cosine to the prompt's.

    Unlike additive noise, the angle is controlled directly, so threshold
    margins are deterministic regardless of dimension.
    """

    def rotate(v: Optional[SemanticVector]) -> Optional[SemanticVector]:
        if v is None:
            return None
        base = v.values.astype(np.float64)
        base = base / np.linalg.norm(base)
        noise = rng.standard_normal(base.shape)
        ortho = noise - np.dot(noise, base) * base
        ortho /= np.linalg.norm(ortho)
        out = target_cos * base + math.sqrt(1.0 - target_cos ** 2) * ortho
        return SemanticVector(out.astype(np.float32))

    units = tuple(
        SemanticUnit(
            motion=rotate(u.motion),
            actor=rotate(u.actor),
            recipient=rotate(u.recipient),
            motion_text=u.motion_text,
            actor_text=u.actor_text,
            recipient_text=u.recipient_text,
            source_span=u.source_span,
        )
        for u in prompt.units
    )
    return PromptSemantics(
        total=rotate(prompt.total),
        units=units,
        core_index=prompt.core_index,
        raw_text=prompt.raw_text,
    )


def synth_corpus(
    seed: int,
    n: int,
    dim: int = 16,
    prompt: Optional[PromptSemantics] = None,
    plant: int = 0,
    plant_scale: float = 0.05,
) -> CorpusIndex:
    """Random corpus of n entries; optionally `plant` near-matches of the
    prompt at random positions."""
    rng = np.random.default_rng(seed)
    semantics = [random_semantics(rng, dim) for _ in range(n)]
    if prompt is not None and plant:
        for pos in rng.choice(n, size=min(plant, n), replace=False):
            semantics[pos] = echo_semantics(prompt, rng, plant_scale)
    rows = [
        (f"e{i:05d}", f"caption {i}", f"video://{i}", None, None, semantics[i])
        for i in range(n)
    ]
    return build_index(rows, dim=dim, provider_fingerprint=f"synthetic:seed={seed}")


# --- independent oracle math (pure Python, no numpy reductions) --------------

def oracle_cos(a, b) -> float:
    av = [float(x) for x in np.asarray(a).ravel()]
    bv = [float(x) for x in np.asarray(b).ravel()]
    dot = math.fsum(x * y for x, y in zip(av, bv))
    na = math.sqrt(math.fsum(x * x for x in av))
    nb = math.sqrt(math.fsum(x * x for x in bv))
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return dot / (na * nb)


def oracle_component(a: Optional[SemanticVector], b: Optional[SemanticVector]) -> float:
    if a is None and b is None:
        return 1.0
    if a is None or b is None:
        return 0.0
    return min(1.0, max(0.0, oracle_cos(a.values, b.values)))


def oracle_unit_pair(a: SemanticUnit, b: SemanticUnit) -> float:
    return (
        oracle_component(a.motion, b.motion)
        + oracle_component(a.actor, b.actor)
        + oracle_component(a.recipient, b.recipient)
    )


def oracle_unit_set(units_i, units_p) -> float:
    if not units_i or not units_p:
        return 0.0
    return math.fsum(
        max(oracle_unit_pair(p, u) for u in units_i) for p in units_p
    ) / len(units_p)


def oracle_score(entry: PromptSemantics, prompt: PromptSemantics, cfg) -> float:
    total = oracle_cos(entry.total.values, prompt.total.values)
    if entry.core is None or prompt.core is None:
        mot = atr = 0.0
    else:
        mot = min(1.0, max(0.0, oracle_cos(entry.core.motion.values, prompt.core.motion.values)))
        atr = oracle_component(entry.core.actor, prompt.core.actor)
    uss = oracle_unit_set(entry.units, prompt.units)
    return total + cfg.alpha * mot + cfg.beta * atr + cfg.gamma * uss


def oracle_filter(index: CorpusIndex, prompt: PromptSemantics, cfg) -> set[str]:
    """Straight-line reimplementation of the three filter rounds."""

    def total_crit(pos):
        return oracle_cos(index.totals[pos], prompt.total.values)

    def mot_crit(pos):
        sem = index.semantics_at(pos)
        if sem.core is None or prompt.core is None:
            return 0.0
        return min(1.0, max(0.0, oracle_cos(sem.core.motion.values, prompt.core.motion.values)))

    def atr_crit(pos):
        sem = index.semantics_at(pos)
        if sem.core is None or prompt.core is None:
            return 0.0
        return oracle_component(sem.core.actor, prompt.core.actor)

    rounds = [(total_crit, cfg.t_total)]
    if prompt.units:
        rounds += [(mot_crit, cfg.t_mot), (atr_crit, cfg.t_atr)]

    positions = list(range(len(index)))
    for crit, threshold in rounds:
        values = {p: crit(p) for p in positions}
        survivors = [p for p in positions if values[p] >= threshold]
        if len(survivors) < cfg.failsafe_k:
            ranked = sorted(positions, key=lambda p: (-values[p], p))
            survivors = sorted(ranked[: cfg.failsafe_k])
        positions = survivors
    return {index.ids[p] for p in positions}
