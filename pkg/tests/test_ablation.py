"""Ablation harness tests: nesting, determinism, dominance fixture, CSV shape."""

import numpy as np
import pytest

from mpve.ablation import (
    AVG_PROMPT_ID,
    AblationConfig,
    EmptyPromptList,
    default_prompts,
    run_ablation,
)
from mpve.index import build_index
from mpve.matching import MatchConfig, retrieve
from mpve.semantic import PromptSemantics, SemanticVector

from helpers import random_semantics, synth_corpus

FRACTIONS = (1.0, 0.5, 0.25, 0.1, 0.05, 0.01)


def unitless(total):
    return PromptSemantics(total=SemanticVector(total), raw_text="q")


def dominance_corpus(seed: int, n: int, dim: int = 8):
    """Corpus where entries later in the sampling permutation are strictly
    better matches, so every fraction step strictly raises the best score."""
    rng = np.random.default_rng(seed)
    permutation = rng.permutation(n)  # identical draw to run_ablation's
    q = np.zeros(dim, dtype=np.float64)
    q[0] = 1.0
    rows = []
    sems = [None] * n
    for rank, pos in enumerate(permutation):
        angle = (1.0 - (rank + 1) / n) * (np.pi / 2)  # later rank -> closer to q
        v = np.zeros(dim)
        v[0] = np.cos(angle)
        v[1 + (pos % (dim - 1))] = np.sin(angle)
        sems[pos] = unitless(v.astype(np.float32))
    for i in range(n):
        rows.append((f"e{i:04d}", f"c{i}", f"v{i}", None, None, sems[i]))
    idx = build_index(rows, dim=dim, provider_fingerprint="dominance")
    return idx, unitless(q.astype(np.float32))


class TestAblationConfig:
    def test_default_fractions(self):
        assert AblationConfig(prompts=("x",)).fractions == FRACTIONS

    def test_fraction_validation(self):
        with pytest.raises(ValueError):
            AblationConfig(fractions=(0.5, 1.0), prompts=("x",))
        with pytest.raises(ValueError):
            AblationConfig(fractions=(1.0, 0.0), prompts=("x",))

    def test_packaged_prompt_set(self):
        prompts = default_prompts()
        assert len(prompts) == 10
        assert prompts[0].startswith("An elephant")


class TestRunAblation:
    def test_full_fraction_equals_direct_retrieve(self):
        idx = synth_corpus(seed=5, n=120, dim=8)
        rng = np.random.default_rng(5)
        sems = {f"p{i}": random_semantics(rng, 8) for i in range(3)}
        cfg = AblationConfig(fractions=(1.0, 0.5), seed=9, prompts=tuple(sems))
        result = run_ablation(idx, cfg, lambda t: sems[t])
        direct = {
            str(i): retrieve(sem, idx, cfg.match)[0].score
            for i, sem in enumerate(sems.values())
        }
        full_rows = [r for r in result.rows if r.fraction == 1.0 and r.prompt_id != AVG_PROMPT_ID]
        assert {r.prompt_id: r.score for r in full_rows} == pytest.approx(direct)

    def test_same_seed_identical_csv(self):
        idx = synth_corpus(seed=6, n=100, dim=8)
        rng = np.random.default_rng(6)
        sems = {"p": random_semantics(rng, 8)}
        cfg = AblationConfig(seed=77, prompts=("p",))
        a = run_ablation(idx, cfg, lambda t: sems[t]).to_csv()
        b = run_ablation(idx, cfg, lambda t: sems[t]).to_csv()
        assert a == b

    def test_different_seed_differs(self):
        idx = synth_corpus(seed=6, n=300, dim=8)
        rng = np.random.default_rng(6)
        sems = {"p": random_semantics(rng, 8)}
        a = run_ablation(idx, AblationConfig(seed=1, prompts=("p",)), lambda t: sems[t])
        b = run_ablation(idx, AblationConfig(seed=2, prompts=("p",)), lambda t: sems[t])
        assert a.to_csv() != b.to_csv()

    def test_dominance_fixture_strictly_increases(self):
        idx, prompt = dominance_corpus(seed=33, n=1000)
        cfg = AblationConfig(fractions=FRACTIONS, seed=33, prompts=("q",))
        result = run_ablation(idx, cfg, lambda t: prompt)
        averages = result.averages()
        ordered = [averages[f] for f in sorted(FRACTIONS)]
        assert all(b > a for a, b in zip(ordered, ordered[1:]))

    def test_monotone_nondecreasing_per_prompt(self):
        # open thresholds make every entry survive filtering, so top-1 is a
        # true max over the nested subset and monotonicity is exact; with
        # real thresholds a fail-safe rescue can legitimately break it
        idx = synth_corpus(seed=14, n=400, dim=8)
        rng = np.random.default_rng(14)
        sems = {f"p{i}": random_semantics(rng, 8) for i in range(4)}
        open_cfg = MatchConfig(t_total=-1.0, t_mot=-1.0, t_atr=-1.0)
        cfg = AblationConfig(seed=3, prompts=tuple(sems), match=open_cfg)
        result = run_ablation(idx, cfg, lambda t: sems[t])
        by_prompt = {}
        for row in result.rows:
            if row.prompt_id != AVG_PROMPT_ID:
                by_prompt.setdefault(row.prompt_id, {})[row.fraction] = row.score
        for scores in by_prompt.values():
            seq = [scores[f] for f in sorted(scores)]
            assert all(b >= a for a, b in zip(seq, seq[1:]))

    def test_csv_shape(self):
        idx = synth_corpus(seed=2, n=50, dim=8)
        rng = np.random.default_rng(2)
        sems = {"a": random_semantics(rng, 8), "b": random_semantics(rng, 8)}
        cfg = AblationConfig(fractions=(1.0, 0.5), seed=0, prompts=("a", "b"))
        csv_text = run_ablation(idx, cfg, lambda t: sems[t]).to_csv()
        lines = csv_text.strip().splitlines()
        assert lines[0] == "fraction,prompt_id,score"
        assert len(lines) == 1 + 2 * 3  # two fractions x (two prompts + average)
        assert lines[3].startswith("1,__avg__,")

    def test_empty_prompts_rejected(self):
        idx = synth_corpus(seed=1, n=10, dim=8)
        with pytest.raises((EmptyPromptList, ValueError)):
            run_ablation(idx, AblationConfig(prompts=()), lambda t: None)
