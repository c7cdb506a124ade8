"""Turns raw text plus its dependency parses into PromptSemantics.

This is the text-vectorization step shared by prompt handling and corpus
ingestion: sentence vector, per-unit word vectors, and core-unit choice.
"""

from __future__ import annotations

from typing import Optional, Sequence

from mpve.embedding import KIND_SENTENCE, KIND_WORD, EmbeddingRequest
from mpve.parsing import ParsedSentence, extract_units, select_core_unit
from mpve.semantic import PromptSemantics, SemanticUnit, SemanticVector


def vectorize(
    text: str,
    sentences: Sequence[ParsedSentence],
    provider,
) -> PromptSemantics:
    """Build PromptSemantics for a text given its parsed sentences.

    Units from all sentences are concatenated in order; the core unit is
    selected within the first sentence that yields any unit.  An empty
    parse list produces unit-less semantics (sentence vector only).
    """
    total = provider.embed(EmbeddingRequest(KIND_SENTENCE, text))

    skeleton_rows = []  # (sentence, skeleton)
    core_global: Optional[int] = None
    for sentence in sentences:
        skeletons = extract_units(sentence)
        if skeletons and core_global is None:
            core_global = len(skeleton_rows) + select_core_unit(skeletons, sentence)
        skeleton_rows.extend((sentence, s) for s in skeletons)

    # one batched embed call for all role lemmas, deduplicated
    lemmas: list[str] = []
    seen: dict[str, int] = {}
    for sentence, skel in skeleton_rows:
        for idx in (skel.motion, skel.actor, skel.recipient):
            if idx is None:
                continue
            lemma = sentence.tokens[idx].lemma
            if lemma not in seen:
                seen[lemma] = len(lemmas)
                lemmas.append(lemma)
    vectors = (
        provider.embed_batch([EmbeddingRequest(KIND_WORD, w) for w in lemmas])
        if lemmas
        else []
    )

    def vec_for(sentence: ParsedSentence, idx: Optional[int]) -> Optional[SemanticVector]:
        if idx is None:
            return None
        return vectors[seen[sentence.tokens[idx].lemma]]

    def text_for(sentence: ParsedSentence, idx: Optional[int]) -> Optional[str]:
        if idx is None:
            return None
        return sentence.tokens[idx].lemma

    units = []
    for sentence, skel in skeleton_rows:
        units.append(
            SemanticUnit(
                motion=vec_for(sentence, skel.motion),
                actor=vec_for(sentence, skel.actor),
                recipient=vec_for(sentence, skel.recipient),
                motion_text=text_for(sentence, skel.motion),
                actor_text=text_for(sentence, skel.actor),
                recipient_text=text_for(sentence, skel.recipient),
                source_span=skel.span(),
            )
        )

    return PromptSemantics(
        total=total,
        units=tuple(units),
        core_index=core_global,
        raw_text=text,
    )
