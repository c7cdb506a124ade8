"""Deterministic builtin embedder ("hash-en-v1").

Word vectors combine a hash-seeded pseudo-random base direction with
shared concept directions from a small lexicon, so related words (shared
stems or concepts) land measurably closer than unrelated ones while
distinct concepts stay near-orthogonal.  Sentence vectors are the
normalized mean of the word vectors.  Everything is L2-normalized and a
pure function of the text, which is what the wire contract promises.
"""

from __future__ import annotations

import hashlib

import numpy as np

# stem -> [(concept, weight)]
CONCEPTS: dict[str, list[tuple[str, float]]] = {
    "man": [("human", 0.8)],
    "person": [("human", 0.8)],
    "woman": [("human", 0.8)],
    "girl": [("human", 0.7), ("young", 0.3)],
    "boy": [("human", 0.7), ("young", 0.3)],
    "child": [("human", 0.7), ("young", 0.4)],
    "people": [("human", 0.8)],
    "dog": [("animal", 0.7)],
    "cat": [("animal", 0.7)],
    "horse": [("animal", 0.7)],
    "bird": [("animal", 0.7)],
    "run": [("locomotion", 0.8)],
    "sprint": [("locomotion", 0.8)],
    "jog": [("locomotion", 0.7)],
    "walk": [("locomotion", 0.6)],
    "drive": [("locomotion", 0.5), ("vehicle", 0.3)],
    "ride": [("locomotion", 0.5), ("vehicle", 0.3)],
    "car": [("vehicle", 0.8)],
    "truck": [("vehicle", 0.8)],
    "bicycle": [("vehicle", 0.6)],
    "train": [("vehicle", 0.7)],
    "eat": [("ingestion", 0.8)],
    "chew": [("ingestion", 0.8)],
    "drink": [("ingestion", 0.7)],
    "jump": [("motion", 0.6)],
    "fall": [("motion", 0.6)],
    "fly": [("motion", 0.6)],
    "swim": [("motion", 0.6), ("water", 0.4)],
    "water": [("water", 0.8)],
    "sea": [("water", 0.8)],
    "river": [("water", 0.7)],
}

_SUFFIXES = ("ing", "ed", "es", "s")


def stem(word: str) -> str:
    """Tiny deterministic suffix stripper; just enough to merge inflections."""
    w = word.lower()
    for suffix in _SUFFIXES:
        if w.endswith(suffix) and len(w) - len(suffix) >= 3:
            base = w[: -len(suffix)]
            if len(base) >= 3 and base[-1] == base[-2] and base[-1] not in "aeiouls":
                base = base[:-1]  # running -> run
            return base
    return w


def _hash_direction(key: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(
        hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little"
    )
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class HashEmbedder:
    def __init__(self, dim: int = 384):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def word(self, text: str) -> np.ndarray:
        base = stem(text)
        v = _hash_direction("w:" + base, self.dim).copy()
        for concept, weight in CONCEPTS.get(base, ()):
            v += weight * _hash_direction("c:" + concept, self.dim)
        return (v / np.linalg.norm(v)).astype(np.float32)

    def sentence(self, text: str) -> np.ndarray:
        words = text.lower().split()
        if not words:
            raise ValueError("cannot embed empty text")
        mean = np.mean([self.word(w) for w in words], axis=0, dtype=np.float64)
        norm = np.linalg.norm(mean)
        if norm < 1e-12:
            return np.zeros(self.dim, dtype=np.float32)
        return (mean / norm).astype(np.float32)

    def embed(self, kind: str, texts: list[str]) -> list[np.ndarray]:
        fn = self.sentence if kind == "sentence" else self.word
        return [fn(t) for t in texts]
