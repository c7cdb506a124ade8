"""Embedding providers: deterministic mock, HTTP remote, and a binary file cache.

All vectors come from a pretrained model living outside this process; the
engine only ever sees the provider interface.  The mock provider exists so
every test and offline run is hermetic while still behaving like a real
encoder in the ways that matter: identical text gives identical vectors,
unrelated words are near-orthogonal, and fixture tables let tests author
exact similarity structure.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from mpve.semantic import NORM_EPS, DimensionMismatch, SemanticVector

KIND_SENTENCE = "sentence"
KIND_WORD = "word"
_KIND_CODES = {KIND_SENTENCE: 0, KIND_WORD: 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

CACHE_MAGIC = b"MPVE"
CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, count
_RECORD_HEAD = struct.Struct("<HI")      # kind, text byte length

ENDPOINT_ENV_VAR = "MPVE_EMBED_ENDPOINT"


class ProviderError(Exception):
    """Base class for embedding-provider errors."""


class EmptyText(ProviderError):
    """Embedding requested for an empty or whitespace-only string."""


class ProviderUnreachable(ProviderError):
    """The remote embedding endpoint could not be reached or failed."""


class CacheFormatError(ProviderError):
    """The on-disk vector cache is not readable."""


@dataclass(frozen=True)
class EmbeddingRequest:
    kind: str
    text: str

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown embedding kind {self.kind!r}")
        if not self.text.strip():
            raise EmptyText("cannot embed empty text")


@dataclass(frozen=True)
class ProviderConfig:
    """Declarative provider selection, buildable from CLI flags or JSON."""

    mode: str = "mock"                    # mock | remote | cached-mock | cached-remote
    endpoint: Optional[str] = None        # remote modes only
    dim: int = 384
    cache_path: Optional[str] = None      # cached modes only
    timeout_ms: int = 10_000
    max_inflight: int = 8

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        known = {"mock", "remote", "cached-mock", "cached-remote"}
        if self.mode not in known:
            raise ValueError(f"unknown provider mode {self.mode!r}")


def build_provider(cfg: ProviderConfig):
    """Instantiate the provider described by a config."""
    if cfg.mode == "mock":
        return MockProvider(dim=cfg.dim)
    if cfg.mode == "remote":
        return RemoteProvider(
            endpoint=_resolve_endpoint(cfg),
            dim=cfg.dim,
            timeout_ms=cfg.timeout_ms,
            max_inflight=cfg.max_inflight,
        )
    inner_cfg = ProviderConfig(
        mode=cfg.mode.removeprefix("cached-"),
        endpoint=cfg.endpoint,
        dim=cfg.dim,
        timeout_ms=cfg.timeout_ms,
        max_inflight=cfg.max_inflight,
    )
    if not cfg.cache_path:
        raise ValueError("cached mode requires cache_path")
    return CachedProvider(build_provider(inner_cfg), cfg.cache_path)


def _resolve_endpoint(cfg: ProviderConfig) -> str:
    endpoint = os.environ.get(ENDPOINT_ENV_VAR) or cfg.endpoint
    if not endpoint:
        raise ValueError("remote mode requires an endpoint (flag, config or MPVE_EMBED_ENDPOINT)")
    return endpoint


def _stable_seed(kind: str, text: str) -> int:
    digest = hashlib.blake2b(f"{kind}:{text}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class MockProvider:
    """Deterministic stand-in for a pretrained encoder.

    Word vectors are unit-norm pseudo-random draws keyed by a stable hash
    of (kind, lowercased text) through a counter-based generator, so equal
    text always embeds identically and distinct words land near-orthogonal
    in high dimension.  Sentence vectors are the normalized mean of the
    word vectors of the whitespace-split tokens, which makes identical
    sentences similarity 1 and overlapping sentences something in between.

    A fixture table may pin exact vectors for chosen (kind, text) keys so
    tests can author precise similarity structure.
    """

    def __init__(self, dim: int = 384, fixtures: Optional[dict] = None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._fixtures: dict[tuple[str, str], np.ndarray] = {}
        self.request_count = 0
        for (kind, text), vec in (fixtures or {}).items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (dim,):
                raise DimensionMismatch(f"fixture for {text!r} has shape {arr.shape}")
            self._fixtures[(kind, text.lower())] = arr

    def fingerprint(self) -> str:
        if not self._fixtures:
            return f"mock:dim={self.dim}"
        keys = hashlib.blake2b(
            repr(sorted(self._fixtures)).encode(), digest_size=4
        ).hexdigest()
        return f"mock:dim={self.dim}:fixtures={keys}"

    def _word_values(self, text: str) -> np.ndarray:
        key = (KIND_WORD, text.lower())
        if key in self._fixtures:
            return self._fixtures[key]
        rng = np.random.Generator(np.random.Philox(key=_stable_seed(*key)))
        v = rng.standard_normal(self.dim)
        return (v / np.linalg.norm(v)).astype(np.float32)

    def _sentence_values(self, text: str) -> np.ndarray:
        key = (KIND_SENTENCE, text.lower())
        if key in self._fixtures:
            return self._fixtures[key]
        words = text.lower().split()
        mean = np.mean([self._word_values(w) for w in words], axis=0, dtype=np.float64)
        norm = np.linalg.norm(mean)
        if norm < NORM_EPS:
            return np.zeros(self.dim, dtype=np.float32)
        return (mean / norm).astype(np.float32)

    def embed(self, req: EmbeddingRequest) -> SemanticVector:
        self.request_count += 1
        if req.kind == KIND_WORD:
            return SemanticVector(self._word_values(req.text))
        return SemanticVector(self._sentence_values(req.text))

    def embed_batch(self, reqs: Sequence[EmbeddingRequest]) -> list[SemanticVector]:
        return [self.embed(r) for r in reqs]

    def close(self):
        pass


class RemoteProvider:
    """Client for the sidecar's embedding endpoint.

    Wire protocol: POST {endpoint}/embed with {"kind": ..., "texts": [...]}
    returning {"dim": N, "vectors": [[...], ...]}.
    """

    BATCH_LIMIT = 256

    def __init__(self, endpoint: str, dim: int, timeout_ms: int = 10_000, max_inflight: int = 8):
        self.endpoint = endpoint.rstrip("/")
        self.dim = dim
        self.timeout_s = timeout_ms / 1000.0
        self.request_count = 0
        self._inflight = threading.BoundedSemaphore(max(1, max_inflight))

    def fingerprint(self) -> str:
        return f"remote:dim={self.dim}@{self.endpoint}"

    def _post(self, kind: str, texts: list[str]) -> list[np.ndarray]:
        import requests

        payload = {"kind": kind, "texts": texts}
        with self._inflight:
            self.request_count += 1
            try:
                resp = requests.post(
                    f"{self.endpoint}/embed", json=payload, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                raise ProviderUnreachable(f"embed endpoint {self.endpoint}: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderUnreachable(
                f"embed endpoint {self.endpoint} returned HTTP {resp.status_code}"
            )
        try:
            body = resp.json()
            returned_dim = int(body["dim"])
            vectors = body["vectors"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProviderUnreachable(f"malformed embed response: {exc}") from exc
        if returned_dim != self.dim:
            raise DimensionMismatch(
                f"endpoint returned dim {returned_dim}, expected {self.dim}"
            )
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise DimensionMismatch(f"endpoint returned vector of shape {arr.shape}")
            out.append(arr)
        if len(out) != len(texts):
            raise ProviderUnreachable("endpoint returned wrong number of vectors")
        return out

    def embed(self, req: EmbeddingRequest) -> SemanticVector:
        return SemanticVector(self._post(req.kind, [req.text])[0])

    def embed_batch(self, reqs: Sequence[EmbeddingRequest]) -> list[SemanticVector]:
        out: list[SemanticVector] = []
        i = 0
        while i < len(reqs):
            chunk = list(reqs[i : i + self.BATCH_LIMIT])
            # one wire call per homogeneous run of kinds
            j = 0
            while j < len(chunk):
                k = j
                kind = chunk[j].kind
                while k < len(chunk) and chunk[k].kind == kind:
                    k += 1
                vectors = self._post(kind, [r.text for r in chunk[j:k]])
                out.extend(SemanticVector(v) for v in vectors)
                j = k
            i += self.BATCH_LIMIT
        return out

    def close(self):
        pass


class CachedProvider:
    """Write-through file cache wrapping another provider.

    Single file, memory-mappable and append-friendly: a fixed header
    (magic, version, dim, count) followed by records of (kind, text length,
    UTF-8 text, little-endian float32 coordinates).  Lookups hit an
    in-memory table; misses go to the inner provider and are appended to
    the file as a journal past the header count.  close() compacts the
    journal by rewriting the file with the deduplicated record set.
    """

    def __init__(self, inner, cache_path: str):
        self.inner = inner
        self.dim = inner.dim
        self.cache_path = cache_path
        self._table: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()
        self._dirty = False
        if os.path.exists(cache_path) and os.path.getsize(cache_path) > 0:
            self._load()
        else:
            self._write_all()
        self._fh = open(cache_path, "ab")

    @property
    def request_count(self) -> int:
        return self.inner.request_count

    def fingerprint(self) -> str:
        return self.inner.fingerprint()  # the cache is transparent

    def _load(self):
        with open(self.cache_path, "rb") as fh:
            header = fh.read(_CACHE_HEADER.size)
            if len(header) < _CACHE_HEADER.size:
                raise CacheFormatError("cache file too short for header")
            magic, version, dim, count = _CACHE_HEADER.unpack(header)
            if magic != CACHE_MAGIC:
                raise CacheFormatError("bad cache magic")
            if version != CACHE_VERSION:
                raise CacheFormatError(f"unsupported cache version {version}")
            if dim != self.dim:
                raise DimensionMismatch(f"cache dim {dim}, provider dim {self.dim}")
            # `count` records were present at last compaction; any appended
            # journal records follow until EOF.  A truncated trailing record
            # (crash during append) is dropped.
            read = 0
            while True:
                head = fh.read(_RECORD_HEAD.size)
                if not head:
                    break
                if len(head) < _RECORD_HEAD.size:
                    break
                kind_code, text_len = _RECORD_HEAD.unpack(head)
                body = fh.read(text_len + 4 * dim)
                if len(body) < text_len + 4 * dim:
                    break
                if kind_code not in _KIND_NAMES:
                    raise CacheFormatError(f"unknown kind code {kind_code}")
                text = body[:text_len].decode("utf-8")
                values = np.frombuffer(body[text_len:], dtype="<f4").copy()
                self._table[(_KIND_NAMES[kind_code], text)] = values
                read += 1
            if read < count:
                raise CacheFormatError(
                    f"cache header promises {count} records, file holds {read}"
                )

    def _record_bytes(self, kind: str, text: str, values: np.ndarray) -> bytes:
        raw = text.encode("utf-8")
        return (
            _RECORD_HEAD.pack(_KIND_CODES[kind], len(raw))
            + raw
            + values.astype("<f4").tobytes()
        )

    def _write_all(self):
        tmp = self.cache_path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(
                _CACHE_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, self.dim, len(self._table))
            )
            for (kind, text), values in self._table.items():
                fh.write(self._record_bytes(kind, text, values))
        os.replace(tmp, self.cache_path)
        self._dirty = False

    def embed(self, req: EmbeddingRequest) -> SemanticVector:
        key = (req.kind, req.text)
        with self._lock:
            hit = self._table.get(key)
        if hit is not None:
            return SemanticVector(hit)
        vec = self.inner.embed(req)
        with self._lock:
            if key not in self._table:
                self._table[key] = vec.values
                self._fh.write(self._record_bytes(req.kind, req.text, vec.values))
                self._fh.flush()
                self._dirty = True
        return vec

    def embed_batch(self, reqs: Sequence[EmbeddingRequest]) -> list[SemanticVector]:
        return [self.embed(r) for r in reqs]

    def close(self):
        """Compact the appended journal into a clean record set."""
        self._fh.close()
        if self._dirty:
            self._write_all()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
