"""Provider tests: mock determinism, fixtures, cache round-trip, remote client."""

import itertools
import json
import threading

import numpy as np
import pytest

from mpve.embedding import (
    CachedProvider,
    CacheFormatError,
    EmbeddingRequest,
    EmptyText,
    KIND_SENTENCE,
    KIND_WORD,
    MockProvider,
    ProviderConfig,
    ProviderUnreachable,
    RemoteProvider,
    build_provider,
)
from mpve.semantic import DimensionMismatch, cosine_sim


def w(text):
    return EmbeddingRequest(KIND_WORD, text)


def s(text):
    return EmbeddingRequest(KIND_SENTENCE, text)


class TestEmbeddingRequest:
    def test_empty_text_rejected(self):
        with pytest.raises(EmptyText):
            EmbeddingRequest(KIND_WORD, "   ")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingRequest("paragraph", "hello")


class TestMockProvider:
    def test_deterministic(self):
        a = MockProvider(dim=8).embed(w("dog"))
        b = MockProvider(dim=8).embed(w("dog"))
        assert a == b

    def test_case_insensitive_key(self):
        p = MockProvider(dim=8)
        assert p.embed(w("Dog")) == p.embed(w("dog"))

    def test_single_word_sentence_collapses_to_word_vector(self):
        # sentence vectors are the normalized mean of word vectors, so a
        # one-word sentence coincides with its word embedding by design
        p = MockProvider(dim=8)
        assert p.embed(s("dog")) == p.embed(w("dog"))
        assert p.embed(s("dog runs")) != p.embed(w("dog"))

    def test_unit_norm(self):
        v = MockProvider(dim=384).embed(w("zebra"))
        assert v.norm() == pytest.approx(1.0, abs=1e-6)

    def test_distinct_words_near_orthogonal_in_384(self):
        # bound chosen empirically: max |cos| over 1035 pairs was ~0.16
        p = MockProvider(dim=384)
        words = [f"token{i}" for i in range(46)]
        vecs = {word: p.embed(w(word)) for word in words}
        sims = [
            cosine_sim(vecs[a], vecs[b]) for a, b in itertools.combinations(words, 2)
        ]
        assert len(sims) >= 1000
        assert all(-0.35 < x < 0.35 for x in sims)

    def test_sentence_is_normalized_word_mean(self):
        p = MockProvider(dim=16)
        mean = np.mean(
            [p.embed(w(t)).values for t in ["a", "dog", "runs"]], axis=0, dtype=np.float64
        )
        expected = (mean / np.linalg.norm(mean)).astype(np.float32)
        assert np.array_equal(p.embed(s("A dog runs")).values, expected)

    def test_identical_sentences_sim_one(self):
        p = MockProvider(dim=32)
        a = p.embed(s("a cat sleeps"))
        b = p.embed(s("A cat sleeps"))
        assert cosine_sim(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_fixture_table(self):
        e0 = np.zeros(4, dtype=np.float32)
        e0[0] = 1.0
        p = MockProvider(dim=4, fixtures={(KIND_WORD, "run"): e0})
        assert np.array_equal(p.embed(w("RUN")).values, e0)

    def test_fixture_authored_similarity(self):
        # author cosine 0.9 between two words directly
        a = np.array([1.0, 0.0, 0.0, 0.0], dtype=np.float32)
        b = np.array([0.9, np.sqrt(1 - 0.81), 0.0, 0.0], dtype=np.float32)
        p = MockProvider(
            dim=4, fixtures={(KIND_WORD, "run"): a, (KIND_WORD, "sprint"): b}
        )
        assert cosine_sim(p.embed(w("run")), p.embed(w("sprint"))) == pytest.approx(
            0.9, abs=1e-6
        )

    def test_fixture_changes_fingerprint(self):
        plain = MockProvider(dim=4)
        fixed = MockProvider(dim=4, fixtures={(KIND_WORD, "x"): np.ones(4, np.float32)})
        assert plain.fingerprint() != fixed.fingerprint()

    def test_batch_matches_single(self):
        p = MockProvider(dim=8)
        batch = p.embed_batch([w("a"), w("b"), w("a")])
        assert batch[0] == batch[2]
        assert batch[0] == p.embed(w("a"))
        assert p.embed_batch([]) == []


class TestCachedProvider:
    def test_second_call_hits_cache(self, tmp_path):
        inner = MockProvider(dim=8)
        cache = CachedProvider(inner, str(tmp_path / "vectors.bin"))
        v1 = cache.embed(w("dog"))
        count = inner.request_count
        v2 = cache.embed(w("dog"))
        assert inner.request_count == count  # zero inner calls on the hit
        assert v1 == v2

    def test_cache_survives_reopen_bit_identical(self, tmp_path):
        path = str(tmp_path / "vectors.bin")
        with CachedProvider(MockProvider(dim=8), path) as cache:
            original = cache.embed(w("dog"))
            cache.embed(s("a dog runs"))

        fresh_inner = MockProvider(dim=8)
        with CachedProvider(fresh_inner, path) as cache2:
            reread = cache2.embed(w("dog"))
            assert fresh_inner.request_count == 0
            assert np.array_equal(reread.values, original.values)

    def test_journal_then_compaction(self, tmp_path):
        import struct

        path = str(tmp_path / "vectors.bin")
        cache = CachedProvider(MockProvider(dim=4), path)
        cache.embed(w("a"))
        cache.embed(w("b"))
        with open(path, "rb") as fh:
            count_before = struct.unpack("<Q", fh.read(20)[12:])[0]
        assert count_before == 0  # records live in the journal until close
        cache.close()
        with open(path, "rb") as fh:
            count_after = struct.unpack("<Q", fh.read(20)[12:])[0]
        assert count_after == 2

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "vectors.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(CacheFormatError):
            CachedProvider(MockProvider(dim=4), str(path))

    def test_dim_mismatch_rejected(self, tmp_path):
        path = str(tmp_path / "vectors.bin")
        CachedProvider(MockProvider(dim=4), path).close()
        with pytest.raises(DimensionMismatch):
            CachedProvider(MockProvider(dim=8), path)

    def test_concurrent_readers_single_writer(self, tmp_path):
        cache = CachedProvider(MockProvider(dim=16), str(tmp_path / "v.bin"))
        words = [f"w{i}" for i in range(40)]
        errors = []

        def worker():
            try:
                for word in words:
                    cache.embed(w(word))
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(cache._table) == len(words)


class _StubEmbedServer:
    """Minimal in-process HTTP server speaking the embed wire protocol."""

    def __init__(self, dim=8, wrong_dim=False):
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                outer.calls.append(body)
                dim_out = outer.dim + (1 if wrong_dim else 0)
                vectors = [[0.5] * dim_out for _ in body["texts"]]
                payload = json.dumps({"dim": dim_out, "vectors": vectors}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.dim = dim
        self.calls = []
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()
        self.endpoint = f"http://127.0.0.1:{self.server.server_port}"

    def close(self):
        self.server.shutdown()


class TestRemoteProvider:
    def test_round_trip(self):
        srv = _StubEmbedServer(dim=8)
        try:
            p = RemoteProvider(srv.endpoint, dim=8)
            v = p.embed(w("dog"))
            assert v.dim == 8
            assert srv.calls == [{"kind": "word", "texts": ["dog"]}]
        finally:
            srv.close()

    def test_batch_single_wire_call(self):
        srv = _StubEmbedServer(dim=8)
        try:
            p = RemoteProvider(srv.endpoint, dim=8)
            out = p.embed_batch([w("a"), w("b"), w("c")])
            assert len(out) == 3
            assert len(srv.calls) == 1
        finally:
            srv.close()

    def test_unreachable(self):
        p = RemoteProvider("http://127.0.0.1:1", dim=8, timeout_ms=200)
        with pytest.raises(ProviderUnreachable):
            p.embed(w("dog"))

    def test_wrong_dim_rejected(self):
        srv = _StubEmbedServer(dim=8, wrong_dim=True)
        try:
            p = RemoteProvider(srv.endpoint, dim=8)
            with pytest.raises(DimensionMismatch):
                p.embed(w("dog"))
        finally:
            srv.close()

    def test_env_var_overrides_endpoint(self, monkeypatch):
        srv = _StubEmbedServer(dim=8)
        try:
            monkeypatch.setenv("MPVE_EMBED_ENDPOINT", srv.endpoint)
            p = build_provider(ProviderConfig(mode="remote", endpoint="http://example.invalid", dim=8))
            assert p.endpoint == srv.endpoint
            p.embed(w("dog"))
            assert len(srv.calls) == 1
        finally:
            srv.close()


class TestBuildProvider:
    def test_mock(self):
        p = build_provider(ProviderConfig(mode="mock", dim=12))
        assert isinstance(p, MockProvider) and p.dim == 12

    def test_cached_mock(self, tmp_path):
        cfg = ProviderConfig(mode="cached-mock", dim=8, cache_path=str(tmp_path / "c.bin"))
        p = build_provider(cfg)
        assert isinstance(p, CachedProvider)
        big_batch = [w(f"t{i}") for i in range(10_000)]
        assert len(p.embed_batch(big_batch)) == 10_000  # no remote traffic involved

    def test_cached_requires_path(self):
        with pytest.raises(ValueError):
            build_provider(ProviderConfig(mode="cached-mock", dim=8))
