"""Corpus index tests: ingest, persistence round-trip, fault injection, scans."""

import json
import struct
import warnings

import numpy as np
import pytest

from mpve.embedding import MockProvider
from mpve.index import (
    CorpusIndex,
    CorruptFile,
    DuplicateId,
    EmptyIndex,
    FileParseSource,
    FingerprintMismatchWarning,
    FormatVersionMismatch,
    ManifestSyntax,
    build_index,
    check_fingerprint,
    ingest,
    load,
    save,
)
from mpve.semantic import PromptSemantics

from helpers import fixture_path, random_semantics, synth_corpus


def manifest_lines(*records):
    return [json.dumps(r) for r in records]


REC1 = {"id": "vid1", "caption": "A dog chases a ball", "video_ref": "v://1", "fps": 24.0}
REC2 = {"id": "vid2", "caption": "The sun rises", "video_ref": "v://2", "duration_s": 10.5}
REC3 = {"id": "vid3", "caption": "A beautiful red barn", "video_ref": "v://3"}


@pytest.fixture
def parse_source():
    return FileParseSource.from_path(fixture_path("parses.conllu"))


class TestIngest:
    def test_three_records(self, small_provider, parse_source):
        idx = ingest(manifest_lines(REC1, REC2, REC3), small_provider, parse_source)
        assert len(idx) == 3
        assert idx.dim == small_provider.dim
        assert idx.ids == ["vid1", "vid2", "vid3"]
        sem = idx.get("vid1").semantics
        assert len(sem.units) == 1
        assert sem.units[0].motion_text == "chase"
        assert sem.units[0].actor_text == "dog"

    def test_caption_without_parse_kept_unitless(self, small_provider, parse_source, caplog):
        rec = {"id": "x", "caption": "Unparseable gibberish zzz", "video_ref": "v://x"}
        with caplog.at_level("WARNING"):
            idx = ingest(manifest_lines(rec), small_provider, parse_source)
        assert len(idx) == 1
        assert idx.get("x").semantics.units == ()
        assert any("without units" in r.message for r in caplog.records)

    def test_duplicate_id(self, small_provider, parse_source):
        with pytest.raises(DuplicateId) as err:
            ingest(manifest_lines(REC1, REC1), small_provider, parse_source)
        assert "vid1" in str(err.value)

    def test_bad_json(self, small_provider):
        with pytest.raises(ManifestSyntax) as err:
            ingest(["{not json"], small_provider)
        assert err.value.line_no == 1

    def test_missing_keys(self, small_provider):
        with pytest.raises(ManifestSyntax):
            ingest([json.dumps({"id": "a", "caption": "b"})], small_provider)

    def test_non_numeric_fps(self, small_provider):
        rec = dict(REC1, fps="fast")
        with pytest.raises(ManifestSyntax):
            ingest(manifest_lines(rec), small_provider)

    def test_blank_lines_skipped(self, small_provider, parse_source):
        lines = ["", json.dumps(REC1), "   ", json.dumps(REC2)]
        idx = ingest(lines, small_provider, parse_source)
        assert len(idx) == 2


class TestPersistence:
    def test_empty_round_trip(self, tmp_path, small_provider):
        idx = ingest([], small_provider)
        path = str(tmp_path / "empty.mpix")
        save(idx, path)
        assert load(path).observably_equal(idx)

    def test_small_round_trip(self, tmp_path, small_provider, parse_source):
        idx = ingest(manifest_lines(REC1, REC2, REC3), small_provider, parse_source)
        path = str(tmp_path / "small.mpix")
        save(idx, path)
        loaded = load(path)
        assert loaded.observably_equal(idx)
        assert loaded.get("vid2").duration_s == 10.5
        assert loaded.get("vid1").fps == 24.0

    def test_synthetic_round_trip(self, tmp_path):
        idx = synth_corpus(seed=7, n=500, dim=24)
        path = str(tmp_path / "s.mpix")
        save(idx, path)
        assert load(path).observably_equal(idx)

    def test_truncation_detected(self, tmp_path):
        idx = synth_corpus(seed=3, n=20, dim=8)
        path = str(tmp_path / "t.mpix")
        save(idx, path)
        raw = open(path, "rb").read()
        open(path, "wb").write(raw[: len(raw) - 37])
        with pytest.raises(CorruptFile):
            load(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mpix"
        path.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK")
        with pytest.raises(CorruptFile):
            load(str(path))

    def test_version_mismatch(self, tmp_path):
        idx = synth_corpus(seed=3, n=2, dim=8)
        path = str(tmp_path / "v.mpix")
        save(idx, path)
        raw = bytearray(open(path, "rb").read())
        raw[4:8] = struct.pack("<I", 99)
        open(path, "wb").write(bytes(raw))
        with pytest.raises(FormatVersionMismatch):
            load(path)

    def test_corruption_never_wrong_answer(self, tmp_path):
        """Any mid-file truncation either loads equal or raises CorruptFile."""
        idx = synth_corpus(seed=11, n=10, dim=8)
        path = str(tmp_path / "fz.mpix")
        save(idx, path)
        raw = open(path, "rb").read()
        for cut in range(1, len(raw), max(1, len(raw) // 60)):
            open(path, "wb").write(raw[:cut])
            try:
                loaded = load(path)
            except (CorruptFile, FormatVersionMismatch):
                continue
            assert loaded.observably_equal(idx)  # pragma: no cover

    def test_fingerprint_mismatch_warns_only(self):
        idx = synth_corpus(seed=1, n=3, dim=8)
        provider = MockProvider(dim=8)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ok = check_fingerprint(idx, provider)
        assert not ok
        assert any(issubclass(c.category, FingerprintMismatchWarning) for c in caught)


class TestScan:
    def test_visits_all_in_order(self):
        idx = synth_corpus(seed=5, n=50, dim=8)
        seen = []
        idx.scan(lambda e: seen.append(e.id))
        assert seen == idx.ids

    def test_parallel_equals_serial(self):
        idx = synth_corpus(seed=5, n=101, dim=8)
        serial = idx.map_entries(lambda e: e.id, workers=1)
        parallel = idx.map_entries(lambda e: e.id, workers=4)
        assert serial == parallel == idx.ids

    def test_subset_preserves_order_and_vectors(self):
        idx = synth_corpus(seed=9, n=40, dim=8)
        sub = idx.subset([3, 7, 20])
        assert sub.ids == [idx.ids[3], idx.ids[7], idx.ids[20]]
        assert np.array_equal(sub.totals[1], idx.totals[7])
        for new_pos, old_pos in enumerate([3, 7, 20]):
            a = sub.semantics_at(new_pos)
            b = idx.semantics_at(old_pos)
            assert len(a.units) == len(b.units)
            assert a.core_index == b.core_index


class TestBuildIndex:
    def test_dim_checked(self):
        rng = np.random.default_rng(0)
        sem = random_semantics(rng, dim=8)
        with pytest.raises(ValueError):
            build_index([("a", "c", "v", None, None, sem)], dim=16, provider_fingerprint="x")

    def test_entry_reconstruction(self):
        rng = np.random.default_rng(0)
        sems = [random_semantics(rng, dim=8, p_unitless=0.0) for _ in range(5)]
        idx = build_index(
            [(f"id{i}", f"cap{i}", f"v{i}", 1.0, 30.0, s) for i, s in enumerate(sems)],
            dim=8,
            provider_fingerprint="t",
        )
        for i, sem in enumerate(sems):
            rebuilt = idx.semantics_at(i)
            assert rebuilt.core_index == sem.core_index
            assert len(rebuilt.units) == len(sem.units)
            for ru, ou in zip(rebuilt.units, sem.units):
                assert ru.motion == ou.motion
                assert (ru.actor is None) == (ou.actor is None)
                if ou.actor is not None:
                    assert ru.actor == ou.actor
