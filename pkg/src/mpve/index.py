"""Captioned-video corpus index: ingestion, persistence, and full scans.

Caption semantics are computed once at build time and stored columnar so
queries never touch the embedding provider for corpus text.  Vectors live
in flat float32 matrices (sentence vectors in one, unit component vectors
in ragged blocks addressed by per-entry offsets), which is what makes the
exact full-corpus similarity pass cheap.

The on-disk format is a single file: fixed header, an offset table giving
O(1) access to any entry blob, then the blobs themselves.  All integers
are little-endian fixed width, all vectors raw float32, so a save/load
round trip is bit-identical.
"""

from __future__ import annotations

import io
import json
import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from mpve.parsing import ParsedSentence
from mpve.semantic import PromptSemantics, SemanticUnit, SemanticVector
from mpve.vectorizer import vectorize

logger = logging.getLogger(__name__)

INDEX_MAGIC = b"MPIX"
INDEX_VERSION = 1
_HEADER = struct.Struct("<4sIIQI")  # magic, version, dim, count, fingerprint length
_U32 = struct.Struct("<I")
_I32 = struct.Struct("<i")
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")

_FLAG_DURATION = 1
_FLAG_FPS = 2
_PRESENT_MOT = 1
_PRESENT_ATR = 2
_PRESENT_REC = 4


class IndexError_(Exception):
    """Base class for index errors (trailing underscore avoids the builtin)."""


class DuplicateId(IndexError_):
    def __init__(self, entry_id: str):
        super().__init__(f"duplicate manifest id {entry_id!r}")
        self.entry_id = entry_id


class ManifestSyntax(IndexError_):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"manifest line {line_no}: {message}")
        self.line_no = line_no


class FormatVersionMismatch(IndexError_):
    pass


class CorruptFile(IndexError_):
    def __init__(self, offset: int, message: str = "truncated or inconsistent data"):
        super().__init__(f"corrupt index file at byte {offset}: {message}")
        self.offset = offset


class FingerprintMismatchWarning(UserWarning):
    """Query-time provider differs from the one the index was built with."""


class EmptyIndex(IndexError_):
    """The operation needs at least one entry."""


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    caption: str
    video_ref: str
    duration_s: Optional[float]
    fps: Optional[float]
    semantics: PromptSemantics


class CorpusIndex:
    """Immutable, columnar collection of caption semantics.

    Readers need no locks.  ``totals`` is an (N, dim) float32 matrix; unit
    component vectors sit in (U, dim) matrices shared by all entries, with
    ``unit_offsets`` delimiting each entry's slice and ``unit_mask``
    flagging which of motion/actor/recipient exist per unit.
    """

    def __init__(
        self,
        dim: int,
        provider_fingerprint: str,
        ids: list[str],
        captions: list[str],
        video_refs: list[str],
        durations: list[Optional[float]],
        fps: list[Optional[float]],
        totals: np.ndarray,
        unit_offsets: np.ndarray,
        unit_mot: np.ndarray,
        unit_atr: np.ndarray,
        unit_rec: np.ndarray,
        unit_mask: np.ndarray,
        unit_texts: list[tuple[Optional[str], Optional[str], Optional[str]]],
        unit_spans: np.ndarray,
        core_index: np.ndarray,
    ):
        n = len(ids)
        assert totals.shape == (n, dim) and unit_offsets.shape == (n + 1,)
        self.dim = dim
        self.provider_fingerprint = provider_fingerprint
        self.ids = ids
        self.captions = captions
        self.video_refs = video_refs
        self.durations = durations
        self.fps = fps
        self.totals = np.ascontiguousarray(totals, dtype=np.float32)
        self.unit_offsets = unit_offsets.astype(np.int64)
        self.unit_mot = np.ascontiguousarray(unit_mot, dtype=np.float32)
        self.unit_atr = np.ascontiguousarray(unit_atr, dtype=np.float32)
        self.unit_rec = np.ascontiguousarray(unit_rec, dtype=np.float32)
        self.unit_mask = unit_mask.astype(bool)
        self.unit_texts = unit_texts
        self.unit_spans = unit_spans.astype(np.int32)
        self.core_index = core_index.astype(np.int32)
        self._id_to_pos = {eid: i for i, eid in enumerate(ids)}
        # float64 norms, precomputed once for the similarity passes; chunked
        # einsum avoids materializing a float64 copy of the whole matrix
        self.total_norms = np.empty(n, dtype=np.float64)
        for lo in range(0, n, 262_144):
            block = self.totals[lo : lo + 262_144]
            self.total_norms[lo : lo + 262_144] = np.sqrt(
                np.einsum("ij,ij->i", block, block, dtype=np.float64)
            )
        # absolute row of each entry's core unit in the unit matrices (-1 if none)
        rows = self.unit_offsets[:-1] + self.core_index
        self.core_rows = np.where(self.core_index >= 0, rows, -1).astype(np.int64)

    def __len__(self) -> int:
        return len(self.ids)

    def position_of(self, entry_id: str) -> int:
        return self._id_to_pos[entry_id]

    def _unit_at(self, row: int) -> SemanticUnit:
        mot_p, atr_p, rec_p = self.unit_mask[row]
        mot_t, atr_t, rec_t = self.unit_texts[row]
        span = (int(self.unit_spans[row, 0]), int(self.unit_spans[row, 1]))
        return SemanticUnit(
            motion=SemanticVector(self.unit_mot[row]),
            actor=SemanticVector(self.unit_atr[row]) if atr_p else None,
            recipient=SemanticVector(self.unit_rec[row]) if rec_p else None,
            motion_text=mot_t,
            actor_text=atr_t,
            recipient_text=rec_t,
            source_span=span,
        )

    def semantics_at(self, pos: int) -> PromptSemantics:
        lo, hi = int(self.unit_offsets[pos]), int(self.unit_offsets[pos + 1])
        units = tuple(self._unit_at(r) for r in range(lo, hi))
        core = int(self.core_index[pos]) if self.core_index[pos] >= 0 else None
        return PromptSemantics(
            total=SemanticVector(self.totals[pos]),
            units=units,
            core_index=core,
            raw_text=self.captions[pos],
        )

    def entry(self, pos: int) -> CorpusEntry:
        return CorpusEntry(
            id=self.ids[pos],
            caption=self.captions[pos],
            video_ref=self.video_refs[pos],
            duration_s=self.durations[pos],
            fps=self.fps[pos],
            semantics=self.semantics_at(pos),
        )

    def get(self, entry_id: str) -> CorpusEntry:
        return self.entry(self._id_to_pos[entry_id])

    def scan(self, visitor: Callable[[CorpusEntry], None]) -> None:
        """Visit every entry exactly once, in stable ingestion order."""
        for pos in range(len(self)):
            visitor(self.entry(pos))

    def map_entries(self, fn: Callable[[CorpusEntry], object], workers: int = 1) -> list:
        """Apply fn to every entry; results come back in ingestion order.

        With workers > 1 the scan is partitioned into contiguous chunks
        processed concurrently and merged deterministically.
        """
        n = len(self)
        if workers <= 1 or n < 2:
            return [fn(self.entry(pos)) for pos in range(n)]
        chunk = (n + workers - 1) // workers
        spans = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]

        def run(span):
            lo, hi = span
            return [fn(self.entry(pos)) for pos in range(lo, hi)]

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, spans))
        return [item for part in parts for item in part]

    def subset(self, positions: Sequence[int]) -> "CorpusIndex":
        """New index holding the given entries, in the given order."""
        positions = list(positions)
        take = np.asarray(positions, dtype=np.int64)
        new_offsets = [0]
        rows: list[int] = []
        for pos in positions:
            lo, hi = int(self.unit_offsets[pos]), int(self.unit_offsets[pos + 1])
            rows.extend(range(lo, hi))
            new_offsets.append(len(rows))
        row_idx = np.asarray(rows, dtype=np.int64)
        return CorpusIndex(
            dim=self.dim,
            provider_fingerprint=self.provider_fingerprint,
            ids=[self.ids[p] for p in positions],
            captions=[self.captions[p] for p in positions],
            video_refs=[self.video_refs[p] for p in positions],
            durations=[self.durations[p] for p in positions],
            fps=[self.fps[p] for p in positions],
            totals=self.totals[take] if len(positions) else np.zeros((0, self.dim), np.float32),
            unit_offsets=np.asarray(new_offsets, dtype=np.int64),
            unit_mot=self.unit_mot[row_idx] if rows else np.zeros((0, self.dim), np.float32),
            unit_atr=self.unit_atr[row_idx] if rows else np.zeros((0, self.dim), np.float32),
            unit_rec=self.unit_rec[row_idx] if rows else np.zeros((0, self.dim), np.float32),
            unit_mask=self.unit_mask[row_idx] if rows else np.zeros((0, 3), bool),
            unit_texts=[self.unit_texts[r] for r in rows],
            unit_spans=self.unit_spans[row_idx] if rows else np.zeros((0, 2), np.int32),
            core_index=self.core_index[take] if len(positions) else np.zeros(0, np.int32),
        )

    def observably_equal(self, other: "CorpusIndex") -> bool:
        """Bit-exact equality of all persisted state (used by round-trip tests)."""
        return (
            self.dim == other.dim
            and self.provider_fingerprint == other.provider_fingerprint
            and self.ids == other.ids
            and self.captions == other.captions
            and self.video_refs == other.video_refs
            and self.durations == other.durations
            and self.fps == other.fps
            and np.array_equal(self.totals, other.totals)
            and np.array_equal(self.unit_offsets, other.unit_offsets)
            and np.array_equal(self.unit_mot, other.unit_mot)
            and np.array_equal(self.unit_atr, other.unit_atr)
            and np.array_equal(self.unit_rec, other.unit_rec)
            and np.array_equal(self.unit_mask, other.unit_mask)
            and self.unit_texts == other.unit_texts
            and np.array_equal(self.unit_spans, other.unit_spans)
            and np.array_equal(self.core_index, other.core_index)
        )


def build_index(
    entries: Iterable[tuple[str, str, str, Optional[float], Optional[float], PromptSemantics]],
    dim: int,
    provider_fingerprint: str,
) -> CorpusIndex:
    """Assemble a CorpusIndex from (id, caption, video_ref, duration, fps, semantics) rows."""
    ids: list[str] = []
    captions: list[str] = []
    video_refs: list[str] = []
    durations: list[Optional[float]] = []
    fps_list: list[Optional[float]] = []
    totals: list[np.ndarray] = []
    unit_offsets = [0]
    mot_rows: list[np.ndarray] = []
    atr_rows: list[np.ndarray] = []
    rec_rows: list[np.ndarray] = []
    masks: list[tuple[bool, bool, bool]] = []
    texts: list[tuple[Optional[str], Optional[str], Optional[str]]] = []
    spans: list[tuple[int, int]] = []
    cores: list[int] = []

    zero = np.zeros(dim, dtype=np.float32)
    seen: set[str] = set()
    for entry_id, caption, video_ref, duration, fps, sem in entries:
        if entry_id in seen:
            raise DuplicateId(entry_id)
        seen.add(entry_id)
        if sem.total.dim != dim:
            raise ValueError(f"entry {entry_id}: vector dim {sem.total.dim} != index dim {dim}")
        ids.append(entry_id)
        captions.append(caption)
        video_refs.append(video_ref)
        durations.append(duration)
        fps_list.append(fps)
        totals.append(sem.total.values)
        for unit in sem.units:
            mot_rows.append(unit.motion.values)
            atr_rows.append(unit.actor.values if unit.actor is not None else zero)
            rec_rows.append(unit.recipient.values if unit.recipient is not None else zero)
            masks.append((True, unit.actor is not None, unit.recipient is not None))
            texts.append((unit.motion_text, unit.actor_text, unit.recipient_text))
            spans.append(unit.source_span)
        unit_offsets.append(len(mot_rows))
        cores.append(sem.core_index if sem.core_index is not None else -1)

    n_units = len(mot_rows)
    return CorpusIndex(
        dim=dim,
        provider_fingerprint=provider_fingerprint,
        ids=ids,
        captions=captions,
        video_refs=video_refs,
        durations=durations,
        fps=fps_list,
        totals=np.vstack(totals) if totals else np.zeros((0, dim), np.float32),
        unit_offsets=np.asarray(unit_offsets, dtype=np.int64),
        unit_mot=np.vstack(mot_rows) if n_units else np.zeros((0, dim), np.float32),
        unit_atr=np.vstack(atr_rows) if n_units else np.zeros((0, dim), np.float32),
        unit_rec=np.vstack(rec_rows) if n_units else np.zeros((0, dim), np.float32),
        unit_mask=np.asarray(masks, dtype=bool) if n_units else np.zeros((0, 3), bool),
        unit_texts=texts,
        unit_spans=np.asarray(spans, dtype=np.int32) if n_units else np.zeros((0, 2), np.int32),
        core_index=np.asarray(cores, dtype=np.int32),
    )


# --- manifest ingestion ----------------------------------------------------

class ParseSource:
    """Source of dependency parses for caption text."""

    def parses_for(self, entry_id: str, caption: str) -> Optional[list[ParsedSentence]]:
        raise NotImplementedError


class NullParseSource(ParseSource):
    """No parses available: every caption ingests unit-less."""

    def parses_for(self, entry_id, caption):
        return None


class FileParseSource(ParseSource):
    """CoNLL-U file with `# sent_id = <manifest id>` comments binding
    sentences (possibly several per id) to manifest entries.  Lookups by
    exact sentence text serve prompt parsing."""

    def __init__(self, sentences: Sequence[ParsedSentence]):
        self.by_id: dict[str, list[ParsedSentence]] = {}
        self.by_text: dict[str, list[ParsedSentence]] = {}
        for s in sentences:
            if s.sent_id is not None:
                self.by_id.setdefault(s.sent_id, []).append(s)
            self.by_text.setdefault(s.text, [s])

    @classmethod
    def from_path(cls, path: str) -> "FileParseSource":
        from mpve.parsing import parse_conllu

        with open(path, "r", encoding="utf-8") as fh:
            return cls(parse_conllu(fh))

    def parses_for(self, entry_id, caption):
        if entry_id and entry_id in self.by_id:
            return self.by_id[entry_id]
        return self.by_text.get(caption)


class SidecarParseSource(ParseSource):
    """Fetches parses from the NLP sidecar's /parse endpoint."""

    def __init__(self, endpoint: str, timeout_s: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s

    def parses_for(self, entry_id, caption):
        import requests

        from mpve.embedding import ProviderUnreachable
        from mpve.parsing import parse_conllu

        try:
            resp = requests.post(
                f"{self.endpoint}/parse", json={"texts": [caption]}, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise ProviderUnreachable(f"parse endpoint {self.endpoint}: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderUnreachable(
                f"parse endpoint {self.endpoint} returned HTTP {resp.status_code}"
            )
        blocks = resp.json().get("conllu", [])
        sentences: list[ParsedSentence] = []
        for block in blocks:
            sentences.extend(parse_conllu(block))
        return sentences


def ingest(
    manifest_lines: Iterable[str],
    provider,
    parse_source: Optional[ParseSource] = None,
) -> CorpusIndex:
    """Build an index from a JSON-lines manifest.

    Each line is an object with required keys id, caption, video_ref and
    optional duration_s, fps.  Captions whose parse is unavailable are kept
    with empty unit sets (and logged), never dropped.
    """
    if parse_source is None:
        parse_source = NullParseSource()
    rows = []
    for line_no, raw in enumerate(manifest_lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestSyntax(line_no, f"invalid JSON: {exc}") from None
        if not isinstance(record, dict):
            raise ManifestSyntax(line_no, "record is not a JSON object")
        missing = {"id", "caption", "video_ref"} - record.keys()
        if missing:
            raise ManifestSyntax(line_no, f"missing keys {sorted(missing)}")
        entry_id = record["id"]
        caption = record["caption"]
        video_ref = record["video_ref"]
        if not all(isinstance(v, str) for v in (entry_id, caption, video_ref)):
            raise ManifestSyntax(line_no, "id, caption and video_ref must be strings")
        duration = record.get("duration_s")
        fps = record.get("fps")
        for name, value in (("duration_s", duration), ("fps", fps)):
            if value is not None and not isinstance(value, (int, float)):
                raise ManifestSyntax(line_no, f"{name} must be a number")
        duration = float(duration) if duration is not None else None
        fps = float(fps) if fps is not None else None

        sentences = parse_source.parses_for(entry_id, caption)
        if not sentences:
            logger.warning("no parse for entry %r; ingesting without units", entry_id)
            sentences = []
        sem = vectorize(caption, sentences, provider)
        rows.append((entry_id, caption, video_ref, duration, fps, sem))
    return build_index(rows, dim=provider.dim, provider_fingerprint=provider.fingerprint())


# --- persistence -------------------------------------------------------------

def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return _U32.pack(len(raw)) + raw


def _pack_opt_str(value: Optional[str]) -> bytes:
    if value is None:
        return _I32.pack(-1)
    raw = value.encode("utf-8")
    return _I32.pack(len(raw)) + raw


def save(index: CorpusIndex, path: str) -> None:
    """Write the index to a single file, atomically (temp file + rename)."""
    blobs: list[bytes] = []
    for pos in range(len(index)):
        buf = io.BytesIO()
        buf.write(_pack_str(index.ids[pos]))
        buf.write(_pack_str(index.captions[pos]))
        buf.write(_pack_str(index.video_refs[pos]))
        flags = (_FLAG_DURATION if index.durations[pos] is not None else 0) | (
            _FLAG_FPS if index.fps[pos] is not None else 0
        )
        buf.write(struct.pack("<B", flags))
        if index.durations[pos] is not None:
            buf.write(_F64.pack(index.durations[pos]))
        if index.fps[pos] is not None:
            buf.write(_F64.pack(index.fps[pos]))
        buf.write(index.totals[pos].astype("<f4").tobytes())
        buf.write(_I32.pack(int(index.core_index[pos])))
        lo, hi = int(index.unit_offsets[pos]), int(index.unit_offsets[pos + 1])
        buf.write(_U32.pack(hi - lo))
        for row in range(lo, hi):
            mot_p, atr_p, rec_p = index.unit_mask[row]
            presence = (
                (_PRESENT_MOT if mot_p else 0)
                | (_PRESENT_ATR if atr_p else 0)
                | (_PRESENT_REC if rec_p else 0)
            )
            buf.write(struct.pack("<B", presence))
            buf.write(struct.pack("<II", int(index.unit_spans[row, 0]), int(index.unit_spans[row, 1])))
            if mot_p:
                buf.write(index.unit_mot[row].astype("<f4").tobytes())
            if atr_p:
                buf.write(index.unit_atr[row].astype("<f4").tobytes())
            if rec_p:
                buf.write(index.unit_rec[row].astype("<f4").tobytes())
            for text in index.unit_texts[row]:
                buf.write(_pack_opt_str(text))
        blobs.append(buf.getvalue())

    fp_raw = index.provider_fingerprint.encode("utf-8")
    header = _HEADER.pack(INDEX_MAGIC, INDEX_VERSION, index.dim, len(index), len(fp_raw))
    table_start = len(header) + len(fp_raw)
    blob_start = table_start + 8 * len(index)
    offsets = []
    cursor = blob_start
    for blob in blobs:
        offsets.append(cursor)
        cursor += len(blob)

    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(fp_raw)
        for off in offsets:
            fh.write(_U64.pack(off))
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


class _Reader:
    """Bounds-checked cursor over the index file bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptFile(self.pos, f"needed {n} bytes, file ends early")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def i32(self) -> int:
        return _I32.unpack(self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def f64(self) -> float:
        return _F64.unpack(self.take(8))[0]

    def string(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptFile(self.pos, "invalid UTF-8 in string field") from None

    def opt_string(self) -> Optional[str]:
        n = self.i32()
        if n < 0:
            return None
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptFile(self.pos, "invalid UTF-8 in string field") from None

    def vector(self, dim: int) -> np.ndarray:
        raw = self.take(4 * dim)
        return np.frombuffer(raw, dtype="<f4").copy()


def load(path: str) -> CorpusIndex:
    """Read an index written by :func:`save`."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise CorruptFile(0, "file shorter than header")
    magic, version, dim, count, fp_len = _HEADER.unpack_from(data, 0)
    if magic != INDEX_MAGIC:
        raise CorruptFile(0, "bad magic (not an index file)")
    if version != INDEX_VERSION:
        raise FormatVersionMismatch(
            f"index format version {version}, this build reads {INDEX_VERSION}"
        )
    reader = _Reader(data)
    reader.pos = _HEADER.size
    fingerprint = reader.take(fp_len).decode("utf-8")
    offsets = [
        _U64.unpack(reader.take(8))[0] for _ in range(count)
    ]

    ids, captions, video_refs = [], [], []
    durations: list[Optional[float]] = []
    fps_list: list[Optional[float]] = []
    totals = np.zeros((count, dim), dtype=np.float32)
    unit_offsets = [0]
    mot_rows, atr_rows, rec_rows = [], [], []
    masks, texts, spans = [], [], []
    cores = []
    zero = np.zeros(dim, dtype=np.float32)

    for pos in range(count):
        if offsets[pos] != reader.pos:
            raise CorruptFile(reader.pos, "entry offset table disagrees with layout")
        ids.append(reader.string())
        captions.append(reader.string())
        video_refs.append(reader.string())
        flags = reader.u8()
        durations.append(reader.f64() if flags & _FLAG_DURATION else None)
        fps_list.append(reader.f64() if flags & _FLAG_FPS else None)
        totals[pos] = reader.vector(dim)
        core = reader.i32()
        n_units = reader.u32()
        if core >= n_units or (n_units > 0 and core < 0) or (n_units == 0 and core != -1):
            raise CorruptFile(reader.pos, f"core index {core} invalid for {n_units} units")
        cores.append(core)
        for _ in range(n_units):
            presence = reader.u8()
            if not presence & _PRESENT_MOT:
                raise CorruptFile(reader.pos, "unit without motion vector")
            span = struct.unpack("<II", reader.take(8))
            mot_rows.append(reader.vector(dim))
            atr_rows.append(reader.vector(dim) if presence & _PRESENT_ATR else zero)
            rec_rows.append(reader.vector(dim) if presence & _PRESENT_REC else zero)
            masks.append((True, bool(presence & _PRESENT_ATR), bool(presence & _PRESENT_REC)))
            texts.append((reader.opt_string(), reader.opt_string(), reader.opt_string()))
            spans.append(span)
        unit_offsets.append(len(mot_rows))

    if reader.pos != len(data):
        raise CorruptFile(reader.pos, "trailing bytes after last entry")

    n_units = len(mot_rows)
    return CorpusIndex(
        dim=dim,
        provider_fingerprint=fingerprint,
        ids=ids,
        captions=captions,
        video_refs=video_refs,
        durations=durations,
        fps=fps_list,
        totals=totals,
        unit_offsets=np.asarray(unit_offsets, dtype=np.int64),
        unit_mot=np.vstack(mot_rows) if n_units else np.zeros((0, dim), np.float32),
        unit_atr=np.vstack(atr_rows) if n_units else np.zeros((0, dim), np.float32),
        unit_rec=np.vstack(rec_rows) if n_units else np.zeros((0, dim), np.float32),
        unit_mask=np.asarray(masks, dtype=bool) if n_units else np.zeros((0, 3), bool),
        unit_texts=texts,
        unit_spans=np.asarray(spans, dtype=np.int32) if n_units else np.zeros((0, 2), np.int32),
        core_index=np.asarray(cores, dtype=np.int32),
    )


def check_fingerprint(index: CorpusIndex, provider) -> bool:
    """Warn (without failing) when a query provider differs from build time."""
    import warnings

    if provider.fingerprint() != index.provider_fingerprint:
        warnings.warn(
            f"index was built with provider {index.provider_fingerprint!r} but is "
            f"being queried with {provider.fingerprint()!r}; similarities may be meaningless",
            FingerprintMismatchWarning,
            stacklevel=2,
        )
        return False
    return True
