"""CoNLL-U ingestion and verb-anchored semantic-unit extraction.

This module consumes dependency parses, it never produces them: parses come
either from committed CoNLL-U files or from the NLP sidecar.  Unit
extraction walks the tree looking for verbs and their subject/object
children, deliberately dropping modifier words (adjectives, adverbs,
determiners, numerals) so the resulting units describe motion rather than
appearance.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Optional, Union

# Columns of a CoNLL-U word line.
_N_COLUMNS = 10
_ID, _FORM, _LEMMA, _UPOS, _XPOS, _FEATS, _HEAD, _DEPREL, _DEPS, _MISC = range(10)

NOMINAL_UPOS = {"NOUN", "PROPN", "PRON"}
# Deprels whose tokens must never be captured into a unit.
MODIFIER_DEPRELS = {"amod", "advmod", "det", "nummod"}

PASSIVE_SUBJECT_DEPRELS = {"nsubj:pass", "nsubjpass"}
PASSIVE_AUX_DEPRELS = {"aux:pass", "auxpass"}
AGENT_DEPRELS = {"obl:agent"}
OBJECT_DEPRELS = {"obj", "dobj"}


class ParseError(Exception):
    """Base class for parse-layer errors."""


class MalformedConllu(ParseError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CyclicTree(ParseError):
    """The HEAD links of a sentence form a cycle."""


class EmptyUnitList(ParseError):
    """Core-unit selection needs at least one unit."""


@dataclass(frozen=True)
class ParsedToken:
    index: int           # 0-based position in the sentence
    text: str
    lemma: str
    upos: str
    head: int            # 0-based governor index; the root points at itself
    deprel: str

    @property
    def is_root(self) -> bool:
        return self.head == self.index


@dataclass(frozen=True)
class ParsedSentence:
    tokens: tuple[ParsedToken, ...]
    text: str
    sent_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def children(self, index: int) -> list[ParsedToken]:
        return [t for t in self.tokens if t.head == index and t.index != index]

    def root(self) -> ParsedToken:
        for tok in self.tokens:
            if tok.is_root:
                return tok
        raise CyclicTree("sentence has no root token")

    def depth(self, index: int) -> int:
        """Hops from a token to the root along HEAD links."""
        d = 0
        tok = self.tokens[index]
        while not tok.is_root:
            tok = self.tokens[tok.head]
            d += 1
        return d


def parse_conllu(source: Union[str, Iterable[str]]) -> list[ParsedSentence]:
    """Parse CoNLL-U text (string or line iterable) into sentences.

    Multiword-token ranges ("3-4") and empty nodes ("5.1") are skipped.
    Only the ID, FORM, LEMMA, UPOS, HEAD and DEPREL columns are consumed.
    `# sent_id` and `# text` comments are kept; other comments are ignored.

    Raises MalformedConllu on a wrong column count or a non-integer HEAD,
    and CyclicTree when HEAD links do not form a tree.
    """
    if isinstance(source, str):
        lines: Iterable[str] = io.StringIO(source)
    else:
        lines = source

    sentences: list[ParsedSentence] = []
    rows: list[tuple[int, list[str]]] = []  # (line_no, columns)
    sent_id: Optional[str] = None
    sent_text: Optional[str] = None

    def flush():
        nonlocal rows, sent_id, sent_text
        if rows:
            sentences.append(_build_sentence(rows, sent_id, sent_text))
        rows = []
        sent_id = None
        sent_text = None

    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            comment = line[1:].strip()
            if "=" in comment:
                key, _, value = comment.partition("=")
                key = key.strip()
                if key == "sent_id":
                    sent_id = value.strip()
                elif key == "text":
                    sent_text = value.strip()
            continue
        columns = line.split("\t")
        if len(columns) != _N_COLUMNS:
            raise MalformedConllu(line_no, f"expected 10 columns, got {len(columns)}")
        token_id = columns[_ID]
        if "-" in token_id or "." in token_id:
            # multiword-token range or empty node: not a syntactic word
            continue
        if not token_id.isdigit():
            raise MalformedConllu(line_no, f"bad token id {token_id!r}")
        try:
            int(columns[_HEAD])
        except ValueError:
            raise MalformedConllu(line_no, f"non-integer HEAD {columns[_HEAD]!r}") from None
        rows.append((line_no, columns))
    flush()
    return sentences


def _build_sentence(
    rows: list[tuple[int, list[str]]],
    sent_id: Optional[str],
    sent_text: Optional[str],
) -> ParsedSentence:
    n = len(rows)
    tokens = []
    for position, (line_no, cols) in enumerate(rows):
        head_1based = int(cols[_HEAD])
        if head_1based < 0 or head_1based > n:
            raise MalformedConllu(line_no, f"HEAD {head_1based} outside sentence of {n} tokens")
        head = position if head_1based == 0 else head_1based - 1
        tokens.append(
            ParsedToken(
                index=position,
                text=cols[_FORM],
                lemma=cols[_LEMMA],
                upos=cols[_UPOS],
                head=head,
                deprel=cols[_DEPREL],
            )
        )
    _check_acyclic(tokens)
    text = sent_text if sent_text is not None else " ".join(t.text for t in tokens)
    return ParsedSentence(tokens=tuple(tokens), text=text, sent_id=sent_id)


def _check_acyclic(tokens: list[ParsedToken]) -> None:
    state = [0] * len(tokens)  # 0 unseen, 1 on current path, 2 cleared
    for start in range(len(tokens)):
        if state[start] == 2:
            continue
        path = []
        i = start
        while True:
            if state[i] == 1:
                raise CyclicTree(f"HEAD links cycle through token {i}")
            if state[i] == 2:
                break
            state[i] = 1
            path.append(i)
            if tokens[i].is_root:
                break
            i = tokens[i].head
        for j in path:
            state[j] = 2


@dataclass(frozen=True)
class UnitSkeleton:
    """Token indices of one extracted unit, before any vectors exist."""

    motion: int
    actor: Optional[int] = None
    recipient: Optional[int] = None

    def span(self) -> tuple[int, int]:
        captured = [self.motion] + [i for i in (self.actor, self.recipient) if i is not None]
        return (min(captured), max(captured))


def _first_child(sentence: ParsedSentence, head: int, deprels: set[str],
                 nominal_only: bool = True) -> Optional[ParsedToken]:
    for child in sentence.children(head):
        if child.deprel in deprels and (not nominal_only or child.upos in NOMINAL_UPOS):
            return child
    return None


def _is_passive(sentence: ParsedSentence, verb: int) -> bool:
    return any(
        c.deprel in PASSIVE_SUBJECT_DEPRELS or c.deprel in PASSIVE_AUX_DEPRELS
        for c in sentence.children(verb)
    )


def _inherited_subject(sentence: ParsedSentence, verb: int) -> Optional[ParsedToken]:
    """Surface subject of the nearest ancestor reached through xcomp links.

    Handles chains like "starts to run": the inner verb carries the motion
    but the subject sits on the outer verb.
    """
    tok = sentence.tokens[verb]
    seen = {verb}
    while tok.deprel == "xcomp" and not tok.is_root:
        parent = sentence.tokens[tok.head]
        if parent.index in seen:
            break
        seen.add(parent.index)
        subj = _first_child(
            sentence, parent.index, {"nsubj"} | PASSIVE_SUBJECT_DEPRELS
        )
        if subj is not None:
            return subj
        tok = parent
    return None


def extract_units(sentence: ParsedSentence) -> list[UnitSkeleton]:
    """Extract one unit skeleton per motion-bearing verb, in sentence order.

    For each verb: the actor is its nominal nsubj child (or the obl:agent
    child when the verb is passive), the recipient its obj child; passive
    subjects map to the recipient slot.  An outer verb whose xcomp child is
    itself a verb ("wants to eat") is skipped — the inner verb carries the
    motion and inherits the outer subject.  Sentences without any verb fall
    back to a single copula unit when the structure is copular, otherwise
    the result is empty.
    """
    units: list[UnitSkeleton] = []
    for tok in sentence.tokens:
        if tok.upos != "VERB":
            continue
        if any(
            c.deprel == "xcomp" and c.upos == "VERB" for c in sentence.children(tok.index)
        ):
            continue  # aspectual/control outer verb; inner verb owns the motion
        units.append(_unit_for_verb(sentence, tok))
    if not units:
        copula = _copula_fallback(sentence)
        if copula is not None:
            units.append(copula)
    units.sort(key=lambda u: u.motion)
    return units


def _unit_for_verb(sentence: ParsedSentence, verb: ParsedToken) -> UnitSkeleton:
    actor: Optional[ParsedToken]
    recipient: Optional[ParsedToken]
    if _is_passive(sentence, verb.index):
        actor = _first_child(sentence, verb.index, AGENT_DEPRELS)
        recipient = _first_child(sentence, verb.index, PASSIVE_SUBJECT_DEPRELS)
    else:
        actor = _first_child(sentence, verb.index, {"nsubj"})
        if actor is None:
            actor = _inherited_subject(sentence, verb.index)
        recipient = _first_child(sentence, verb.index, OBJECT_DEPRELS)
    return UnitSkeleton(
        motion=verb.index,
        actor=actor.index if actor else None,
        recipient=recipient.index if recipient else None,
    )


def _copula_fallback(sentence: ParsedSentence) -> Optional[UnitSkeleton]:
    """Unit for verbless copular sentences ("a girl is on the street").

    The copula token becomes the motion anchor, the subject the actor, and
    the predicate nominal (the root in UD copular analyses) the recipient.
    Adjectival predicates are not captured — keeping modifier semantics out.
    """
    try:
        root = sentence.root()
    except CyclicTree:
        return None
    if root.upos == "AUX":
        actor = _first_child(sentence, root.index, {"nsubj"})
        recipient = _first_child(sentence, root.index, {"obj", "attr", "xcomp", "ccomp"})
        return UnitSkeleton(
            motion=root.index,
            actor=actor.index if actor else None,
            recipient=recipient.index if recipient else None,
        )
    cop = next((c for c in sentence.children(root.index) if c.deprel == "cop"), None)
    if cop is None:
        return None
    actor = _first_child(sentence, root.index, {"nsubj"})
    recipient = root if root.upos in NOMINAL_UPOS else None
    return UnitSkeleton(
        motion=cop.index,
        actor=actor.index if actor else None,
        recipient=recipient.index if recipient else None,
    )


def select_core_unit(units: list[UnitSkeleton], sentence: ParsedSentence) -> int:
    """Index of the unit carrying the sentence's main predicate.

    Prefers the unit whose motion token is the dependency root; otherwise
    the unit with the shallowest motion token, ties going to the earliest
    sentence position.
    """
    if not units:
        raise EmptyUnitList("cannot select a core unit from an empty list")
    for i, unit in enumerate(units):
        if sentence.tokens[unit.motion].is_root:
            return i
    best = min(
        range(len(units)),
        key=lambda i: (sentence.depth(units[i].motion), units[i].motion),
    )
    return best
