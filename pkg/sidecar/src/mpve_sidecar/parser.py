"""Deterministic rule-based English dependency parser, emitting CoNLL-U.

This is the builtin stand-in ("rule-en-v1") for a pretrained parser: a
single-clause heuristic tuned for caption-style English (SVO actives,
be-passives, copulas, verb coordination, to-infinitive chains, gerund
captions).  It is deliberately simple and fully deterministic; its exact
behavior is pinned by golden fixtures.  Swap the parser model id in the
config to serve a real model instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

DETS = {"a", "an", "the", "this", "that", "these", "those"}
BE_FORMS = {"is", "are", "was", "were", "am", "be", "been", "being"}
ADPS = {
    "in", "on", "at", "under", "over", "through", "towards", "toward", "across",
    "past", "by", "from", "with", "without", "of", "against", "down", "up",
    "into", "onto", "behind", "beside", "along", "near", "around", "inside",
    "outside", "above", "below", "between", "during",
}
CCONJS = {"and", "or", "but"}
PRONS = {
    "he", "she", "it", "they", "we", "you", "i", "who", "whom", "him", "her",
    "them", "us", "me", "something", "someone", "everything",
}
POSS_PRONS = {"their", "his", "its", "my", "our", "your", "hers"}
NUM_WORDS = {
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
}
ADJS = {
    "beautiful", "red", "green", "blue", "yellow", "white", "black", "big",
    "small", "old", "young", "evil", "foggy", "dreamy", "magnificent",
    "elderly", "heavy", "famous", "happy", "sad", "full", "empty", "dark",
    "bright", "tall", "short", "long", "fast", "slow", "hot", "cold", "new",
    "little", "large", "giant", "tiny", "colorful", "wild", "calm", "busy",
}
ADVS = {"quickly", "slowly", "gently", "down", "away", "together"}

VERB_LEMMAS = {
    "chase", "run", "rise", "eat", "throw", "dig", "walk", "hold", "ride",
    "conduct", "speed", "bloom", "spray", "burn", "cut", "head", "fall",
    "play", "jump", "fly", "swim", "bark", "gallop", "open", "dance",
    "crash", "read", "drink", "bake", "want", "start", "stir", "rain",
    "break", "write", "move", "roll", "bounce", "drive", "climb", "swing",
    "spin", "splash", "pour", "catch", "kick", "push", "pull", "lift",
    "carry", "wave", "turn", "slide", "leap", "march", "sail", "row",
    "surf", "ski", "skate", "dive", "float", "sink", "grow", "melt",
    "shine", "explode", "spark", "flow", "drip", "bite", "sing", "see",
    "watch", "look", "make", "build", "paint", "draw", "cook", "teach",
    "learn", "study", "sell", "buy", "give", "take", "begin", "stop",
    "continue", "try", "like", "love", "enjoy",
}
IRREGULAR_PARTICIPLES = {
    "thrown": "throw", "broken": "break", "eaten": "eat", "written": "write",
    "taken": "take", "given": "give", "seen": "see", "ridden": "ride",
    "fallen": "fall", "flown": "fly", "grown": "grow", "held": "hold",
    "caught": "catch", "cut": "cut", "read": "read", "made": "make",
    "built": "build", "bought": "buy", "sold": "sell", "begun": "begin",
}
IRREGULAR_PASTS = {
    "ran": "run", "fell": "fall", "ate": "eat", "threw": "throw",
    "broke": "break", "wrote": "write", "rode": "ride", "flew": "fly",
    "held": "hold", "dug": "dig", "swam": "swim", "began": "begin",
    "took": "take", "gave": "give", "saw": "see", "made": "make",
    "caught": "catch", "bought": "buy", "sold": "sell",
}
ING_NOUNS = {"building", "painting", "morning", "evening", "ceiling", "wedding",
             "clothing", "lightning", "king", "ring", "spring", "string", "wing",
             "thing", "something", "everything", "nothing"}
PLURAL_KEEP = {"scissors", "news", "series", "species", "glasses", "pants", "clothes"}

_PUNCT_RE = re.compile(r"^[.,!?;:]$")


@dataclass
class _Tok:
    form: str
    lemma: str
    upos: str
    head: int = 0       # 1-based; 0 = root
    deprel: str = "dep"


def _undouble(stem: str) -> str:
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "aeiouls":
        return stem[:-1]
    return stem


def verb_lemma(word: str) -> Optional[str]:
    """Lemma if the lowercased word is a known verb form, else None."""
    w = word.lower()
    if w in VERB_LEMMAS:
        return w
    if w in IRREGULAR_PARTICIPLES:
        return IRREGULAR_PARTICIPLES[w]
    if w in IRREGULAR_PASTS:
        return IRREGULAR_PASTS[w]
    if w.endswith("ies") and w[:-3] + "y" in VERB_LEMMAS:
        return w[:-3] + "y"
    if w.endswith("es") and w[:-2] in VERB_LEMMAS:
        return w[:-2]
    if w.endswith("s") and w[:-1] in VERB_LEMMAS:
        return w[:-1]
    for suffix in ("ing", "ed"):
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            for candidate in (stem, _undouble(stem), stem + "e"):
                if candidate in VERB_LEMMAS:
                    return candidate
    return None


def noun_lemma(word: str) -> str:
    w = word.lower()
    if w in PLURAL_KEEP:
        return w
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith(("ses", "xes", "zes", "ches", "shes")):
        return w[:-2]
    if w.endswith("s") and not w.endswith(("ss", "us", "is")) and len(w) > 3:
        return w[:-1]
    return w


def _tokenize(sentence: str) -> list[str]:
    out = []
    for chunk in sentence.split():
        head = chunk
        tail = []
        while head and _PUNCT_RE.match(head[-1]):
            tail.append(head[-1])
            head = head[:-1]
        if head:
            out.append(head)
        out.extend(reversed(tail))
    return out


def _is_participle(word: str) -> bool:
    w = word.lower()
    return w in IRREGULAR_PARTICIPLES or (verb_lemma(w) is not None and w.endswith("ed"))


def _tag(tokens: list[str], position: int, prior: list[_Tok]) -> _Tok:
    form = tokens[position]
    w = form.lower()
    if _PUNCT_RE.match(form):
        return _Tok(form, form, "PUNCT")
    if w in DETS:
        return _Tok(form, "a" if w in ("a", "an") else w, "DET")
    if w in BE_FORMS:
        return _Tok(form, "be", "AUX")
    if w == "to":
        nxt = tokens[position + 1].lower() if position + 1 < len(tokens) else ""
        if nxt in VERB_LEMMAS:
            return _Tok(form, "to", "PART")
        return _Tok(form, "to", "ADP")
    if w in CCONJS:
        return _Tok(form, w, "CCONJ")
    if w in POSS_PRONS:
        return _Tok(form, w, "PRON")
    if w in PRONS:
        return _Tok(form, w, "PRON")
    if w.isdigit() or w in NUM_WORDS:
        return _Tok(form, w, "NUM")
    if w in ADVS or (w.endswith("ly") and len(w) > 4):
        return _Tok(form, w, "ADV")
    vl = verb_lemma(w)
    if vl is not None:
        prev_aux = bool(prior) and prior[-1].upos == "AUX"
        if w.endswith("ing") and w in ING_NOUNS and not prev_aux:
            return _Tok(form, noun_lemma(w), "NOUN")
        return _Tok(form, vl, "VERB")
    if w in ADJS:
        return _Tok(form, w, "ADJ")
    if w in ADPS:
        return _Tok(form, w, "ADP")
    if position > 0 and form[:1].isupper():
        return _Tok(form, form, "PROPN")
    return _Tok(form, noun_lemma(w), "NOUN")


NOMINAL = {"NOUN", "PROPN", "PRON", "NUM"}


def _noun_phrases(toks: list[_Tok]) -> list[tuple[int, int]]:
    """(start, head) spans of maximal det/adj/num/nominal runs, 0-based."""
    phrases = []
    i = 0
    n = len(toks)
    while i < n:
        if toks[i].upos in ("DET", "ADJ", "NUM") or toks[i].upos in NOMINAL:
            start = i
            last_nominal = -1
            while i < n and (toks[i].upos in ("DET", "ADJ", "NUM") or toks[i].upos in NOMINAL):
                if toks[i].upos in NOMINAL:
                    last_nominal = i
                i += 1
            if last_nominal >= 0:
                phrases.append((start, last_nominal))
        else:
            i += 1
    return phrases


def _attach_np_internals(toks: list[_Tok], start: int, head: int) -> None:
    for j in range(start, head):
        t = toks[j]
        if t.upos == "DET":
            t.head, t.deprel = head + 1, "det"
        elif t.upos == "ADJ":
            t.head, t.deprel = head + 1, "amod"
        elif t.upos == "NUM":
            t.head, t.deprel = head + 1, "nummod"
        elif t.form.lower() in POSS_PRONS:
            t.head, t.deprel = head + 1, "nmod:poss"
        elif t.upos in NOMINAL:
            t.head, t.deprel = head + 1, "compound"


def parse_sentence(sentence: str) -> list[_Tok]:
    tokens = _tokenize(sentence)
    toks: list[_Tok] = []
    for k in range(len(tokens)):
        toks.append(_tag(tokens, k, toks))

    phrases = _noun_phrases(toks)
    for start, head in phrases:
        _attach_np_internals(toks, start, head)
    heads = [h for _, h in phrases]

    verbs = [k for k, t in enumerate(toks) if t.upos == "VERB"]
    if verbs:
        _attach_clause(toks, verbs, heads)
    else:
        _attach_copula_or_fragment(toks, heads)

    root = next((k for k, t in enumerate(toks) if t.head == 0 and t.deprel == "root"), None)
    if root is None:  # last resort: first token is the root
        toks[0].head, toks[0].deprel = 0, "root"
        root = 0
    for t in toks:
        if t.deprel == "dep" and t.head == 0:
            t.head = root + 1
        if t.upos == "PUNCT":
            t.head, t.deprel = root + 1, "punct"
    toks[root].head, toks[root].deprel = 0, "root"
    return toks


def _aux_span_start(toks: list[_Tok], verb: int) -> int:
    start = verb
    j = verb - 1
    while j >= 0 and toks[j].upos in ("AUX", "ADV", "PART"):
        if toks[j].upos == "AUX":
            start = j
        j -= 1
    return start


def _attach_clause(toks: list[_Tok], verbs: list[int], np_heads: list[int]) -> None:
    main = verbs[0]
    toks[main].head, toks[main].deprel = 0, "root"
    passive = {main: False}

    # secondary verbs: to-infinitive chains and coordination
    for v in verbs[1:]:
        j = v - 1
        while j >= 0 and toks[j].upos in ("AUX", "ADV"):
            j -= 1
        if j >= 0 and toks[j].upos == "PART":
            toks[j].head, toks[j].deprel = v + 1, "mark"
            prev = max(u for u in verbs if u < v)
            toks[v].head, toks[v].deprel = prev + 1, "xcomp"
        else:
            toks[v].head, toks[v].deprel = main + 1, "conj"
            for k in range(v - 1, -1, -1):
                if toks[k].upos == "CCONJ":
                    toks[k].head, toks[k].deprel = v + 1, "cc"
                    break
        passive[v] = False

    # auxiliaries and passivity
    for v in verbs:
        j = v - 1
        while j >= 0 and toks[j].upos in ("AUX", "ADV"):
            if toks[j].upos == "AUX":
                if toks[j].lemma == "be" and _is_participle(toks[v].form):
                    toks[j].head, toks[j].deprel = v + 1, "aux:pass"
                    passive[v] = True
                else:
                    toks[j].head, toks[j].deprel = v + 1, "aux"
            j -= 1

    # subjects: the nominal head right before each verb's aux span; a
    # coordinated verb only takes a subject sitting after its conjunction
    # (so "reads a book and drinks coffee" does not steal "book")
    claimed: set[int] = set()
    for v in verbs:
        if toks[v].deprel == "xcomp":
            continue  # inherits the upstream subject
        span_start = _aux_span_start(toks, v)
        lower_bound = -1
        if toks[v].deprel == "conj":
            cc = next(
                (k for k in range(v - 1, -1, -1) if toks[k].upos == "CCONJ"), None
            )
            if cc is None:
                continue
            lower_bound = cc
        candidates = [
            h for h in np_heads if lower_bound < h < span_start and h not in claimed
        ]
        if not candidates:
            continue
        subject = max(candidates)
        rel = "nsubj:pass" if passive[v] else "nsubj"
        toks[subject].head, toks[subject].deprel = v + 1, rel
        claimed.add(subject)

    # post-verbal material: objects, obliques, agents
    for h in np_heads:
        if h in claimed or toks[h].deprel != "dep":
            continue
        governing = max((v for v in verbs if v < h), default=None)
        if governing is None:
            continue
        phrase_start = h
        while phrase_start > 0 and toks[phrase_start - 1].head == h + 1:
            phrase_start -= 1
        prep = phrase_start - 1
        if prep >= 0 and toks[prep].upos == "ADP":
            toks[prep].head, toks[prep].deprel = h + 1, "case"
            if toks[prep].lemma == "by" and passive.get(governing):
                toks[h].head, toks[h].deprel = governing + 1, "obl:agent"
            else:
                toks[h].head, toks[h].deprel = governing + 1, "obl"
        else:
            has_obj = any(
                t.deprel == "obj" and t.head == governing + 1 for t in toks
            )
            rel = "obl" if has_obj else "obj"
            toks[h].head, toks[h].deprel = governing + 1, rel

    for k, t in enumerate(toks):
        if t.upos == "ADV" and t.deprel == "dep":
            governing = max((v for v in verbs if v < k), default=verbs[0])
            t.head, t.deprel = governing + 1, "advmod"


def _attach_copula_or_fragment(toks: list[_Tok], np_heads: list[int]) -> None:
    aux = next((k for k, t in enumerate(toks) if t.upos == "AUX"), None)
    if aux is not None:
        predicate = next((h for h in np_heads if h > aux), None)
        if predicate is None:
            predicate_adj = next(
                (k for k, t in enumerate(toks) if k > aux and t.upos == "ADJ"), None
            )
            if predicate_adj is not None:
                predicate = predicate_adj
        if predicate is not None:
            toks[predicate].head, toks[predicate].deprel = 0, "root"
            toks[aux].head, toks[aux].deprel = predicate + 1, "cop"
            subject = next((h for h in reversed(np_heads) if h < aux), None)
            if subject is not None:
                toks[subject].head, toks[subject].deprel = predicate + 1, "nsubj"
            phrase_start = predicate
            while phrase_start > 0 and toks[phrase_start - 1].head == predicate + 1:
                phrase_start -= 1
            if phrase_start > 0 and toks[phrase_start - 1].upos == "ADP":
                toks[phrase_start - 1].head = predicate + 1
                toks[phrase_start - 1].deprel = "case"
            _attach_obliques_to(toks, np_heads, predicate)
            return
        toks[aux].head, toks[aux].deprel = 0, "root"
        return
    if np_heads:
        root = np_heads[0]
        toks[root].head, toks[root].deprel = 0, "root"
        _attach_obliques_to(toks, np_heads, root)


def _attach_obliques_to(toks: list[_Tok], np_heads: list[int], root: int) -> None:
    for h in np_heads:
        if h == root or toks[h].deprel != "dep":
            continue
        phrase_start = h
        while phrase_start > 0 and toks[phrase_start - 1].head == h + 1:
            phrase_start -= 1
        prep = phrase_start - 1
        if prep >= 0 and toks[prep].upos == "ADP":
            toks[prep].head, toks[prep].deprel = h + 1, "case"
        toks[h].head, toks[h].deprel = root + 1, "nmod"


_SENTENCE_SPLIT = re.compile(r"([^.!?]*[.!?]+|[^.!?]+$)")


def split_sentences(text: str) -> list[str]:
    parts = [m.group(0).strip() for m in _SENTENCE_SPLIT.finditer(text)]
    return [p for p in parts if p]


def to_conllu(text: str) -> str:
    """Parse a text (possibly several sentences) into CoNLL-U blocks."""
    blocks = []
    for si, sentence in enumerate(split_sentences(text), start=1):
        toks = parse_sentence(sentence)
        lines = [f"# sent_id = {si}", f"# text = {sentence}"]
        for i, t in enumerate(toks, start=1):
            lines.append(
                "\t".join(
                    [str(i), t.form, t.lemma, t.upos, "_", "_", str(t.head), t.deprel,
                     "_", "_"]
                )
            )
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)
