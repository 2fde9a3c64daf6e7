"""Parsed-command ingestion: bracketed trees, entity/relation classification,
and the rule chunker that flattens route directions into (verb, landmark)
segments.

All functions are pure over immutable inputs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

ENTITY = "Entity"
RELATION = "Relation"

# Prepositions whose implicit argument is a path rather than a place.
PATH_PREPOSITIONS = {
    "to", "through", "past", "along", "toward", "towards", "down", "up",
    "across", "around", "into", "from",
}

# Verbs, directional adverbs/particles, and path prepositions that may open a
# route-direction segment.
_SEGMENT_VERBS = {
    "go", "walk", "move", "turn", "continue", "head", "fly", "proceed",
    "take", "keep", "pass", "travel", "enter", "exit", "follow", "make",
}
_SEGMENT_ADVERBS = {
    "left", "right", "straight", "forward", "ahead", "back", "up", "down",
    "on", "going",
}
_SEGMENT_PREPS = PATH_PREPOSITIONS | {"by", "near"}

_PUNCT = {".", ",", "!", "?", ";", ":"}


class ParseFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Constituent:
    id: str
    category: str
    words: tuple
    kind: str | None = None
    children: tuple = ()
    is_leaf: bool = False
    warning: bool = False


class ParseTree:
    """A bracketed parse; constituents are indexed by id, root first."""

    def __init__(self, root: str, constituents: dict[str, Constituent]):
        self.root = root
        self.constituents = dict(constituents)

    def node(self, cid: str) -> Constituent:
        return self.constituents[cid]

    def children(self, cid: str) -> list[Constituent]:
        return [self.constituents[c] for c in self.constituents[cid].children]

    def phrasal_children(self, cid: str) -> list[Constituent]:
        return [c for c in self.children(cid) if not c.is_leaf]

    def preorder(self) -> list[Constituent]:
        out = []
        stack = [self.root]
        while stack:
            cid = stack.pop()
            c = self.constituents[cid]
            out.append(c)
            stack.extend(reversed(c.children))
        return out

    def leaves(self) -> list[Constituent]:
        return [c for c in self.preorder() if c.is_leaf]

    def tokens(self) -> list[str]:
        return [c.words[0] for c in self.leaves()]

    def with_node(self, node: Constituent) -> "ParseTree":
        cs = dict(self.constituents)
        cs[node.id] = node
        return ParseTree(self.root, cs)


@dataclass(frozen=True)
class FlatCommand:
    """Flattened route-direction structure: (verb, optional landmark) segments."""
    segments: tuple  # of (verb_words: tuple, landmark_words: tuple | None)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a flat command needs at least one segment")
        for v, _ in self.segments:
            if not v:
                raise ValueError("every segment needs verb words")


def _tokenize_sexpr(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield (ch, i)
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield (text[i:j], i)
            i = j


def read_parse(text: str) -> ParseTree:
    """Read one bracketed parse; leaves are `(TAG word)`."""
    toks = list(_tokenize_sexpr(text))
    if not toks:
        raise ParseFormatError("empty parse", 0)
    pos = 0

    counter = [0]
    constituents: dict[str, Constituent] = {}

    def fresh() -> str:
        counter[0] += 1
        return f"c{counter[0]}"

    def parse_node() -> str:
        nonlocal pos
        tok, off = toks[pos]
        if tok != "(":
            raise ParseFormatError(f"expected '(' but found {tok!r}", off)
        pos += 1
        if pos >= len(toks):
            raise ParseFormatError("unexpected end of input", len(text))
        tag, tag_off = toks[pos]
        if tag in "()":
            raise ParseFormatError("expected a category tag", tag_off)
        pos += 1
        cid = fresh()
        children: list[str] = []
        word: str | None = None
        while pos < len(toks):
            tok, off = toks[pos]
            if tok == ")":
                pos += 1
                if word is not None:
                    constituents[cid] = Constituent(cid, tag, (word,), is_leaf=True)
                elif children:
                    words = []
                    for ch in children:
                        words.extend(constituents[ch].words)
                    constituents[cid] = Constituent(cid, tag, tuple(words),
                                                    children=tuple(children))
                else:
                    raise ParseFormatError(f"empty constituent ({tag})", off)
                return cid
            if tok == "(":
                if word is not None:
                    raise ParseFormatError("leaf cannot have children", off)
                children.append(parse_node())
            else:
                if word is not None or children:
                    raise ParseFormatError("a leaf holds exactly one word", off)
                word = tok
                pos += 1
        raise ParseFormatError("unbalanced parentheses", len(text))

    root = parse_node()
    if pos != len(toks):
        raise ParseFormatError("trailing input after parse", toks[pos][1])
    return ParseTree(root, constituents)


def serialize(tree: ParseTree, cid: str | None = None) -> str:
    c = tree.node(cid or tree.root)
    if c.is_leaf:
        return f"({c.category} {c.words[0]})"
    inner = " ".join(serialize(tree, ch) for ch in c.children)
    return f"({c.category} {inner})"


def _contains_category(tree: ParseTree, cid: str, cats: set[str]) -> bool:
    for ch in tree.node(cid).children:
        c = tree.node(ch)
        if c.is_leaf:
            continue
        if c.category in cats or _contains_category(tree, ch, cats):
            return True
    return False


def classify_constituents(tree: ParseTree) -> ParseTree:
    """Assign Entity/Relation kinds to phrasal constituents.

    NP without an internal PP/SBAR is an entity; VP, PP, and a compound NP
    (one containing a PP) are relations.  S/ROOT-like clause nodes are left
    unclassified.  Unknown phrasal categories fall back to entity with a
    warning flag.  Idempotent.
    """
    out = tree
    for c in tree.preorder():
        if c.is_leaf:
            continue
        cat = c.category
        if cat in ("ROOT", "TOP", "S", "SINV", "FRAG"):
            continue
        if cat == "NP":
            kind = RELATION if _contains_category(tree, c.id, {"PP", "SBAR"}) else ENTITY
            out = out.with_node(replace(out.node(c.id), kind=kind, warning=False))
        elif cat in ("VP", "PP"):
            out = out.with_node(replace(out.node(c.id), kind=RELATION, warning=False))
        elif cat in ("ADVP", "PRT", "ADJP"):
            continue
        else:
            out = out.with_node(replace(out.node(c.id), kind=ENTITY, warning=True))
    return out


def split_clauses(tree: ParseTree) -> list[ParseTree]:
    """Split a command at top-level VP conjunctions into separate trees."""
    root = tree.node(tree.root)
    clause = root
    if root.category in ("ROOT", "TOP") and tree.phrasal_children(root.id):
        clause = tree.phrasal_children(root.id)[0]
    vps = [c for c in tree.children(clause.id) if c.category == "VP"]
    if len(vps) <= 1:
        # a single VP may itself coordinate VPs under a CC
        if len(vps) == 1:
            inner = [c for c in tree.children(vps[0].id) if c.category == "VP"]
            if len(inner) >= 2:
                vps = inner
            else:
                return [tree]
        else:
            return [tree]
    out = []
    for vp in vps:
        keep = {vp.id}
        stack = [vp.id]
        while stack:
            cid = stack.pop()
            for ch in tree.node(cid).children:
                keep.add(ch)
                stack.append(ch)
        out.append(ParseTree(vp.id, {cid: tree.node(cid) for cid in keep}))
    return out


_NOUN_LEXICON_HINT = {"the", "a", "an", "this", "that", "these", "those"}


def parse_command(text: str) -> ParseTree:
    """Tiny fallback parser for imperative `V NP (PP NP)` commands.

    Good enough for the stand-alone CLI; real parses should be read from
    bracketed files.
    """
    toks = [t for t in re.findall(r"[A-Za-z']+|[.,!?]", text)]
    words = [t for t in toks if t not in _PUNCT]
    if not words:
        raise ParseFormatError("empty command", 0)
    verb = words[0]
    rest = words[1:]
    prep_idx = next((i for i, w in enumerate(rest) if w.lower() in PATH_PREPOSITIONS
                     or w.lower() in ("on", "in", "at", "near", "by", "beside",
                                      "under", "over", "behind", "above")), None)

    def np(tokens: list[str]) -> str:
        leaves = " ".join(f"({'DT' if t.lower() in _NOUN_LEXICON_HINT else 'NN'} {t})"
                          for t in tokens)
        return f"(NP {leaves})"

    parts = [f"(VB {verb})"]
    if prep_idx is None:
        if rest:
            parts.append(np(rest))
    else:
        if prep_idx > 0:
            parts.append(np(rest[:prep_idx]))
        prep, tail = rest[prep_idx], rest[prep_idx + 1:]
        if not tail:
            raise ParseFormatError("preposition without object", 0)
        parts.append(f"(PP (IN {prep}) {np(tail)})")
    vp = "(VP " + " ".join(parts) + ")"
    return read_parse(f"(ROOT (S {vp}))")


def _split_sentences(text: str) -> list[list[str]]:
    sents = []
    for raw in re.split(r"[.!?;]+", text):
        toks = [t.lower() for t in re.findall(r"[A-Za-z']+|,", raw)]
        if toks:
            sents.append(toks)
    return sents


def _split_clause_tokens(tokens: list[str]) -> list[list[str]]:
    clauses, cur = [], []
    for i, t in enumerate(tokens):
        if t in ("and", "then", ","):
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if cur and nxt is not None and (nxt in _SEGMENT_VERBS or nxt in _SEGMENT_PREPS):
                clauses.append(cur)
                cur = []
                continue
            if t == ",":
                continue
        cur.append(t)
    if cur:
        clauses.append(cur)
    return clauses


def chunk_directions(text: str) -> FlatCommand:
    """Flatten route directions into (verb_words, landmark_words) segments.

    One segment per imperative clause; the verb span is the maximal leading
    run of verbs/adverbs/path particles and the landmark is the first noun
    phrase span that follows, when present.
    """
    segments = []
    for sent in _split_sentences(text):
        for clause in _split_clause_tokens(sent):
            clause = [t for t in clause if t != ","]
            if not clause:
                continue
            i = 0
            verb: list[str] = []
            while i < len(clause):
                t = clause[i]
                if not verb and (t in _SEGMENT_VERBS or t in _SEGMENT_PREPS):
                    verb.append(t)
                elif verb and (t in _SEGMENT_ADVERBS or t in _SEGMENT_PREPS
                               or t in _SEGMENT_VERBS):
                    verb.append(t)
                else:
                    break
                i += 1
            if not verb:
                verb = ["go"]
            landmark = clause[i:] or None
            segments.append((tuple(verb), tuple(landmark) if landmark else None))
    if not segments:
        raise ValueError("no segments found in direction text")
    return FlatCommand(tuple(segments))
