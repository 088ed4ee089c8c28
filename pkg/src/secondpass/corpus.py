"""Tokenized, BIO-labeled corpora with two parallel annotation versions and named splits.

A corpus holds the same sentences twice: once with the single-annotator
(pre-adjudicated) labels and once with the agreed (adjudicated) labels.
Sentences are the unit of annotation; mention spans decoded from the BIO
tags are the unit of comparison and evaluation.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

SPLIT_NAMES = ("train", "dev", "test1", "test2")
TEST_SPLITS = ("test1", "test2")
DEFAULT_RATIOS = (0.4, 0.4, 0.1, 0.1)

DOCSTART_TOKEN = "-DOCSTART-"
_DOCSTART_LINE = DOCSTART_TOKEN + "\tO"

_ID_RE = re.compile(r"^d(\d+):s(\d+)$")


class CorpusError(ValueError):
    """Invalid corpus content or construction."""


class ParseError(CorpusError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True, slots=True)
class BioTag:
    """One token label: O, or B/I with an entity type."""

    kind: str  # "O", "B" or "I"
    entity_type: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("O", "B", "I"):
            raise ValueError(f"bad tag kind {self.kind!r}")
        if (self.entity_type is None) != (self.kind == "O"):
            raise ValueError("entity type present iff kind is B or I")
        if self.entity_type is not None and not self.entity_type:
            raise ValueError("empty entity type")

    @classmethod
    def parse(cls, text: str) -> "BioTag":
        if text == "O":
            return cls("O")
        if len(text) > 2 and text[1] == "-" and text[0] in ("B", "I"):
            return cls(text[0], text[2:])
        raise ValueError(f"bad tag {text!r}: expected O, B-<type> or I-<type>")

    def __str__(self) -> str:
        if self.kind == "O":
            return "O"
        return f"{self.kind}-{self.entity_type}"


OUTSIDE = BioTag("O")


@dataclass(frozen=True, slots=True)
class Token:
    """A token and its position within its sentence."""

    text: str
    index: int

    def __post_init__(self) -> None:
        if not self.text or any(ch.isspace() for ch in self.text):
            raise ValueError(f"bad token {self.text!r}: must be non-empty, no whitespace")
        if self.index < 0:
            raise ValueError("negative token index")


@dataclass(frozen=True)
class TaggedSentence:
    """Tokens plus one BIO label sequence."""

    id: str
    tokens: tuple[Token, ...]
    tags: tuple[BioTag, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.tags):
            raise CorpusError(
                f"sentence {self.id}: {len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        for pos, token in enumerate(self.tokens):
            if token.index != pos:
                raise CorpusError(f"sentence {self.id}: token index {token.index} at position {pos}")

    @classmethod
    def build(cls, id: str, texts: Sequence[str], tags: Sequence[BioTag | str]) -> "TaggedSentence":
        return cls(
            id,
            tuple(Token(t, i) for i, t in enumerate(texts)),
            tuple(t if isinstance(t, BioTag) else BioTag.parse(t) for t in tags),
        )

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, slots=True, order=True)
class MentionSpan:
    """A typed, token-indexed entity mention (start and end inclusive)."""

    start: int
    end: int
    entity_type: str

    def __post_init__(self) -> None:
        if not (0 <= self.start <= self.end):
            raise ValueError(f"bad span ({self.start}, {self.end})")

    def as_tuple(self) -> tuple[int, int, str]:
        return (self.start, self.end, self.entity_type)


def spans_of(sentence: TaggedSentence | Sequence[BioTag]) -> list[MentionSpan]:
    """Decode maximal B/I runs into mention spans.

    Repair policy: an I-X that does not continue a run of type X (after O,
    at sentence start, or after a different type) opens a new span, as if
    it were B-X.
    """
    tags = sentence.tags if isinstance(sentence, TaggedSentence) else sentence
    spans: list[MentionSpan] = []
    start: int | None = None
    current_type: str | None = None

    def close(end: int) -> None:
        nonlocal start, current_type
        if start is not None:
            spans.append(MentionSpan(start, end, current_type))
        start = None
        current_type = None

    for i, tag in enumerate(tags):
        if tag.kind == "O":
            close(i - 1)
        elif tag.kind == "B":
            close(i - 1)
            start, current_type = i, tag.entity_type
        else:  # I: continue same-type run, otherwise repair to a new span
            if start is None or current_type != tag.entity_type:
                close(i - 1)
                start, current_type = i, tag.entity_type
    close(len(tags) - 1)
    return spans


def parse_conll(lines: Iterable[str]) -> list[TaggedSentence]:
    """Parse a tab-separated CoNLL stream into sentences.

    One "<token>\\t<tag>" per line; a blank line ends a sentence; a
    "-DOCSTART-\\tO" line ends the current document and increments the
    document counter. Ids are "d<doc>:s<ordinal>", both 0-based, the
    sentence ordinal resetting per document. Malformed lines raise
    ParseError with their line number; nothing is silently repaired.
    """
    sentences: list[TaggedSentence] = []
    doc = 0
    ordinal = 0
    texts: list[str] = []
    tags: list[BioTag] = []

    def flush() -> None:
        nonlocal ordinal, texts, tags
        if texts:
            sentences.append(TaggedSentence.build(f"d{doc}:s{ordinal}", texts, tags))
            ordinal += 1
        texts, tags = [], []

    line_no = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw[:-1] if raw.endswith("\n") else raw
        if line == "":
            flush()
            continue
        if line == _DOCSTART_LINE:
            flush()
            doc += 1
            ordinal = 0
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ParseError(line_no, f"expected 2 tab-separated fields, got {len(fields)}")
        text, tag_text = fields
        try:
            token = Token(text, len(texts))
            tag = BioTag.parse(tag_text)
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc
        texts.append(token.text)
        tags.append(tag)
    flush()
    return sentences


def _doc_of(sentence_id: str) -> int | None:
    m = _ID_RE.match(sentence_id)
    return int(m.group(1)) if m else None


def serialize_conll(sentences: Iterable[TaggedSentence]) -> str:
    """Render sentences in the canonical form parse_conll reads back.

    Document boundaries are recovered from "d<doc>:s<ord>" ids; for
    corpora produced by parse_conll the round trip is exact.
    """
    out: list[str] = []
    prev_doc: int | None = None
    for sentence in sentences:
        doc = _doc_of(sentence.id)
        if prev_doc is not None and doc is not None and doc != prev_doc:
            out.append(_DOCSTART_LINE + "\n\n")
        if doc is not None:
            prev_doc = doc
        for token, tag in zip(sentence.tokens, sentence.tags):
            out.append(f"{token.text}\t{tag}\n")
        out.append("\n")
    return "".join(out)


@dataclass(frozen=True)
class ParallelCorpus:
    """Sentences with pre-adjudicated and adjudicated tag versions and a 4-way split.

    Immutable after construction: adjudication fixes and label swaps
    produce new corpora (`with_pre_tags`), so instances are safe to share
    across threads.
    """

    order: tuple[str, ...]
    tokens: Mapping[str, tuple[str, ...]]
    pre_adjudicated: Mapping[str, tuple[BioTag, ...]]
    adjudicated: Mapping[str, tuple[BioTag, ...]]
    splits: Mapping[str, str]

    def __post_init__(self) -> None:
        ids = set(self.order)
        if len(ids) != len(self.order):
            raise CorpusError("duplicate sentence ids")
        for name, mapping in (("tokens", self.tokens), ("adjudicated", self.adjudicated), ("splits", self.splits)):
            missing = ids - set(mapping)
            if missing:
                raise CorpusError(f"{name} missing for ids: {sorted(missing)[:5]}")
        for sid, split in self.splits.items():
            if split not in SPLIT_NAMES:
                raise CorpusError(f"unknown split {split!r} for {sid}")
        extra_pre = set(self.pre_adjudicated) - ids
        if extra_pre:
            raise CorpusError(f"pre-adjudicated tags for unknown ids: {sorted(extra_pre)[:5]}")
        for sid in self.order:
            n = len(self.tokens[sid])
            if len(self.adjudicated[sid]) != n:
                raise CorpusError(f"sentence {sid}: adjudicated tag length != token count")
            if sid in self.pre_adjudicated and len(self.pre_adjudicated[sid]) != n:
                raise CorpusError(f"sentence {sid}: pre-adjudicated tag length != token count")
            if sid not in self.pre_adjudicated and self.splits[sid] not in TEST_SPLITS:
                raise CorpusError(f"sentence {sid} in split {self.splits[sid]} lacks pre-adjudicated tags")

    def __len__(self) -> int:
        return len(self.order)

    def ids_in(self, *splits: str) -> tuple[str, ...]:
        wanted = set(splits) if splits else set(SPLIT_NAMES)
        return tuple(sid for sid in self.order if self.splits[sid] in wanted)

    def adj_sentence(self, sid: str) -> TaggedSentence:
        return TaggedSentence.build(sid, self.tokens[sid], self.adjudicated[sid])

    def pre_sentence(self, sid: str) -> TaggedSentence:
        if sid not in self.pre_adjudicated:
            raise CorpusError(f"sentence {sid} has no pre-adjudicated tags")
        return TaggedSentence.build(sid, self.tokens[sid], self.pre_adjudicated[sid])

    def adj_sentences(self, *splits: str) -> list[TaggedSentence]:
        return [self.adj_sentence(sid) for sid in self.ids_in(*splits)]

    def pre_sentences(self, *splits: str) -> list[TaggedSentence]:
        return [self.pre_sentence(sid) for sid in self.ids_in(*splits)]

    def with_pre_tags(self, replacements: Mapping[str, Sequence[BioTag]]) -> "ParallelCorpus":
        """New corpus whose pre-adjudicated tags are overridden for the given ids."""
        pre = dict(self.pre_adjudicated)
        for sid, tags in replacements.items():
            if sid not in self.tokens:
                raise CorpusError(f"unknown sentence id {sid}")
            if len(tags) != len(self.tokens[sid]):
                raise CorpusError(f"sentence {sid}: replacement tag length != token count")
            pre[sid] = tuple(tags)
        return ParallelCorpus(self.order, self.tokens, pre, self.adjudicated, self.splits)

    @classmethod
    def build(
        cls,
        pre_sentences: Sequence[TaggedSentence] | None,
        adj_sentences: Sequence[TaggedSentence],
        splits: Mapping[str, str],
    ) -> "ParallelCorpus":
        order = tuple(s.id for s in adj_sentences)
        tokens = {s.id: s.texts for s in adj_sentences}
        adjudicated = {s.id: s.tags for s in adj_sentences}
        pre: dict[str, tuple[BioTag, ...]] = {}
        for s in pre_sentences or ():
            if s.id not in tokens:
                raise CorpusError(f"pre-adjudicated sentence {s.id} not in adjudicated corpus")
            if s.texts != tokens[s.id]:
                raise CorpusError(f"sentence {s.id}: token mismatch between annotation versions")
            pre[s.id] = s.tags
        return cls(order, tokens, pre, adjudicated, dict(splits))

    def save(self, directory: str | Path, stem: str = "corpus") -> None:
        """Write <stem>.pre.conll, <stem>.adj.conll and <stem>.splits.tsv.

        Both CoNLL files list every sentence in the same order with the
        same tokens; writing requires pre-adjudicated tags for all ids.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        missing = [sid for sid in self.order if sid not in self.pre_adjudicated]
        if missing:
            raise CorpusError(
                f"cannot save: {len(missing)} sentences lack pre-adjudicated tags (e.g. {missing[0]})"
            )
        (directory / f"{stem}.adj.conll").write_text(serialize_conll(self.adj_sentences()), encoding="utf-8")
        (directory / f"{stem}.pre.conll").write_text(serialize_conll(self.pre_sentences()), encoding="utf-8")
        lines = "".join(f"{sid}\t{self.splits[sid]}\n" for sid in self.order)
        (directory / f"{stem}.splits.tsv").write_text(lines, encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path, stem: str = "corpus") -> "ParallelCorpus":
        directory = Path(directory)
        with open(directory / f"{stem}.adj.conll", encoding="utf-8") as f:
            adj = parse_conll(f)
        with open(directory / f"{stem}.pre.conll", encoding="utf-8") as f:
            pre = parse_conll(f)
        if [s.id for s in pre] != [s.id for s in adj]:
            raise CorpusError("pre/adj files disagree on sentence order")
        splits: dict[str, str] = {}
        with open(directory / f"{stem}.splits.tsv", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise ParseError(line_no, "expected id<TAB>split")
                splits[fields[0]] = fields[1]
        return cls.build(pre, adj, splits)


def discrepant_ids(corpus: ParallelCorpus, pool: Iterable[str] = ("train", "dev")) -> set[str]:
    """Ids in the pooled splits whose two annotation versions decode to different span sets.

    Comparison is at span level, so B/I re-encodings of identical mentions
    do not count as discrepancies.
    """
    out: set[str] = set()
    for sid in corpus.ids_in(*pool):
        if sid not in corpus.pre_adjudicated:
            raise CorpusError(f"pooled sentence {sid} has no pre-adjudicated tags")
        pre = {s.as_tuple() for s in spans_of(corpus.pre_adjudicated[sid])}
        adj = {s.as_tuple() for s in spans_of(corpus.adjudicated[sid])}
        if pre != adj:
            out.add(sid)
    return out


def split_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of n items over the given ratios."""
    if any(r <= 0 for r in ratios):
        raise CorpusError("ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"ratios must sum to 1, got {sum(ratios)}")
    exact = [r * n for r in ratios]
    sizes = [math.floor(e) for e in exact]
    remainder = n - sum(sizes)
    by_fraction = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in by_fraction[:remainder]:
        sizes[i] += 1
    return sizes


def assign_splits(
    ids: Sequence[str], ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0
) -> dict[str, str]:
    """Deterministically assign whole sentences to train/dev/test1/test2."""
    if len(ids) < len(ratios):
        raise CorpusError(f"need at least {len(ratios)} sentences to split, got {len(ids)}")
    sizes = split_sizes(len(ids), ratios)
    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)
    assignment: dict[str, str] = {}
    cursor = 0
    for split, size in zip(SPLIT_NAMES, sizes):
        for sid in shuffled[cursor : cursor + size]:
            assignment[sid] = split
        cursor += size
    return assignment


def split_corpus(
    pre_sentences: Sequence[TaggedSentence] | None,
    adj_sentences: Sequence[TaggedSentence],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> ParallelCorpus:
    """Build a ParallelCorpus with a fresh random 4-way split."""
    splits = assign_splits([s.id for s in adj_sentences], ratios, seed)
    return ParallelCorpus.build(pre_sentences, adj_sentences, splits)


def mention_type_counts(sentences: Iterable[TaggedSentence]) -> dict[str, int]:
    """Count decoded mention spans by entity type."""
    counts: dict[str, int] = {}
    for sentence in sentences:
        for span in spans_of(sentence):
            counts[span.entity_type] = counts.get(span.entity_type, 0) + 1
    return counts


def iter_sentence_spans(sentences: Iterable[TaggedSentence]) -> Iterator[tuple[str, set[tuple[int, int, str]]]]:
    for sentence in sentences:
        yield sentence.id, {s.as_tuple() for s in spans_of(sentence)}
