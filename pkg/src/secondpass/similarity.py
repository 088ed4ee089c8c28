"""Sentence similarity with an explanation: greedy word alignment and
mean-embedding cosine.

The alignment method matches tokens one-to-one in three passes (exact
match, lexical-resource match, vector-cosine match) and scores the pair of
sentences by the proportion of content tokens it managed to align. The
pairs themselves are kept so a reviewer can see *why* two sentences were
considered similar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class SimilarityError(ValueError):
    """Invalid resource file or scoring input."""


class OutOfVocabularyError(SimilarityError):
    """A sentence has no in-vocabulary token; the caller decides the fallback."""


def _load_default_stopwords() -> frozenset[str]:
    text = (importlib_resources.files("secondpass") / "data" / "stopwords_en.txt").read_text(
        encoding="utf-8"
    )
    return frozenset(w for w in text.split() if w)


DEFAULT_STOPWORDS = _load_default_stopwords()
DEFAULT_VECTOR_THRESHOLD = 0.7


class LexicalResource:
    """Symmetric word-pair similarity table in (0, 1].

    The symmetric closure is applied at load; conflicting duplicate entries
    keep the larger similarity so lookups are order-independent.
    """

    def __init__(self, pairs: Mapping[tuple[str, str], float] | None = None):
        self._table: dict[tuple[str, str], float] = {}
        for (w1, w2), sim in (pairs or {}).items():
            self.add(w1, w2, sim)

    def add(self, w1: str, w2: str, sim: float) -> None:
        if not 0.0 < sim <= 1.0:
            raise SimilarityError(f"similarity {sim} for ({w1!r}, {w2!r}) outside (0, 1]")
        key = (w1.lower(), w2.lower())
        for k in (key, key[::-1]):
            self._table[k] = max(sim, self._table.get(k, 0.0))

    def lookup(self, w1: str, w2: str) -> float | None:
        w1, w2 = w1.lower(), w2.lower()
        if w1 == w2:
            return 1.0
        return self._table.get((w1, w2))

    def __len__(self) -> int:
        return len(self._table)

    @classmethod
    def load(cls, path: str | Path) -> "LexicalResource":
        """Read a TSV of "word1<TAB>word2<TAB>sim" lines."""
        resource = cls()
        with open(path, encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise SimilarityError(f"{path}: line {line_no}: expected 3 tab-separated fields")
                try:
                    resource.add(fields[0], fields[1], float(fields[2]))
                except ValueError as exc:
                    raise SimilarityError(f"{path}: line {line_no}: {exc}") from exc
        return resource


class WordVectors:
    """Dense word vectors of one fixed dimension."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        dims = {v.shape for v in vectors.values()}
        if len(dims) > 1:
            raise SimilarityError(f"inconsistent vector dimensions: {sorted(dims)}")
        for word, vec in vectors.items():
            if not np.all(np.isfinite(vec)):
                raise SimilarityError(f"non-finite vector for {word!r}")
        self._vectors = {w.lower(): np.asarray(v, dtype=float) for w, v in vectors.items()}
        self.dim = next(iter(dims))[0] if dims else 0

    def get(self, word: str) -> np.ndarray | None:
        return self._vectors.get(word.lower())

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    @classmethod
    def load(cls, path: str | Path) -> "WordVectors":
        """Read the text format: "<count> <dim>" header, then "word v1 ... vd" lines."""
        vectors: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as f:
            header = f.readline().split()
            if len(header) != 2:
                raise SimilarityError(f"{path}: expected '<count> <dim>' header")
            count, dim = int(header[0]), int(header[1])
            for line_no, raw in enumerate(f, start=2):
                parts = raw.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise SimilarityError(
                        f"{path}: line {line_no}: expected word + {dim} values, got {len(parts) - 1}"
                    )
                vectors[parts[0]] = np.asarray([float(x) for x in parts[1:]], dtype=float)
        if len(vectors) != count:
            raise SimilarityError(f"{path}: header claims {count} vectors, found {len(vectors)}")
        return cls(vectors)


@dataclass(frozen=True)
class AlignedPair:
    s1_index: int
    s2_index: int
    evidence: str  # exact | resource | vector


@dataclass(frozen=True)
class AlignmentResult:
    score: float
    pairs: tuple[AlignedPair, ...]
    vector_pass_skipped: bool = False


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def align_score(
    s1: Sequence[str],
    s2: Sequence[str],
    resource: LexicalResource | None = None,
    vectors: WordVectors | None = None,
    theta_vec: float = DEFAULT_VECTOR_THRESHOLD,
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
) -> AlignmentResult:
    """Greedy one-to-one alignment of content tokens, in three passes.

    Pass 1 aligns exact lowercased matches preferring minimal position
    distance; pass 2 aligns resource pairs in descending similarity; pass 3
    aligns vector pairs with cosine >= theta_vec in descending cosine. All
    ties resolve by (smaller s1 index, smaller s2 index). The score is
    (aligned_1 + aligned_2) / (|content_1| + |content_2|); stopwords count
    in neither the numerator nor the denominator. Swapping the sentences
    gives the same score exactly.
    """
    if not s1 or not s2:
        raise SimilarityError("cannot align an empty sentence")
    if not 0.0 <= theta_vec <= 1.0:
        raise SimilarityError(f"theta_vec {theta_vec} outside [0, 1]")
    stop = {w.lower() for w in stopwords}
    low1 = [w.lower() for w in s1]
    low2 = [w.lower() for w in s2]
    content1 = [i for i, w in enumerate(low1) if w not in stop]
    content2 = [j for j, w in enumerate(low2) if w not in stop]

    used1: set[int] = set()
    used2: set[int] = set()
    pairs: list[AlignedPair] = []

    def take(candidates: list[tuple[tuple, int, int]], evidence: str) -> None:
        for _, i, j in sorted(candidates):
            if i not in used1 and j not in used2:
                used1.add(i)
                used2.add(j)
                pairs.append(AlignedPair(i, j, evidence))

    take(
        [
            ((abs(i - j), i, j), i, j)
            for i in content1
            for j in content2
            if low1[i] == low2[j]
        ],
        "exact",
    )

    if resource is not None and len(resource):
        candidates = []
        for i in content1:
            if i in used1:
                continue
            for j in content2:
                if j in used2:
                    continue
                sim = resource.lookup(low1[i], low2[j])
                if sim is not None:
                    candidates.append(((-sim, i, j), i, j))
        take(candidates, "resource")

    vector_pass_skipped = vectors is None
    if vectors is not None:
        candidates = []
        for i in content1:
            if i in used1:
                continue
            vec1 = vectors.get(low1[i])
            if vec1 is None:
                continue
            for j in content2:
                if j in used2:
                    continue
                vec2 = vectors.get(low2[j])
                if vec2 is None:
                    continue
                cos = _cosine(vec1, vec2)
                if cos >= theta_vec:
                    candidates.append(((-cos, i, j), i, j))
        take(candidates, "vector")

    denominator = len(content1) + len(content2)
    score = (2.0 * len(pairs) / denominator) if denominator else 0.0
    pairs.sort(key=lambda p: (p.s1_index, p.s2_index))
    return AlignmentResult(score=score, pairs=tuple(pairs), vector_pass_skipped=vector_pass_skipped)


def embed_score(
    s1: Sequence[str], s2: Sequence[str], vectors: WordVectors
) -> float:
    """Cosine between the mean vectors of the in-vocabulary tokens of each sentence."""
    means = []
    for side, sentence in (("first", s1), ("second", s2)):
        in_vocab = [vectors.get(w) for w in sentence if w in vectors]
        if not in_vocab:
            raise OutOfVocabularyError(f"{side} sentence has no in-vocabulary token")
        means.append(np.mean(in_vocab, axis=0))
    return _cosine(means[0], means[1])


def top_k_similar(
    query_id: str,
    query_tokens: Sequence[str],
    pool: Sequence[tuple[str, Sequence[str]]],
    k: int,
    method: str = "alignment",
    resource: LexicalResource | None = None,
    vectors: WordVectors | None = None,
    theta_vec: float = DEFAULT_VECTOR_THRESHOLD,
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
) -> list[tuple[str, float]]:
    """Exact top-k pool sentences by similarity to the query, ties by id.

    A pool entry sharing the query's id is excluded. With the embedding
    method, fully out-of-vocabulary pool sentences score 0.0.
    """
    if k < 1:
        raise SimilarityError("k must be >= 1")
    if not pool:
        raise SimilarityError("empty pool")
    scored: list[tuple[str, float]] = []
    for sid, tokens in pool:
        if sid == query_id:
            continue
        if method == "alignment":
            score = align_score(
                query_tokens, tokens, resource, vectors, theta_vec, stopwords
            ).score
        elif method == "embedding":
            if vectors is None:
                raise SimilarityError("embedding method needs word vectors")
            try:
                score = embed_score(query_tokens, tokens, vectors)
            except OutOfVocabularyError:
                score = 0.0
        else:
            raise SimilarityError(f"unknown similarity method {method!r}")
        scored.append((sid, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
