"""Orderings of a candidate pool for second annotation.

Three strategies: a seeded random permutation, ascending classifier
confidence (the least confident sentence is the most suspicious), and
descending similarity to a set of held-out error sentences. Rankings are
always full permutations of the pool; evaluation cuts them at thresholds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import random

from .corpus import TaggedSentence
from .crf import SentencePrediction
from .similarity import (
    DEFAULT_STOPWORDS,
    DEFAULT_VECTOR_THRESHOLD,
    LexicalResource,
    OutOfVocabularyError,
    WordVectors,
    align_score,
    embed_score,
)

RANK_METHODS = ("random", "confidence", "similarity")


class RankingError(ValueError):
    """Invalid ranking input or file."""


@dataclass(frozen=True)
class RankedItem:
    sentence_id: str
    score: float
    best_error_id: str | None = None  # similarity only: the error sentence it matched


@dataclass(frozen=True)
class Ranking:
    method: str
    ordered: tuple[RankedItem, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.method not in RANK_METHODS:
            raise RankingError(f"unknown ranking method {self.method!r}")
        ids = [item.sentence_id for item in self.ordered]
        if len(ids) != len(set(ids)):
            raise RankingError("ranking contains duplicate sentence ids")

    @property
    def ids(self) -> list[str]:
        return [item.sentence_id for item in self.ordered]

    def top(self, k: int) -> list[str]:
        return self.ids[:k]

    def is_permutation_of(self, pool: Iterable[str]) -> bool:
        return set(self.ids) == set(pool) and len(self.ordered) == len(set(pool))


def rank_random(pool_ids: Sequence[str], seed: int) -> Ranking:
    """Uniform permutation of the pool, deterministic per seed."""
    if not pool_ids:
        raise RankingError("empty pool")
    order = list(pool_ids)
    random.Random(seed).shuffle(order)
    return Ranking(
        method="random",
        ordered=tuple(RankedItem(sid, 0.0) for sid in order),
        provenance={"seed": seed},
    )


def rank_by_confidence(
    predictions: Iterable[SentencePrediction],
    pool_ids: Sequence[str],
    length_normalize: bool = False,
    provenance: Mapping | None = None,
) -> Ranking:
    """Ascending confidence: the model's least certain sentences come first.

    Ranks depend only on the order of the confidence values, so any
    strictly monotone rescaling of them leaves the ranking unchanged. With
    length_normalize, sequence probabilities are compared as per-token
    geometric means (raw scores are never normalized).
    """
    by_id = {p.sentence_id: p for p in predictions}
    missing = [sid for sid in pool_ids if sid not in by_id]
    if missing:
        raise RankingError(f"missing predictions for pool ids: {missing[:5]}")

    def key(sid: str) -> float:
        p = by_id[sid]
        if length_normalize and not p.raw_score and len(p.tags) > 0:
            return p.confidence ** (1.0 / len(p.tags))
        return p.confidence

    order = sorted(pool_ids, key=lambda sid: (key(sid), sid))
    return Ranking(
        method="confidence",
        ordered=tuple(RankedItem(sid, key(sid)) for sid in order),
        provenance={"length_normalize": length_normalize, **(dict(provenance or {}))},
    )


def rank_by_similarity(
    error_sentences: Sequence[TaggedSentence],
    pool_sentences: Sequence[TaggedSentence],
    method: str = "alignment",
    aggregation: str = "max",
    resource: LexicalResource | None = None,
    vectors: WordVectors | None = None,
    theta_vec: float = DEFAULT_VECTOR_THRESHOLD,
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
    provenance: Mapping | None = None,
) -> Ranking:
    """Descending similarity of each pool sentence to the error set.

    Each pool sentence is scored against every error sentence and the
    scores aggregate by max (default) or mean; the best-matching error id
    rides along as the explanation. Fully out-of-vocabulary pool sentences
    under the embedding method score 0.0 and are flagged, not rejected.
    """
    if not error_sentences:
        raise RankingError("empty error-sentence set")
    if not pool_sentences:
        raise RankingError("empty pool")
    if method not in ("alignment", "embedding"):
        raise RankingError(f"unknown similarity method {method!r}")
    if aggregation not in ("max", "mean"):
        raise RankingError(f"unknown aggregation {aggregation!r}")
    if method == "embedding" and vectors is None:
        raise RankingError("embedding method needs word vectors")

    stop = frozenset(w.lower() for w in stopwords)
    flagged: list[str] = []
    items: list[RankedItem] = []
    for pool_sentence in pool_sentences:
        scores: list[float] = []
        best_score, best_error = -2.0, None
        for error_sentence in error_sentences:
            if method == "alignment":
                value = align_score(
                    pool_sentence.texts,
                    error_sentence.texts,
                    resource=resource,
                    vectors=vectors,
                    theta_vec=theta_vec,
                    stopwords=stop,
                ).score
            else:
                try:
                    value = embed_score(pool_sentence.texts, error_sentence.texts, vectors)
                except OutOfVocabularyError:
                    value = 0.0
                    if pool_sentence.id not in flagged:
                        flagged.append(pool_sentence.id)
            scores.append(value)
            if value > best_score:
                best_score, best_error = value, error_sentence.id
        final = max(scores) if aggregation == "max" else sum(scores) / len(scores)
        items.append(RankedItem(pool_sentence.id, final, best_error))

    items.sort(key=lambda item: (-item.score, item.sentence_id))
    prov = {
        "similarity_method": method,
        "aggregation": aggregation,
        "error_set_size": len(error_sentences),
        **(dict(provenance or {})),
    }
    if flagged:
        prov["out_of_vocabulary_ids"] = flagged
    return Ranking(method="similarity", ordered=tuple(items), provenance=prov)


def save_ranking(path: str | Path, ranking: Ranking) -> None:
    """JSON-lines: a provenance header record, then one record per rank."""
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "schema": "secondpass/ranking@1",
            "method": ranking.method,
            "provenance": ranking.provenance,
        }
        f.write(json.dumps(header) + "\n")
        for rank, item in enumerate(ranking.ordered, start=1):
            record: dict = {"rank": rank, "id": item.sentence_id, "score": item.score}
            if item.best_error_id is not None:
                record["explanation"] = {"best_error_id": item.best_error_id}
            f.write(json.dumps(record) + "\n")


def load_ranking(path: str | Path) -> Ranking:
    with open(path, encoding="utf-8") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise RankingError(f"{path}: bad header: {exc}") from exc
        if header.get("schema") != "secondpass/ranking@1":
            raise RankingError(f"{path}: not a ranking file")
        items: list[RankedItem] = []
        expected_rank = 1
        for line_no, raw in enumerate(f, start=2):
            line = raw.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("rank") != expected_rank:
                raise RankingError(f"{path}: line {line_no}: rank {record.get('rank')} out of order")
            explanation = record.get("explanation") or {}
            items.append(
                RankedItem(record["id"], float(record["score"]), explanation.get("best_error_id"))
            )
            expected_rank += 1
    return Ranking(
        method=header["method"], ordered=tuple(items), provenance=header.get("provenance", {})
    )
