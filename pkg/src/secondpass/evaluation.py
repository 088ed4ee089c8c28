"""Span-level NER scoring and ranking-quality scoring at check thresholds.

Matching is exact (start, end, type); metrics are micro-averaged over the
whole sentence set. Multi-run numbers aggregate as mean plus population
standard deviation (divisor n), so repeated identical runs report std 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import TaggedSentence, spans_of


class EvaluationError(ValueError):
    """Mismatched inputs to a scoring operation."""


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    # zero-denominator conventions: an empty side is perfect only if the
    # other side is empty too
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class NerScore:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "NerScore":
        precision, recall, f1 = _prf(tp, fp, fn)
        return cls(tp, fp, fn, precision, recall, f1)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _span_sets(
    gold: Sequence[TaggedSentence],
    predicted: Sequence[TaggedSentence],
    entity_filter: str | None,
):
    gold_by_id = {s.id: s for s in gold}
    pred_by_id = {s.id: s for s in predicted}
    if set(gold_by_id) != set(pred_by_id):
        only_gold = sorted(set(gold_by_id) - set(pred_by_id))[:5]
        only_pred = sorted(set(pred_by_id) - set(gold_by_id))[:5]
        raise EvaluationError(
            f"id mismatch between gold and predicted (gold-only: {only_gold}, predicted-only: {only_pred})"
        )
    for sid in gold_by_id:
        g, p = gold_by_id[sid], pred_by_id[sid]
        if len(g) != len(p):
            raise EvaluationError(f"sentence {sid}: gold has {len(g)} tokens, predicted {len(p)}")
        g_spans = {s.as_tuple() for s in spans_of(g)}
        p_spans = {s.as_tuple() for s in spans_of(p)}
        if entity_filter is not None:
            g_spans = {s for s in g_spans if s[2] == entity_filter}
            p_spans = {s for s in p_spans if s[2] == entity_filter}
        yield sid, g_spans, p_spans


def score_ner(
    gold: Sequence[TaggedSentence],
    predicted: Sequence[TaggedSentence],
    entity_filter: str | None = None,
) -> NerScore:
    """Micro-averaged exact-match span P/R/F over aligned sentence sets."""
    tp = fp = fn = 0
    for _, g_spans, p_spans in _span_sets(gold, predicted, entity_filter):
        tp += len(g_spans & p_spans)
        fp += len(p_spans - g_spans)
        fn += len(g_spans - p_spans)
    return NerScore.from_counts(tp, fp, fn)


def error_sentences(
    gold: Sequence[TaggedSentence],
    predicted: Sequence[TaggedSentence],
    entity_filter: str | None = None,
) -> set[str]:
    """Ids of sentences contributing at least one false positive or false negative."""
    return {
        sid
        for sid, g_spans, p_spans in _span_sets(gold, predicted, entity_filter)
        if g_spans != p_spans
    }


@dataclass(frozen=True)
class RankingScore:
    k: int
    hits: int
    total_discrepant: int
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "hits": self.hits,
            "total_discrepant": self.total_discrepant,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def score_ranking(ranking_ids: Sequence[str], discrepant: set[str], k: int) -> RankingScore:
    """How many of the top-k ranked sentences are actually discrepant."""
    if k < 1 or k > len(ranking_ids):
        raise EvaluationError(f"threshold {k} outside [1, {len(ranking_ids)}]")
    hits = sum(1 for sid in ranking_ids[:k] if sid in discrepant)
    precision = hits / k
    recall = (hits / len(discrepant)) if discrepant else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return RankingScore(k, hits, len(discrepant), precision, recall, f1)


@dataclass(frozen=True)
class AggregateScore:
    mean: float
    std: float  # population standard deviation (divisor n)
    runs: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "runs": self.runs}


def aggregate(values: Sequence[float]) -> AggregateScore:
    if not values:
        raise EvaluationError("aggregate needs at least one run")
    n = len(values)
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
    return AggregateScore(mean, std, n)


def aggregate_metrics(scores: Sequence[NerScore | RankingScore]) -> dict[str, AggregateScore]:
    """Per-metric aggregation of precision/recall/f1 over runs."""
    return {
        name: aggregate([getattr(s, name) for s in scores])
        for name in ("precision", "recall", "f1")
    }


def format_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Aligned plain-text table."""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def render(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [render(headers), render(["-" * w for w in widths])]
    lines.extend(render(row) for row in rows)
    return "\n".join(lines)


def pct(value: float, std: float | None = None) -> str:
    """Render a 0-1 metric the way the reports print them: percent, 1 decimal."""
    text = f"{100.0 * value:.1f}"
    if std is not None:
        text += f" ({100.0 * std:.1f})"
    return text
