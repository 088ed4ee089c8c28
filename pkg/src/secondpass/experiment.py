"""End-to-end pipelines: the single-vs-double annotation gap, ranking quality
at check thresholds, and retraining with top-k fixes; plus a synthetic
parallel-corpus generator so the whole loop can be exercised without any
external data.

The generator writes sentences in two difficulty strata. Easy sentences
carry unambiguous mutation-nomenclature mentions; hard sentences also
contain a common-word mention term ("deletion", "insertion", ...) whose
gold label follows a contextual cue (which gene precedes it) plus a little
annotation noise, so it is learnable but only with enough clean data.
Corruption removes or shrinks mentions in a fixed number of sentences,
drawn hard-stratum-first to mimic how a single annotator tends to miss the
difficult cases. That bias is what gives confidence- and similarity-based
rankings something to find; it can be switched off for a uniform draw.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from . import __version__
from .corpus import (
    DEFAULT_RATIOS,
    BioTag,
    ParallelCorpus,
    TaggedSentence,
    assign_splits,
    discrepant_ids,
    serialize_conll,
)
from .crf import CrfModel, SentencePrediction, TrainConfig, train
from .evaluation import (
    AggregateScore,
    NerScore,
    RankingScore,
    aggregate_metrics,
    error_sentences,
    format_table,
    pct,
    score_ner,
    score_ranking,
)
from .ranking import Ranking, rank_by_confidence, rank_by_similarity, rank_random
from .similarity import LexicalResource, WordVectors


class ExperimentError(ValueError):
    """Invalid experiment configuration or inputs."""


# ---------------------------------------------------------------------------
# synthetic corpus


@dataclass(frozen=True)
class SyntheticVocab:
    """Token pools and knobs for the synthetic corpus generator."""

    genes: tuple[str, ...] = (
        "BRAF", "KRAS", "TP53", "EGFR", "APC", "PIK3CA", "PTEN", "MLH1",
    )
    mention_genes: tuple[str, ...] = ("BRAF", "KRAS", "TP53", "EGFR")
    tissues: tuple[str, ...] = ("colorectal", "gastric", "breast", "lung")
    numbers: tuple[str, ...] = ("12", "17", "23", "31", "48", "59")
    easy_mutations: tuple[str, ...] = (
        "V600E", "G12D", "R175H", "Q61K", "S768I", "L858R", "T790M", "G13D",
        "E545K", "H1047R", "R273C", "Y537S", "D816V", "V559A", "K642E",
        "N581S", "F384L", "A146T", "Q546R", "M918T",
        "c.35G>A", "c.1799T>A", "c.2573T>G", "p.G12C", "p.R132H",
    )
    ambiguous_terms: tuple[str, ...] = (
        "deletion", "insertion", "duplication", "inversion",
        "substitution", "truncation", "amplification", "rearrangement",
    )
    # sized so that a 15% corruption draw covers well over half of the hard
    # stratum: the corrupted cue then lands decisively on the all-O side
    # and restoring fixes flips it decisively back
    hard_fraction: float = 0.25
    # gene-cue reliability: P(ambiguous term is a gold mention) given the
    # preceding gene is / is not in mention_genes
    amb_label_noise: float = 0.1
    extra_easy_corruption_rate: float = 0.4
    bias_hard_selection: bool = True  # draw corrupted sentences hard-stratum-first
    sentences_per_document: int = 20


_EASY_TEMPLATES: tuple[tuple[str, ...], ...] = (
    ("sequencing", "of", "{gene}", "revealed", "{mut}", "in", "{num}", "tumor", "samples", "."),
    ("we", "detected", "{mut}", "in", "{num}", "of", "{num}", "{tissue}", "specimens", "."),
    ("functional", "assays", "confirmed", "that", "{mut}", "activates", "{gene}", "signaling", "."),
    ("targeted", "screening", "identified", "{mut}", "and", "{mut}", "in", "the", "{gene}", "gene", "."),
    ("the", "{gene}", "{mut2}", "was", "enriched", "in", "resistant", "clones", "."),
)

_HARD_TEMPLATES: tuple[tuple[str, ...], ...] = (
    ("patients", "harboring", "{mut}", "presented", "{geneamb}", "in", "the", "tumor", "."),
    ("carriers", "of", "{mut}", "in", "this", "cohort", "showed", "frequent", "{geneamb}", "events", "."),
    ("clinical", "follow-up", "of", "{mut}", "cases", "documented", "{geneamb}", "progression", "."),
    ("prognosis", "of", "{mut}", "positive", "patients", "worsened", "after", "{geneamb}", "."),
)


@dataclass(frozen=True)
class _Mention:
    kind: str  # easy | amb
    start: int
    end: int


def _instantiate(template: tuple[str, ...], rng: random.Random, vocab: SyntheticVocab):
    tokens: list[str] = []
    tags: list[str] = []
    mentions: list[_Mention] = []
    for slot in template:
        if slot == "{gene}":
            tokens.append(rng.choice(vocab.genes))
            tags.append("O")
        elif slot == "{num}":
            tokens.append(rng.choice(vocab.numbers))
            tags.append("O")
        elif slot == "{tissue}":
            tokens.append(rng.choice(vocab.tissues))
            tags.append("O")
        elif slot == "{mut}":
            start = len(tokens)
            tokens.append(rng.choice(vocab.easy_mutations))
            tags.append("B-Mutation")
            mentions.append(_Mention("easy", start, start))
        elif slot == "{mut2}":
            start = len(tokens)
            tokens.extend([rng.choice(vocab.easy_mutations), "mutation"])
            tags.extend(["B-Mutation", "I-Mutation"])
            mentions.append(_Mention("easy", start, start + 1))
        elif slot == "{geneamb}":
            gene = rng.choice(vocab.genes)
            tokens.append(gene)
            tags.append("O")
            start = len(tokens)
            tokens.append(rng.choice(vocab.ambiguous_terms))
            cue = gene in vocab.mention_genes
            p_mention = 1.0 - vocab.amb_label_noise if cue else vocab.amb_label_noise
            if rng.random() < p_mention:
                tags.append("B-Mutation")
                mentions.append(_Mention("amb", start, start))
            else:
                tags.append("O")
        else:
            tokens.append(slot)
            tags.append("O")
    return tokens, tags, mentions


def _corrupt(tags: list[str], mentions: list[_Mention], rng: random.Random, vocab: SyntheticVocab) -> list[str]:
    """Delete or shrink mentions; guaranteed to change the span set."""
    out = list(tags)

    def delete(m: _Mention) -> None:
        for i in range(m.start, m.end + 1):
            out[i] = "O"

    def shrink_or_delete(m: _Mention) -> None:
        if m.end > m.start and rng.random() < 0.5:
            out[m.end] = "O"
        else:
            delete(m)

    changed = False
    for mention in mentions:
        if mention.kind == "amb":
            delete(mention)
            changed = True
    easy = [m for m in mentions if m.kind == "easy"]
    if easy and (not changed or rng.random() < vocab.extra_easy_corruption_rate):
        shrink_or_delete(rng.choice(easy))
    return out


def generate_synthetic(
    n: int,
    rho: float,
    seed: int = 0,
    vocab: SyntheticVocab | None = None,
    ratios: Sequence[float] = DEFAULT_RATIOS,
) -> ParallelCorpus:
    """Parallel corpus of n sentences with exactly ceil(rho*n) discrepant ones.

    The adjudicated version labels every template mention; the
    pre-adjudicated version deletes or shrinks mentions in the chosen
    sentences, so the adjudicated side never has fewer mention spans.
    Deterministic for a fixed seed, including the split assignment.
    """
    if n < 20:
        raise ExperimentError("need at least 20 sentences")
    if not 0.0 < rho < 1.0:
        raise ExperimentError("discrepancy rate must be in (0, 1)")
    vocab = vocab or SyntheticVocab()
    rng = random.Random(seed)

    n_hard = round(vocab.hard_fraction * n)
    strata = ["hard"] * n_hard + ["easy"] * (n - n_hard)
    rng.shuffle(strata)

    ids: list[str] = []
    tokens_by_id: dict[str, list[str]] = {}
    adj_tags: dict[str, list[str]] = {}
    mentions_by_id: dict[str, list[_Mention]] = {}
    for i in range(n):
        doc, ordinal = divmod(i, vocab.sentences_per_document)
        sid = f"d{doc}:s{ordinal}"
        template = rng.choice(_HARD_TEMPLATES if strata[i] == "hard" else _EASY_TEMPLATES)
        tokens, tags, mentions = _instantiate(template, rng, vocab)
        ids.append(sid)
        tokens_by_id[sid] = tokens
        adj_tags[sid] = tags
        mentions_by_id[sid] = mentions

    n_victims = math.ceil(rho * n)
    hard_ids = [sid for sid, stratum in zip(ids, strata) if stratum == "hard"]
    easy_ids = [sid for sid, stratum in zip(ids, strata) if stratum == "easy"]
    rng.shuffle(hard_ids)
    rng.shuffle(easy_ids)
    if vocab.bias_hard_selection:
        candidates = hard_ids + easy_ids
    else:
        candidates = hard_ids + easy_ids
        rng.shuffle(candidates)
    victims = set(candidates[:n_victims])

    pre_tags: dict[str, list[str]] = {}
    for sid in ids:
        if sid in victims:
            pre_tags[sid] = _corrupt(adj_tags[sid], mentions_by_id[sid], rng, vocab)
        else:
            pre_tags[sid] = list(adj_tags[sid])

    adj_sentences = [TaggedSentence.build(sid, tokens_by_id[sid], adj_tags[sid]) for sid in ids]
    pre_sentences = [TaggedSentence.build(sid, tokens_by_id[sid], pre_tags[sid]) for sid in ids]
    splits = assign_splits(ids, ratios, seed)
    return ParallelCorpus.build(pre_sentences, adj_sentences, splits)


# ---------------------------------------------------------------------------
# configuration and reports


@dataclass
class ExperimentConfig:
    pool_splits: tuple[str, ...] = ("train", "dev")
    thresholds: tuple[int, ...] = (100, 200, 500)
    seeds: tuple[int, ...] = tuple(range(10))
    tagger: TrainConfig = field(default_factory=TrainConfig)
    entity_filter: str | None = None
    confidence_train_split: str = "test1"
    error_split: str = "test1"
    eval_split: str = "test2"
    similarity_method: str = "alignment"
    aggregation: str = "max"
    theta_vec: float = 0.7
    length_normalize: bool = False
    ranking_methods: tuple[str, ...] = ("random", "confidence", "similarity")
    retrain_ranking_method: str = "confidence"

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ExperimentError("need at least one seed")

    def to_dict(self) -> dict:
        return {
            "pool_splits": list(self.pool_splits),
            "thresholds": list(self.thresholds),
            "seeds": list(self.seeds),
            "tagger": self.tagger.to_dict(),
            "entity_filter": self.entity_filter,
            "confidence_train_split": self.confidence_train_split,
            "error_split": self.error_split,
            "eval_split": self.eval_split,
            "similarity_method": self.similarity_method,
            "aggregation": self.aggregation,
            "theta_vec": self.theta_vec,
            "length_normalize": self.length_normalize,
            "ranking_methods": list(self.ranking_methods),
            "retrain_ranking_method": self.retrain_ranking_method,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        kwargs = dict(data)
        if "tagger" in kwargs:
            kwargs["tagger"] = TrainConfig.from_dict(kwargs["tagger"])
        for key in ("pool_splits", "thresholds", "seeds", "ranking_methods"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        known = set(cls().to_dict())
        unknown = set(kwargs) - known
        if unknown:
            raise ExperimentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs)


def config_fingerprint(config: ExperimentConfig) -> str:
    return hashlib.sha256(
        json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


def corpus_fingerprint(corpus: ParallelCorpus) -> str:
    digest = hashlib.sha256()
    digest.update(serialize_conll(corpus.adj_sentences()).encode("utf-8"))
    for sid in corpus.order:
        if sid in corpus.pre_adjudicated:
            digest.update(
                (sid + "|" + " ".join(str(t) for t in corpus.pre_adjudicated[sid])).encode("utf-8")
            )
        digest.update(f"{sid}\t{corpus.splits[sid]}\n".encode("utf-8"))
    return digest.hexdigest()[:16]


@dataclass
class ExperimentReport:
    kind: str  # gap | ranking | retraining
    provenance: dict
    tables: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "secondpass/report@1",
                "kind": self.kind,
                "provenance": self.provenance,
                "tables": self.tables,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        payload = json.loads(text)
        if payload.get("schema") != "secondpass/report@1":
            raise ExperimentError("not a report file")
        return cls(payload["kind"], payload["provenance"], payload["tables"])

    def format_text(self) -> str:
        if self.kind == "gap":
            return self._format_gap()
        if self.kind == "ranking":
            return self._format_ranking()
        if self.kind == "retraining":
            return self._format_retraining()
        raise ExperimentError(f"unknown report kind {self.kind}")

    def _format_gap(self) -> str:
        rows = []
        for arm, data in sorted(self.tables["arms"].items()):
            version, split = arm.split("|")
            rows.append(
                [
                    version,
                    split,
                    pct(data["precision"]["mean"], data["precision"]["std"]),
                    pct(data["recall"]["mean"], data["recall"]["std"]),
                    pct(data["f1"]["mean"], data["f1"]["std"]),
                ]
            )
        table = format_table(["Training", "Eval split", "Precision", "Recall", "F-score (Std Dev)"], rows)
        gap_lines = [
            f"F gap on {split}: {100 * data['gap']:+.1f} points"
            for split, data in sorted(self.tables["gaps"].items())
        ]
        return table + "\n\n" + "\n".join(gap_lines)

    def _format_ranking(self) -> str:
        pool = self.tables["pool"]
        rows = [
            [
                "baseline",
                "All",
                f"{pool['size']} (100%)",
                pct(self.tables["baseline_all"]["precision"]),
                pct(self.tables["baseline_all"]["recall"]),
                pct(self.tables["baseline_all"]["f1"]),
            ]
        ]
        for method, per_k in sorted(self.tables["methods"].items()):
            for k_str, data in sorted(per_k.items(), key=lambda kv: int(kv[0])):
                share = int(k_str) / pool["size"]
                rows.append(
                    [
                        method,
                        f"Top-{k_str}",
                        f"{100 * share:.1f}%",
                        pct(data["precision"]["mean"], data["precision"]["std"]),
                        pct(data["recall"]["mean"], data["recall"]["std"]),
                        pct(data["f1"]["mean"], data["f1"]["std"]),
                    ]
                )
        header = ["Method", "Threshold", "Sentences to check", "Precision", "Recall", "F-score (Std Dev)"]
        note = (
            f"Pool: {pool['size']} sentences, {pool['discrepant']} "
            f"({100 * pool['base_rate']:.1f}%) with discrepancies."
        )
        return note + "\n" + format_table(header, rows)

    def _format_retraining(self) -> str:
        def sort_key(kv):
            name = kv[0]
            if name == "none":
                return (0, 0)
            if name == "all":
                return (2, 0)
            return (1, int(name))

        rows = []
        for name, data in sorted(self.tables["arms"].items(), key=sort_key):
            label = {"none": "Check none", "all": "Check all"}.get(name, f"Top-{name}")
            rows.append(
                [
                    label,
                    str(data["k"]),
                    pct(data["precision"]["mean"], data["precision"]["std"]),
                    pct(data["recall"]["mean"], data["recall"]["std"]),
                    pct(data["f1"]["mean"], data["f1"]["std"]),
                ]
            )
        header = ["Condition", "Threshold", "Precision", "Recall", "F-score (Std Dev)"]
        note = f"Ranking method: {self.tables['ranking_method']}; fixes apply to train-split sentences."
        return note + "\n" + format_table(header, rows)


def _provenance(corpus: ParallelCorpus, config: ExperimentConfig) -> dict:
    return {
        "tool": "secondpass",
        "version": __version__,
        "config_hash": config_fingerprint(config),
        "corpus_hash": corpus_fingerprint(corpus),
        "seeds": list(config.seeds),
        "config": config.to_dict(),
    }


# ---------------------------------------------------------------------------
# shared steps


def predictions_as_sentences(
    predictions: Sequence[SentencePrediction], corpus: ParallelCorpus
) -> list[TaggedSentence]:
    return [
        TaggedSentence.build(p.sentence_id, corpus.tokens[p.sentence_id], p.tags)
        for p in predictions
    ]


def evaluate_model(
    model: CrfModel,
    corpus: ParallelCorpus,
    eval_split: str,
    entity_filter: str | None = None,
) -> NerScore:
    gold = corpus.adj_sentences(eval_split)
    predicted = predictions_as_sentences(model.decode_all(gold), corpus)
    return score_ner(gold, predicted, entity_filter)


def train_with_fixes(
    corpus: ParallelCorpus,
    fixes: Mapping[str, Sequence[BioTag]],
    tagger: TrainConfig,
    seed: int,
) -> CrfModel:
    """Train on the train split with pre-adjudicated labels, except that
    sentences in `fixes` use the supplied tags. Fixes outside the train
    split are ignored (the pool may include dev, which is never trained on)."""
    training = []
    for sid in corpus.ids_in("train"):
        if sid in fixes:
            training.append(TaggedSentence.build(sid, corpus.tokens[sid], fixes[sid]))
        else:
            training.append(corpus.pre_sentence(sid))
    return train(training, replace(tagger, seed=seed))


def _aggregate_rows(per_seed: list[tuple[int, NerScore | RankingScore]]) -> dict:
    scores = [score for _, score in per_seed]
    out = {name: agg.to_dict() for name, agg in aggregate_metrics(scores).items()}
    out["per_seed"] = [{"seed": seed, **score.to_dict()} for seed, score in per_seed]
    return out


def build_ranking(
    corpus: ParallelCorpus,
    config: ExperimentConfig,
    method: str,
    seed: int,
    resource: LexicalResource | None = None,
    vectors: WordVectors | None = None,
) -> Ranking:
    """One ranking over the configured pool, by any of the three methods."""
    pool_ids = corpus.ids_in(*config.pool_splits)
    if method == "random":
        return rank_random(pool_ids, seed)
    if method == "confidence":
        model = train(
            corpus.adj_sentences(config.confidence_train_split),
            replace(config.tagger, seed=seed),
        )
        predictions = model.decode_all([corpus.adj_sentence(sid) for sid in pool_ids])
        return rank_by_confidence(
            predictions,
            pool_ids,
            length_normalize=config.length_normalize,
            provenance={
                "seed": seed,
                "model": f"crf(train={config.confidence_train_split}, adjudicated)",
            },
        )
    if method == "similarity":
        model = train(corpus.pre_sentences("train"), replace(config.tagger, seed=seed))
        gold = corpus.adj_sentences(config.error_split)
        predicted = predictions_as_sentences(model.decode_all(gold), corpus)
        errors = error_sentences(gold, predicted, config.entity_filter)
        if not errors:
            raise ExperimentError(
                f"model committed no errors on {config.error_split}; empty similarity error set"
            )
        error_sents = [corpus.adj_sentence(sid) for sid in sorted(errors)]
        pool_sents = [corpus.adj_sentence(sid) for sid in pool_ids]
        return rank_by_similarity(
            error_sents,
            pool_sents,
            method=config.similarity_method,
            aggregation=config.aggregation,
            resource=resource,
            vectors=vectors,
            theta_vec=config.theta_vec,
            provenance={
                "seed": seed,
                "model": "crf(train=train, pre_adjudicated)",
                "error_set_source": config.error_split,
            },
        )
    raise ExperimentError(f"unknown ranking method {method!r}")


# ---------------------------------------------------------------------------
# experiments


def run_gap_experiment(corpus: ParallelCorpus, config: ExperimentConfig) -> ExperimentReport:
    """Train on adjudicated vs pre-adjudicated train labels; evaluate both
    on the adjudicated test splits and report the F-score gap."""
    missing = [sid for sid in corpus.ids_in("train") if sid not in corpus.pre_adjudicated]
    if missing:
        raise ExperimentError(f"train split lacks pre-adjudicated tags for {missing[:5]}")
    eval_splits = ("test2", "test1")
    arms: dict[str, list[tuple[int, NerScore]]] = {
        f"{version}|{split}": [] for version in ("adjudicated", "pre_adjudicated") for split in eval_splits
    }
    for version in ("adjudicated", "pre_adjudicated"):
        training = (
            corpus.adj_sentences("train") if version == "adjudicated" else corpus.pre_sentences("train")
        )
        for seed in config.seeds:
            model = train(training, replace(config.tagger, seed=seed))
            for split in eval_splits:
                arms[f"{version}|{split}"].append(
                    (seed, evaluate_model(model, corpus, split, config.entity_filter))
                )
    tables: dict = {"arms": {arm: _aggregate_rows(rows) for arm, rows in arms.items()}}
    tables["gaps"] = {}
    for split in eval_splits:
        adj_f = tables["arms"][f"adjudicated|{split}"]["f1"]["mean"]
        pre_f = tables["arms"][f"pre_adjudicated|{split}"]["f1"]["mean"]
        tables["gaps"][split] = {
            "mean_f_adjudicated": adj_f,
            "mean_f_pre_adjudicated": pre_f,
            "gap": adj_f - pre_f,
        }
    return ExperimentReport("gap", _provenance(corpus, config), tables)


def run_ranking_experiment(
    corpus: ParallelCorpus,
    config: ExperimentConfig,
    resource: LexicalResource | None = None,
    vectors: WordVectors | None = None,
) -> ExperimentReport:
    """Score each configured ranking method at each threshold against the
    discrepant-sentence ground truth, plus the check-everything baseline."""
    pool_ids = corpus.ids_in(*config.pool_splits)
    if not pool_ids:
        raise ExperimentError("empty pool")
    bad = [k for k in config.thresholds if k > len(pool_ids)]
    if bad:
        raise ExperimentError(f"thresholds {bad} exceed pool size {len(pool_ids)}")
    discrepant = discrepant_ids(corpus, config.pool_splits)
    base_rate = len(discrepant) / len(pool_ids)
    all_score = score_ranking(list(pool_ids), discrepant, len(pool_ids))

    methods: dict[str, dict] = {}
    notes: list[str] = []
    for method in config.ranking_methods:
        per_k: dict[str, list[tuple[int, RankingScore]]] = {str(k): [] for k in config.thresholds}
        for seed in config.seeds:
            try:
                ranking = build_ranking(corpus, config, method, seed, resource, vectors)
            except ExperimentError as exc:
                notes.append(f"{method}/seed {seed}: {exc}")
                continue
            for k in config.thresholds:
                per_k[str(k)].append((seed, score_ranking(ranking.ids, discrepant, k)))
        if all(not rows for rows in per_k.values()):
            raise ExperimentError(f"ranking method {method} produced no rankings: {notes}")
        methods[method] = {k_str: _aggregate_rows(rows) for k_str, rows in per_k.items() if rows}

    tables = {
        "pool": {
            "size": len(pool_ids),
            "discrepant": len(discrepant),
            "base_rate": base_rate,
            "splits": list(config.pool_splits),
        },
        "baseline_all": {
            "precision": all_score.precision,
            "recall": all_score.recall,
            "f1": all_score.f1,
        },
        "methods": methods,
    }
    if notes:
        tables["notes"] = notes
    return ExperimentReport("ranking", _provenance(corpus, config), tables)


def run_retraining_experiment(
    corpus: ParallelCorpus,
    config: ExperimentConfig,
    ranking: Ranking | None = None,
    resource: LexicalResource | None = None,
    vectors: WordVectors | None = None,
) -> ExperimentReport:
    """Retrain with the top-k ranked sentences fixed to their adjudicated
    labels (train-split effect only) and report test performance per k,
    including the check-none and check-all endpoints."""
    pool_ids = corpus.ids_in(*config.pool_splits)
    if ranking is None:
        ranking = build_ranking(
            corpus, config, config.retrain_ranking_method, config.seeds[0], resource, vectors
        )
    if not ranking.is_permutation_of(pool_ids):
        raise ExperimentError("ranking is not a permutation of the configured pool")
    bad = [k for k in config.thresholds if k > len(pool_ids)]
    if bad:
        raise ExperimentError(f"thresholds {bad} exceed pool size {len(pool_ids)}")

    arms: dict[str, dict] = {}
    conditions = [("none", 0)] + [(str(k), k) for k in config.thresholds] + [("all", len(pool_ids))]
    for name, k in conditions:
        fixed_ids = set(ranking.top(k))
        fixes = {sid: corpus.adjudicated[sid] for sid in fixed_ids if sid in corpus.adjudicated}
        rows: list[tuple[int, NerScore]] = []
        for seed in config.seeds:
            model = train_with_fixes(corpus, fixes, config.tagger, seed)
            rows.append((seed, evaluate_model(model, corpus, config.eval_split, config.entity_filter)))
        arms[name] = {"k": k, **_aggregate_rows(rows)}

    tables = {
        "ranking_method": ranking.method,
        "ranking_provenance": ranking.provenance,
        "pool_size": len(pool_ids),
        "eval_split": config.eval_split,
        "arms": arms,
    }
    none_f = arms["none"]["f1"]["mean"]
    all_f = arms["all"]["f1"]["mean"]
    tables["endpoint_gap"] = {"check_none_f": none_f, "check_all_f": all_f, "gap": all_f - none_f}
    return ExperimentReport("retraining", _provenance(corpus, config), tables)
