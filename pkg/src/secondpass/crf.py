"""Linear-chain CRF: feature-based emissions, forward-backward training,
Viterbi decoding, and whole-sequence probability as the confidence score.

The confidence of a decoded sentence is the softmax of its path score
against all possible tag sequences,

    Pr(Y|S) = exp(s(Y,S)) / sum_Y' exp(s(Y',S)),

computed in log space so long sentences cannot underflow. The same module
also imports predictions produced by external taggers so they can flow
through ranking and evaluation unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import BioTag, TaggedSentence
from .features import extract_features

FeatureExtractor = Callable[[Sequence[str], int], list[str]]


class TaggerError(ValueError):
    """Invalid training input or prediction record."""


class PredictionError(TaggerError):
    """Malformed external prediction record; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class TrainConfig:
    epochs: int = 100
    l2: float = 0.1
    learning_rate: float = 0.1
    seed: int = 0
    batch_size: int = 8
    lr_decay: float = 0.05  # inverse-time: lr / (1 + lr_decay * epoch)

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise TaggerError("epochs must be >= 1")
        if self.l2 < 0:
            raise TaggerError("l2 must be >= 0")
        if self.learning_rate <= 0:
            raise TaggerError("learning rate must be > 0")
        if self.batch_size < 1:
            raise TaggerError("batch size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "l2": self.l2,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "lr_decay": self.lr_decay,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass(frozen=True)
class SentencePrediction:
    """A predicted tag sequence with its sequence-level confidence."""

    sentence_id: str
    tags: tuple[BioTag, ...]
    confidence: float
    log_partition: float | None
    raw_score: bool = False  # confidence field holds an uncalibrated score, not a probability


def _logsumexp(x: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    if axis is None:
        m = float(np.max(x))
        return m + float(np.log(np.sum(np.exp(x - m))))
    m = np.max(x, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))).squeeze(axis)


def _emission_scores(emission: np.ndarray, feat_ids: Sequence[np.ndarray]) -> np.ndarray:
    n, n_tags = len(feat_ids), emission.shape[1]
    e = np.zeros((n, n_tags))
    for t, ids in enumerate(feat_ids):
        if ids.size:
            e[t] = emission[ids].sum(axis=0)
    return e


def _forward(e: np.ndarray, transition: np.ndarray, start: np.ndarray, stop: np.ndarray):
    n = e.shape[0]
    alpha = np.empty_like(e)
    alpha[0] = start + e[0]
    for t in range(1, n):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + transition, axis=0) + e[t]
    log_z = float(_logsumexp(alpha[n - 1] + stop))
    return alpha, log_z


def _backward(e: np.ndarray, transition: np.ndarray, stop: np.ndarray) -> np.ndarray:
    n = e.shape[0]
    beta = np.empty_like(e)
    beta[n - 1] = stop
    for t in range(n - 2, -1, -1):
        beta[t] = _logsumexp(transition + (e[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def _path_score(
    e: np.ndarray, transition: np.ndarray, start: np.ndarray, stop: np.ndarray, path: np.ndarray
) -> float:
    score = float(start[path[0]] + stop[path[-1]] + e[np.arange(len(path)), path].sum())
    if len(path) > 1:
        score += float(transition[path[:-1], path[1:]].sum())
    return score


def _viterbi(e: np.ndarray, transition: np.ndarray, start: np.ndarray, stop: np.ndarray):
    """Max-score path; ties resolve to the lowest tag index at every step."""
    n, n_tags = e.shape
    score = start + e[0]
    backpointers = np.empty((n, n_tags), dtype=np.intp)
    for t in range(1, n):
        candidates = score[:, None] + transition
        backpointers[t] = np.argmax(candidates, axis=0)  # first max = lowest index
        score = candidates[backpointers[t], np.arange(n_tags)] + e[t]
    score = score + stop
    best = int(np.argmax(score))
    path = np.empty(n, dtype=np.intp)
    path[n - 1] = best
    for t in range(n - 1, 0, -1):
        path[t - 1] = backpointers[t, path[t]]
    return path, float(score[best])


def log_likelihood(
    emission: np.ndarray,
    transition: np.ndarray,
    start: np.ndarray,
    stop: np.ndarray,
    feat_ids: Sequence[np.ndarray],
    gold: np.ndarray,
) -> float:
    """log Pr(gold | sentence) under the given parameters."""
    e = _emission_scores(emission, feat_ids)
    _, log_z = _forward(e, transition, start, stop)
    return _path_score(e, transition, start, stop, gold) - log_z


def log_likelihood_and_gradient(
    emission: np.ndarray,
    transition: np.ndarray,
    start: np.ndarray,
    stop: np.ndarray,
    feat_ids: Sequence[np.ndarray],
    gold: np.ndarray,
):
    """Per-sentence log-likelihood and its gradient (empirical minus expected counts)."""
    n, n_tags = len(feat_ids), emission.shape[1]
    e = _emission_scores(emission, feat_ids)
    alpha, log_z = _forward(e, transition, start, stop)
    beta = _backward(e, transition, stop)

    unary = np.exp(alpha + beta - log_z)  # (n, T) marginals

    g_emission = np.zeros_like(emission)
    delta = -unary
    delta[np.arange(n), gold] += 1.0
    for t, ids in enumerate(feat_ids):
        if ids.size:
            g_emission[ids] += delta[t]

    g_transition = np.zeros_like(transition)
    for t in range(1, n):
        pairwise = np.exp(
            alpha[t - 1][:, None] + transition + (e[t] + beta[t])[None, :] - log_z
        )
        g_transition -= pairwise
        g_transition[gold[t - 1], gold[t]] += 1.0

    g_start = -unary[0].copy()
    g_start[gold[0]] += 1.0
    g_stop = -unary[n - 1].copy()
    g_stop[gold[n - 1]] += 1.0

    ll = _path_score(e, transition, start, stop, gold) - log_z
    return ll, (g_emission, g_transition, g_start, g_stop)


@dataclass
class CrfModel:
    """Trained weights over a fixed tag set and feature vocabulary."""

    tag_set: tuple[str, ...]
    feature_vocab: dict[str, int]
    emission: np.ndarray  # (n_features, n_tags)
    transition: np.ndarray  # (n_tags, n_tags)
    start: np.ndarray
    stop: np.ndarray
    loss_trace: list[float] = field(default_factory=list)
    feature_extractor: FeatureExtractor = extract_features

    def __post_init__(self) -> None:
        if "O" not in self.tag_set:
            raise TaggerError("tag set must contain O")
        for arr in (self.emission, self.transition, self.start, self.stop):
            if not np.all(np.isfinite(arr)):
                raise TaggerError("model weights must be finite")

    @property
    def n_tags(self) -> int:
        return len(self.tag_set)

    def encode_tokens(self, tokens: Sequence[str]) -> list[np.ndarray]:
        """Map tokens to known-feature id arrays; unknown features are dropped."""
        vocab = self.feature_vocab
        out = []
        for position in range(len(tokens)):
            ids = [vocab[f] for f in self.feature_extractor(tokens, position) if f in vocab]
            out.append(np.asarray(ids, dtype=np.intp))
        return out

    def decode(self, sentence: TaggedSentence | Sequence[str], sentence_id: str | None = None) -> SentencePrediction:
        """Viterbi-decode one sentence and attach its sequence probability."""
        if isinstance(sentence, TaggedSentence):
            tokens, sid = sentence.texts, sentence.id
        else:
            tokens, sid = tuple(sentence), sentence_id or ""
        if not tokens:
            raise TaggerError("cannot decode an empty sentence")
        feat_ids = self.encode_tokens(tokens)
        e = _emission_scores(self.emission, feat_ids)
        path, best_score = _viterbi(e, self.transition, self.start, self.stop)
        _, log_z = _forward(e, self.transition, self.start, self.stop)
        tags = tuple(BioTag.parse(self.tag_set[i]) for i in path)
        return SentencePrediction(
            sentence_id=sid,
            tags=tags,
            confidence=float(np.exp(best_score - log_z)),
            log_partition=log_z,
        )

    def decode_all(self, sentences: Iterable[TaggedSentence]) -> list[SentencePrediction]:
        return [self.decode(s) for s in sentences]

    def save(self, path: str | Path) -> None:
        payload = {
            "schema": "secondpass/crf-model@1",
            "tag_set": list(self.tag_set),
            "feature_vocab": self.feature_vocab,
            "emission": self.emission.tolist(),
            "transition": self.transition.tolist(),
            "start": self.start.tolist(),
            "stop": self.stop.tolist(),
            "loss_trace": self.loss_trace,
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CrfModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("schema") != "secondpass/crf-model@1":
            raise TaggerError(f"unsupported model file {path}")
        return cls(
            tag_set=tuple(payload["tag_set"]),
            feature_vocab=dict(payload["feature_vocab"]),
            emission=np.asarray(payload["emission"], dtype=float),
            transition=np.asarray(payload["transition"], dtype=float),
            start=np.asarray(payload["start"], dtype=float),
            stop=np.asarray(payload["stop"], dtype=float),
            loss_trace=list(payload.get("loss_trace", [])),
        )


def train(
    sentences: Sequence[TaggedSentence],
    config: TrainConfig | None = None,
    feature_extractor: FeatureExtractor = extract_features,
) -> CrfModel:
    """Fit CRF weights by mini-batch gradient ascent on the L2-penalized log-likelihood.

    The objective is sum_i log Pr(Y_i|S_i) - l2 * ||w||^2, with expectations
    from forward-backward. Identical (data, config) reproduce the same loss
    trace and predictions; the per-epoch trace stores the total training
    log-likelihood as seen before each batch update.
    """
    if not sentences:
        raise TaggerError("empty training set")
    config = config or TrainConfig()

    tag_set = tuple(sorted({str(t) for s in sentences for t in s.tags} | {"O"}))
    tag_index = {t: i for i, t in enumerate(tag_set)}
    n_tags = len(tag_set)

    feature_vocab: dict[str, int] = {}
    encoded: list[tuple[list[np.ndarray], np.ndarray]] = []
    for sentence in sentences:
        tokens = sentence.texts
        feat_ids = []
        for position in range(len(tokens)):
            ids = []
            for feat in feature_extractor(tokens, position):
                if feat not in feature_vocab:
                    feature_vocab[feat] = len(feature_vocab)
                ids.append(feature_vocab[feat])
            feat_ids.append(np.asarray(ids, dtype=np.intp))
        gold = np.asarray([tag_index[str(t)] for t in sentence.tags], dtype=np.intp)
        encoded.append((feat_ids, gold))

    emission = np.zeros((len(feature_vocab), n_tags))
    transition = np.zeros((n_tags, n_tags))
    start = np.zeros(n_tags)
    stop = np.zeros(n_tags)

    rng = np.random.default_rng(config.seed)
    n = len(encoded)
    trace: list[float] = []
    for epoch in range(config.epochs):
        lr = config.learning_rate / (1.0 + config.lr_decay * epoch)
        order = rng.permutation(n)
        epoch_ll = 0.0
        for lo in range(0, n, config.batch_size):
            batch = order[lo : lo + config.batch_size]
            g_emission = np.zeros_like(emission)
            g_transition = np.zeros_like(transition)
            g_start = np.zeros_like(start)
            g_stop = np.zeros_like(stop)
            for idx in batch:
                feat_ids, gold = encoded[idx]
                ll, (ge, gt, gs, gp) = log_likelihood_and_gradient(
                    emission, transition, start, stop, feat_ids, gold
                )
                epoch_ll += ll
                g_emission += ge
                g_transition += gt
                g_start += gs
                g_stop += gp
            frac = len(batch) / n  # spreads the whole-objective penalty over batches
            emission += lr * (g_emission - 2.0 * config.l2 * frac * emission)
            transition += lr * (g_transition - 2.0 * config.l2 * frac * transition)
            start += lr * (g_start - 2.0 * config.l2 * frac * start)
            stop += lr * (g_stop - 2.0 * config.l2 * frac * stop)
        trace.append(epoch_ll)

    return CrfModel(
        tag_set=tag_set,
        feature_vocab=feature_vocab,
        emission=emission,
        transition=transition,
        start=start,
        stop=stop,
        loss_trace=trace,
        feature_extractor=feature_extractor,
    )


def write_predictions(
    path: str | Path, predictions: Iterable[SentencePrediction], provenance: Mapping | None = None
) -> None:
    """Write predictions as JSON-lines with a leading provenance header record."""
    with open(path, "w", encoding="utf-8") as f:
        header = {"schema": "secondpass/predictions@1"}
        if provenance:
            header["provenance"] = dict(provenance)
        f.write(json.dumps(header) + "\n")
        for p in predictions:
            record = {
                "id": p.sentence_id,
                "tags": [str(t) for t in p.tags],
                "confidence": p.confidence,
            }
            if p.log_partition is not None:
                record["log_partition"] = p.log_partition
            if p.raw_score:
                record["raw_score"] = True
            f.write(json.dumps(record) + "\n")


def import_external_predictions(
    path: str | Path, token_lengths: Mapping[str, int]
) -> list[SentencePrediction]:
    """Load taggings produced outside this package (one JSON record per sentence).

    Each record needs {id, tags, confidence}; ids must resolve in the
    corpus and tag counts must match the sentence length. A confidence
    outside (0, 1] is only accepted when the record is flagged
    raw_score=true, in which case the value is kept as an uncalibrated
    score. The first offending record aborts the import with its line
    number.
    """
    predictions: list[SentencePrediction] = []
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PredictionError(line_no, f"bad JSON: {exc}") from exc
            if "id" not in record and "schema" in record:
                continue  # provenance header
            sid = record.get("id")
            if sid not in token_lengths:
                raise PredictionError(line_no, f"unknown sentence id {sid!r}")
            tags_raw = record.get("tags")
            if not isinstance(tags_raw, list) or len(tags_raw) != token_lengths[sid]:
                got = len(tags_raw) if isinstance(tags_raw, list) else "none"
                raise PredictionError(
                    line_no, f"sentence {sid} has {token_lengths[sid]} tokens but {got} tags"
                )
            try:
                tags = tuple(BioTag.parse(t) for t in tags_raw)
            except ValueError as exc:
                raise PredictionError(line_no, str(exc)) from exc
            raw_score = bool(record.get("raw_score", False))
            try:
                confidence = float(record["confidence"])
            except (KeyError, TypeError, ValueError) as exc:
                raise PredictionError(line_no, "missing or non-numeric confidence") from exc
            if not np.isfinite(confidence):
                raise PredictionError(line_no, "confidence must be finite")
            if not raw_score and not 0.0 < confidence <= 1.0:
                raise PredictionError(
                    line_no,
                    f"confidence {confidence} outside (0, 1]; flag raw_score for logit-style values",
                )
            predictions.append(
                SentencePrediction(
                    sentence_id=sid,
                    tags=tags,
                    confidence=confidence,
                    log_partition=None,
                    raw_score=raw_score,
                )
            )
    return predictions
