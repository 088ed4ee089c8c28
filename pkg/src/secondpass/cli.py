"""Command-line surface for every pipeline stage.

Exit codes: 0 on success, 1 on usage errors (bad flags), 2 on data errors
(missing files, malformed content, violated preconditions). Output files
carry provenance either as an embedded header record (JSON/JSON-lines) or
as a ``<stem>.provenance.json`` sidecar next to formats that cannot hold
one (the CoNLL grammar has no comment lines). Identical flags, including
seeds, always reproduce identical output bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .corpus import (
    DEFAULT_RATIOS,
    CorpusError,
    ParallelCorpus,
    ParseError,
    parse_conll,
    discrepant_ids,
    split_corpus,
)
from .crf import (
    CrfModel,
    PredictionError,
    TaggerError,
    TrainConfig,
    import_external_predictions,
    train,
    write_predictions,
)
from .evaluation import EvaluationError, format_table, pct, score_ner, score_ranking
from .experiment import (
    ExperimentConfig,
    ExperimentError,
    SyntheticVocab,
    build_ranking,
    generate_synthetic,
    predictions_as_sentences,
    run_gap_experiment,
    run_ranking_experiment,
    run_retraining_experiment,
)
from .ranking import (
    RankingError,
    load_ranking,
    rank_by_confidence,
    rank_by_similarity,
    rank_random,
    save_ranking,
)
from .similarity import LexicalResource, SimilarityError, WordVectors

DATA_ERRORS = (
    CorpusError,
    TaggerError,
    EvaluationError,
    ExperimentError,
    RankingError,
    SimilarityError,
    OSError,
    json.JSONDecodeError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise _UsageError(message)


def _args_fingerprint(args: argparse.Namespace) -> str:
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _provenance(args: argparse.Namespace, command: str) -> dict:
    return {
        "schema": "secondpass/provenance@1",
        "tool": "secondpass",
        "version": __version__,
        "command": command,
        "config_hash": _args_fingerprint(args),
    }


def _write_sidecar(directory: Path, stem: str, provenance: dict) -> None:
    path = directory / f"{stem}.provenance.json"
    path.write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_corpus(prefix: str) -> ParallelCorpus:
    path = Path(prefix)
    return ParallelCorpus.load(path.parent if path.parent != Path("") else Path("."), path.name)


def _parse_ratios(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _parse_thresholds(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _parse_conll_file(path: str):
    if path == "-":
        return parse_conll(sys.stdin)
    with open(path, encoding="utf-8") as f:
        return parse_conll(f)


def _train_config(path: str | None) -> TrainConfig:
    if path is None:
        return TrainConfig()
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return TrainConfig.from_dict(payload)


# ---------------------------------------------------------------------------
# subcommands


def cmd_split(args) -> int:
    path = Path(args.input)
    directory = path.parent if str(path.parent) else Path(".")
    with open(directory / f"{path.name}.pre.conll", encoding="utf-8") as f:
        pre = parse_conll(f)
    with open(directory / f"{path.name}.adj.conll", encoding="utf-8") as f:
        adj = parse_conll(f)
    corpus = split_corpus(pre, adj, _parse_ratios(args.ratios), args.seed)
    out_dir = Path(args.out_dir)
    corpus.save(out_dir, args.stem)
    _write_sidecar(out_dir, args.stem, _provenance(args, "split"))
    sizes = {name: len(corpus.ids_in(name)) for name in ("train", "dev", "test1", "test2")}
    print(f"wrote {args.stem}.{{pre.conll,adj.conll,splits.tsv}} to {out_dir} with sizes {sizes}")
    return 0


def cmd_train(args) -> int:
    corpus = _load_corpus(args.corpus)
    sentences = (
        corpus.pre_sentences(args.split) if args.annotation == "pre" else corpus.adj_sentences(args.split)
    )
    config = _train_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    model = train(sentences, config)
    model.save(args.model_out)
    _write_sidecar(Path(args.model_out).parent, Path(args.model_out).stem, _provenance(args, "train"))
    print(
        f"trained on {len(sentences)} sentences ({args.annotation}/{args.split}); "
        f"final epoch log-likelihood {model.loss_trace[-1]:.3f}; model -> {args.model_out}"
    )
    return 0


def cmd_tag(args) -> int:
    model = CrfModel.load(args.model)
    sentences = _parse_conll_file(args.input)
    predictions = model.decode_all(sentences)
    write_predictions(args.out, predictions, provenance=_provenance(args, "tag"))
    print(f"tagged {len(predictions)} sentences -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    gold = _parse_conll_file(args.gold)
    if args.pred.endswith(".jsonl"):
        lengths = {s.id: len(s) for s in gold}
        by_id = {s.id: s for s in gold}
        predictions = import_external_predictions(args.pred, lengths)
        predicted = [
            type(s).build(p.sentence_id, by_id[p.sentence_id].texts, p.tags)
            for p, s in ((p, by_id[p.sentence_id]) for p in predictions)
        ]
    else:
        predicted = _parse_conll_file(args.pred)
    score = score_ner(gold, predicted, args.type)
    table = format_table(
        ["Entity filter", "Precision", "Recall", "F-score", "TP", "FP", "FN"],
        [[args.type or "all", pct(score.precision), pct(score.recall), pct(score.f1),
          str(score.tp), str(score.fp), str(score.fn)]],
    )
    print(table)
    return 0


def cmd_rank(args) -> int:
    corpus = _load_corpus(args.corpus)
    pool_splits = tuple(args.pool.split(","))
    pool_ids = corpus.ids_in(*pool_splits)
    if not pool_ids:
        raise ExperimentError(f"empty pool for splits {pool_splits}")
    resource = LexicalResource.load(args.resource) if args.resource else None
    vectors = WordVectors.load(args.vectors) if args.vectors else None

    if args.method == "random":
        if args.seed is None:
            raise _UsageError("--seed is required for --method random")
        ranking = rank_random(pool_ids, args.seed)
    elif args.method == "confidence":
        if args.predictions:
            lengths = {sid: len(corpus.tokens[sid]) for sid in corpus.order}
            predictions = import_external_predictions(args.predictions, lengths)
            provenance = {"predictions_file": args.predictions}
        elif args.model:
            model = CrfModel.load(args.model)
            predictions = model.decode_all([corpus.adj_sentence(sid) for sid in pool_ids])
            provenance = {"model_file": args.model}
        else:
            raise _UsageError("--method confidence needs --predictions or --model")
        ranking = rank_by_confidence(
            predictions, pool_ids, length_normalize=args.length_normalize, provenance=provenance
        )
    else:  # similarity
        if not args.error_predictions:
            raise _UsageError("--method similarity needs --error-predictions")
        gold = corpus.adj_sentences(args.error_split)
        lengths = {s.id: len(s) for s in gold}
        predictions = import_external_predictions(args.error_predictions, lengths)
        predicted = predictions_as_sentences(predictions, corpus)
        from .evaluation import error_sentences as _errors

        errors = _errors(gold, predicted, args.type)
        if not errors:
            raise ExperimentError(f"no errors on {args.error_split}; empty similarity error set")
        ranking = rank_by_similarity(
            [corpus.adj_sentence(sid) for sid in sorted(errors)],
            [corpus.adj_sentence(sid) for sid in pool_ids],
            method=args.sim_method,
            aggregation=args.aggregation,
            resource=resource,
            vectors=vectors,
            theta_vec=args.theta_vec,
            provenance={"error_set_source": args.error_split,
                        "error_predictions_file": args.error_predictions},
        )
    ranking = type(ranking)(
        method=ranking.method,
        ordered=ranking.ordered,
        provenance={**ranking.provenance, **_provenance(args, "rank"), "pool": list(pool_splits)},
    )
    save_ranking(args.out, ranking)
    print(f"ranked {len(pool_ids)} sentences by {args.method} -> {args.out}")
    return 0


def cmd_rank_eval(args) -> int:
    corpus = _load_corpus(args.corpus)
    ranking = load_ranking(args.ranking)
    pool_splits = tuple(args.pool.split(","))
    discrepant = discrepant_ids(corpus, pool_splits)
    thresholds = _parse_thresholds(args.thresholds)
    pool_size = len(ranking.ordered)
    bad = [k for k in thresholds if k > pool_size]
    if bad:
        raise EvaluationError(f"thresholds {bad} exceed ranking size {pool_size}")
    rows = []
    all_score = score_ranking(ranking.ids, discrepant, pool_size)
    rows.append(["All", f"{pool_size} (100.0%)", pct(all_score.precision),
                 pct(all_score.recall), pct(all_score.f1)])
    for k in thresholds:
        score = score_ranking(ranking.ids, discrepant, k)
        rows.append(
            [f"Top-{k}", f"{100 * k / pool_size:.1f}%", pct(score.precision),
             pct(score.recall), pct(score.f1)]
        )
    print(f"Pool: {pool_size} sentences, {len(discrepant)} "
          f"({pct(len(discrepant) / pool_size)}%) with discrepancies; method: {ranking.method}")
    print(format_table(["Threshold", "Sentences to check", "Precision", "Recall", "F-score"], rows))
    return 0


def cmd_simulate(args) -> int:
    payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if payload.get("schema") != "secondpass/config@1":
        raise ExperimentError(f"{args.config}: expected schema secondpass/config@1")
    corpus = _load_corpus(payload["corpus"])
    config = ExperimentConfig.from_dict(payload.get("experiment", {}))
    resource = LexicalResource.load(payload["resource"]) if payload.get("resource") else None
    vectors = WordVectors.load(payload["vectors"]) if payload.get("vectors") else None
    ranking = load_ranking(payload["ranking_file"]) if payload.get("ranking_file") else None
    out_dir = Path(payload.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    runners = {
        "gap": lambda: run_gap_experiment(corpus, config),
        "ranking": lambda: run_ranking_experiment(corpus, config, resource, vectors),
        "retraining": lambda: run_retraining_experiment(corpus, config, ranking, resource, vectors),
    }
    for kind in payload.get("experiments", ["gap", "ranking", "retraining"]):
        if kind not in runners:
            raise ExperimentError(f"unknown experiment {kind!r}")
        report = runners[kind]()
        out_path = out_dir / f"report.{kind}.json"
        out_path.write_text(report.to_json() + "\n", encoding="utf-8")
        print(f"== {kind} ==")
        print(report.format_text())
        print(f"report -> {out_path}\n")
    return 0


def cmd_synth(args) -> int:
    vocab = SyntheticVocab(bias_hard_selection=not args.uniform_corruption)
    corpus = generate_synthetic(args.n, args.rho, args.seed, vocab=vocab)
    out_dir = Path(args.out_dir)
    corpus.save(out_dir, args.stem)
    _write_sidecar(out_dir, args.stem, _provenance(args, "synth"))
    discrepant = discrepant_ids(corpus, ("train", "dev", "test1", "test2"))
    print(
        f"wrote synthetic corpus ({args.n} sentences, {len(discrepant)} discrepant) "
        f"to {out_dir}/{args.stem}.*"
    )
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, SessionState, serve

    corpus = _load_corpus(args.corpus)
    ranking = load_ranking(args.ranking)
    model = CrfModel.load(args.model) if args.model else None
    predictions = None
    if args.predictions:
        lengths = {sid: len(corpus.tokens[sid]) for sid in corpus.order}
        predictions = {
            p.sentence_id: p for p in import_external_predictions(args.predictions, lengths)
        }
    state = SessionState(
        corpus,
        ranking,
        args.log,
        config=ServiceConfig(train_config=_train_config(args.train_config)),
        model=model,
        predictions=predictions,
        resource=LexicalResource.load(args.resource) if args.resource else None,
        vectors=WordVectors.load(args.vectors) if args.vectors else None,
    )
    print(f"serving triage queue on http://{args.host}:{args.port} (log: {args.log})")
    serve(state, args.host, args.port)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="secondpass", description=__doc__)
    parser.add_argument("--version", action="version", version=f"secondpass {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("split", help="assign train/dev/test1/test2 splits to a parallel corpus")
    p.add_argument("--input", required=True, help="corpus prefix (reads <prefix>.pre.conll and <prefix>.adj.conll)")
    p.add_argument("--ratios", default=",".join(str(r) for r in DEFAULT_RATIOS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stem", default="corpus")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the CRF tagger on one split")
    p.add_argument("--corpus", required=True, help="corpus prefix (directory/stem)")
    p.add_argument("--annotation", choices=("pre", "adj"), default="adj")
    p.add_argument("--split", default="train")
    p.add_argument("--config", help="JSON TrainConfig file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tag", help="decode a CoNLL file and write predictions with confidences")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="CoNLL file ('-' for stdin)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("eval", help="span-level P/R/F of predictions against gold")
    p.add_argument("--gold", required=True, help="gold CoNLL file")
    p.add_argument("--pred", required=True, help="predictions (.jsonl) or CoNLL file")
    p.add_argument("--type", help="restrict scoring to one entity type (e.g. Mutation)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="rank the pool for second annotation")
    p.add_argument("--method", choices=("random", "confidence", "similarity"), required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--pool", default="train,dev", help="comma-separated split names")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="random method: permutation seed")
    p.add_argument("--predictions", help="confidence method: predictions over the pool")
    p.add_argument("--model", help="confidence method: model file to decode the pool with")
    p.add_argument("--length-normalize", action="store_true")
    p.add_argument("--error-predictions", help="similarity method: predictions over the error split")
    p.add_argument("--error-split", default="test1")
    p.add_argument("--sim-method", choices=("alignment", "embedding"), default="alignment")
    p.add_argument("--aggregation", choices=("max", "mean"), default="max")
    p.add_argument("--resource", help="lexical resource TSV")
    p.add_argument("--vectors", help="word vectors text file")
    p.add_argument("--theta-vec", type=float, default=0.7)
    p.add_argument("--type", help="entity filter when deriving the error set")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("rank-eval", help="score a ranking against discrepancy ground truth")
    p.add_argument("--ranking", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--pool", default="train,dev")
    p.add_argument("--thresholds", default="100,200,500")
    p.set_defaults(func=cmd_rank_eval)

    p = sub.add_parser("simulate", help="run gap / ranking / retraining experiments from a config file")
    p.add_argument("--config", required=True, help="JSON config (schema secondpass/config@1)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="generate a synthetic parallel corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, required=True, help="discrepancy rate in (0,1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stem", default="corpus")
    p.add_argument("--uniform-corruption", action="store_true",
                   help="draw corrupted sentences uniformly instead of hard-stratum-first")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="start the triage HTTP service")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ranking", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--log", default="adjudications.jsonl")
    p.add_argument("--model", help="model file for per-sentence predictions")
    p.add_argument("--predictions", help="predictions file instead of a model")
    p.add_argument("--train-config", help="JSON TrainConfig for retrain jobs")
    p.add_argument("--resource", help="lexical resource TSV for alignment explanations")
    p.add_argument("--vectors", help="word vectors for alignment explanations")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print("run 'secondpass --help' for help", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except PredictionError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
