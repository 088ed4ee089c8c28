import numpy as np
import pytest
from oracle_utils import brute_force_analysis, numeric_gradient, random_instance

from secondpass.corpus import TaggedSentence
from secondpass.crf import (
    CrfModel,
    PredictionError,
    TaggerError,
    TrainConfig,
    import_external_predictions,
    log_likelihood,
    log_likelihood_and_gradient,
    train,
    write_predictions,
)
from secondpass.features import extract_features, looks_like_mutation, word_shape


def sent(id, texts, tags):
    return TaggedSentence.build(id, texts, tags)


class TestFeatures:
    def test_mutation_token(self):
        feats = extract_features(["V599E"], 0)
        assert "shape=A0A" in feats
        assert "mutation_form" in feats
        assert "has_digit" in feats
        assert "low=v599e" in feats

    def test_plain_word(self):
        feats = extract_features(["mutations"], 0)
        assert "low=mutations" in feats
        assert "suf3=ons" in feats
        assert "mutation_form" not in feats

    def test_boundary_sentinels(self):
        feats = extract_features(["a", "b"], 0)
        assert "w[-1]=<s>" in feats
        assert "w[-2]=<s>" in feats
        assert "w[+1]=b" in feats
        assert "w[+2]=</s>" in feats

    def test_shapes(self):
        assert word_shape("BRAF") == "A"
        assert word_shape("c.35G>A") == "a.0A>A"
        assert word_shape("Abc123") == "Aa0"

    def test_hgvs_prefix(self):
        assert looks_like_mutation("c.35G>A")
        assert looks_like_mutation("p.V600E")
        assert not looks_like_mutation("codon")


def tiny_model(tag_set=("B-X", "O"), n_features=2, seed=0, extractor=None):
    rng = np.random.default_rng(seed)
    n_tags = len(tag_set)
    return CrfModel(
        tag_set=tuple(tag_set),
        feature_vocab={f"f{i}": i for i in range(n_features)},
        emission=rng.normal(size=(n_features, n_tags)),
        transition=rng.normal(size=(n_tags, n_tags)),
        start=rng.normal(size=n_tags),
        stop=rng.normal(size=n_tags),
        feature_extractor=extractor or (lambda tokens, i: [f"f{i % n_features}"]),
    )


class TestDecode:
    def test_zero_weight_model_uniform_confidence(self):
        n_tags, n = 3, 4
        model = CrfModel(
            tag_set=("B-X", "I-X", "O"),
            feature_vocab={"f0": 0},
            emission=np.zeros((1, n_tags)),
            transition=np.zeros((n_tags, n_tags)),
            start=np.zeros(n_tags),
            stop=np.zeros(n_tags),
            feature_extractor=lambda tokens, i: ["f0"],
        )
        pred = model.decode(["w"] * n, "x")
        assert pred.confidence == pytest.approx(n_tags ** -n, rel=1e-12)
        # ties resolve to the lowest tag index everywhere
        assert all(str(t) == "B-X" for t in pred.tags)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            emission, transition, start, stop, feat_ids, _ = random_instance(rng)
            model = CrfModel(
                tag_set=tuple(f"B-T{i}" for i in range(transition.shape[0] - 1)) + ("O",),
                feature_vocab={f"f{i}": i for i in range(emission.shape[0])},
                emission=emission,
                transition=transition,
                start=start,
                stop=stop,
            )
            tokens = [f"w{t}" for t in range(len(feat_ids))]
            model.encode_tokens = lambda toks, _ids=feat_ids: _ids  # fixed features
            pred = model.decode(tokens, "x")
            seqs, scores, bf_logz, best, margin = brute_force_analysis(
                emission, transition, start, stop, feat_ids
            )
            got_path = [model.tag_set.index(str(t)) for t in pred.tags]
            if margin > 1e-9:  # exact ties admit any maximizer
                assert got_path == list(seqs[best])
            assert abs(np.log(pred.confidence) - (scores[best] - bf_logz)) <= 1e-9
            assert abs(pred.log_partition - bf_logz) <= 1e-9

    def test_confidence_matches_eq_definition(self):
        model = tiny_model(seed=5)
        pred = model.decode(["a", "b", "c"], "x")
        feat_ids = model.encode_tokens(("a", "b", "c"))
        _, scores = __import__("oracle_utils").enumerate_scores(
            model.emission, model.transition, model.start, model.stop, feat_ids
        ), None
        # confidence must equal exp(score - log_partition) to near machine precision
        gold = np.asarray([model.tag_set.index(str(t)) for t in pred.tags], dtype=np.intp)
        ll = log_likelihood(
            model.emission, model.transition, model.start, model.stop, feat_ids, gold
        )
        assert pred.confidence == pytest.approx(np.exp(ll), rel=1e-12)

    def test_transition_dominance(self):
        tag_set = ("B-X", "I-X", "O")
        transition = np.zeros((3, 3))
        transition[0, 1] = 10.0  # B-X -> I-X
        start = np.array([1.0, 0.0, 0.0])  # open with B-X
        model = CrfModel(
            tag_set=tag_set,
            feature_vocab={"f0": 0},
            emission=np.zeros((1, 3)),
            transition=transition,
            start=start,
            stop=np.zeros(3),
            feature_extractor=lambda tokens, i: ["f0"],
        )
        pred = model.decode(["a", "b"], "x")
        assert [str(t) for t in pred.tags] == ["B-X", "I-X"]

    def test_empty_sentence_rejected(self):
        with pytest.raises(TaggerError):
            tiny_model().decode([], "x")

    def test_confidence_invariant_under_position_constant_shift(self):
        # bump every emission weight of one fixed position's feature: all
        # sequence scores shift equally, Pr(Y|S) must not move
        extractor = lambda tokens, i: [f"f{i}"]
        model = tiny_model(n_features=3, seed=9, extractor=extractor)
        before = model.decode(["a", "b", "c"], "x")
        shifted = tiny_model(n_features=3, seed=9, extractor=extractor)
        shifted.emission[1, :] += 7.3  # feature f1 fires exactly at position 1
        after = shifted.decode(["a", "b", "c"], "x")
        assert after.confidence == pytest.approx(before.confidence, abs=1e-9)
        assert [str(t) for t in after.tags] == [str(t) for t in before.tags]


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            emission, transition, start, stop, feat_ids, gold = random_instance(
                rng, max_len=5, max_tags=4, n_features=5
            )
            _, analytic = log_likelihood_and_gradient(
                emission, transition, start, stop, feat_ids, gold
            )
            numeric = numeric_gradient(emission, transition, start, stop, feat_ids, gold)
            for a, n in zip(analytic, numeric):
                denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
                assert np.max(np.abs(a - n) / denom) <= 1e-4

    def test_viterbi_score_at_least_gold_score(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            emission, transition, start, stop, feat_ids, gold = random_instance(rng)
            model = CrfModel(
                tag_set=tuple(f"B-T{i}" for i in range(transition.shape[0] - 1)) + ("O",),
                feature_vocab={f"f{i}": i for i in range(emission.shape[0])},
                emission=emission,
                transition=transition,
                start=start,
                stop=stop,
            )
            model.encode_tokens = lambda toks, _ids=feat_ids: _ids
            pred = model.decode([f"w{t}" for t in range(len(feat_ids))], "x")
            gold_ll = log_likelihood(emission, transition, start, stop, feat_ids, gold)
            assert np.log(pred.confidence) >= gold_ll - 1e-12


class TestTrain:
    def test_single_gradient_step_by_hand(self):
        # one 1-token sentence, one feature, two tags, one full-batch epoch:
        # update = lr * (empirical - expected) counts with zero init
        config = TrainConfig(epochs=1, l2=0.0, learning_rate=0.5, seed=0, batch_size=4)
        model = train(
            [sent("d0:s0", ["tok"], ["B-X"])],
            config,
            feature_extractor=lambda tokens, i: ["f"],
        )
        assert model.tag_set == ("B-X", "O")
        lr = 0.5
        np.testing.assert_allclose(model.emission[0], [lr * 0.5, -lr * 0.5])
        np.testing.assert_allclose(model.start, [lr * 0.5, -lr * 0.5])
        np.testing.assert_allclose(model.stop, [lr * 0.5, -lr * 0.5])
        np.testing.assert_allclose(model.transition, np.zeros((2, 2)))

    def test_log_likelihood_increases_on_separable_data(self):
        data = [
            sent("d0:s0", ["mut", "word"], ["B-X", "O"]),
            sent("d0:s1", ["word", "mut"], ["O", "B-X"]),
            sent("d0:s2", ["mut"], ["B-X"]),
            sent("d0:s3", ["word", "word"], ["O", "O"]),
        ]
        extractor = lambda tokens, i: [f"tok={tokens[i]}"]
        config = TrainConfig(epochs=5, l2=0.0, learning_rate=0.3, seed=0, batch_size=100)
        model = train(data, config, feature_extractor=extractor)
        assert model.loss_trace[1] > model.loss_trace[0]
        assert all(b >= a - 1e-9 for a, b in zip(model.loss_trace, model.loss_trace[1:]))
        pred = model.decode(["mut", "word", "mut"], "x")
        assert [str(t) for t in pred.tags] == ["B-X", "O", "B-X"]

    def test_strong_l2_pushes_predictions_toward_uniform(self):
        data = [sent("d0:s0", ["mut", "word"], ["B-X", "O"])] * 1
        extractor = lambda tokens, i: [f"tok={tokens[i]}"]
        weak = train(data, TrainConfig(epochs=40, l2=0.01, learning_rate=0.05, seed=0), extractor)
        strong = train(data, TrainConfig(epochs=40, l2=20.0, learning_rate=0.01, seed=0), extractor)
        norm = lambda m: sum(float(np.abs(a).max()) for a in (m.emission, m.transition, m.start, m.stop))
        assert norm(strong) < norm(weak)
        uniform = 2.0 ** -2
        assert abs(strong.decode(["mut", "word"], "x").confidence - uniform) < abs(
            weak.decode(["mut", "word"], "x").confidence - uniform
        )

    def test_deterministic_predictions_and_trace(self):
        data = [
            sent("d0:s0", ["V600E", "in", "BRAF"], ["B-Mutation", "O", "O"]),
            sent("d0:s1", ["wild", "type"], ["O", "O"]),
        ]
        config = TrainConfig(epochs=3, seed=13)
        m1 = train(data, config)
        m2 = train(data, config)
        assert np.allclose(m1.loss_trace, m2.loss_trace, atol=1e-9)
        p1, p2 = m1.decode(data[0]), m2.decode(data[0])
        assert p1.tags == p2.tags
        assert p1.confidence == pytest.approx(p2.confidence, abs=1e-9)

    def test_empty_training_set(self):
        with pytest.raises(TaggerError):
            train([], TrainConfig())


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        data = [sent("d0:s0", ["V600E", "mutation"], ["B-Mutation", "O"])]
        model = train(data, TrainConfig(epochs=3, seed=1))
        path = tmp_path / "model.json"
        model.save(path)
        loaded = CrfModel.load(path)
        assert loaded.tag_set == model.tag_set
        assert loaded.feature_vocab == model.feature_vocab
        np.testing.assert_array_equal(loaded.emission, model.emission)
        np.testing.assert_array_equal(loaded.transition, model.transition)
        np.testing.assert_array_equal(loaded.start, model.start)
        np.testing.assert_array_equal(loaded.stop, model.stop)
        assert loaded.loss_trace == model.loss_trace
        p1, p2 = model.decode(data[0]), loaded.decode(data[0])
        assert p1.tags == p2.tags and p1.confidence == p2.confidence


class TestExternalPredictions:
    LENGTHS = {"d0:s0": 2, "d0:s1": 3}

    def write(self, tmp_path, lines):
        path = tmp_path / "preds.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_accepts_matching_record(self, tmp_path):
        path = self.write(
            tmp_path,
            [
                '{"schema": "secondpass/predictions@1"}',
                '{"id": "d0:s0", "tags": ["B-Mutation", "O"], "confidence": 0.9}',
            ],
        )
        preds = import_external_predictions(path, self.LENGTHS)
        assert len(preds) == 1
        assert preds[0].sentence_id == "d0:s0"
        assert preds[0].log_partition is None

    def test_length_mismatch_reports_line(self, tmp_path):
        path = self.write(
            tmp_path, ['{"id": "d0:s1", "tags": ["O", "O"], "confidence": 0.5}']
        )
        with pytest.raises(PredictionError) as err:
            import_external_predictions(path, self.LENGTHS)
        assert err.value.line_no == 1

    def test_unknown_id_reports_line(self, tmp_path):
        path = self.write(
            tmp_path,
            [
                '{"id": "d0:s0", "tags": ["O", "O"], "confidence": 0.5}',
                '{"id": "nope", "tags": ["O"], "confidence": 0.5}',
            ],
        )
        with pytest.raises(PredictionError) as err:
            import_external_predictions(path, self.LENGTHS)
        assert err.value.line_no == 2

    def test_raw_score_passthrough(self, tmp_path):
        path = self.write(
            tmp_path,
            ['{"id": "d0:s0", "tags": ["O", "O"], "confidence": -12.5, "raw_score": true}'],
        )
        preds = import_external_predictions(path, self.LENGTHS)
        assert preds[0].raw_score and preds[0].confidence == -12.5

    def test_out_of_range_confidence_rejected_without_flag(self, tmp_path):
        path = self.write(tmp_path, ['{"id": "d0:s0", "tags": ["O", "O"], "confidence": 1.5}'])
        with pytest.raises(PredictionError):
            import_external_predictions(path, self.LENGTHS)

    def test_write_then_import_round_trip(self, tmp_path):
        data = [sent("d0:s0", ["V600E", "x"], ["B-Mutation", "O"])]
        model = train(data, TrainConfig(epochs=2, seed=0))
        preds = model.decode_all(data)
        path = tmp_path / "out.jsonl"
        write_predictions(path, preds, provenance={"tool": "test"})
        back = import_external_predictions(path, {"d0:s0": 2})
        assert back[0].tags == preds[0].tags
        assert back[0].confidence == preds[0].confidence
