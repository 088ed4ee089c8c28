import json
import time

import pytest
from fastapi.testclient import TestClient

from secondpass.crf import TrainConfig
from secondpass.corpus import discrepant_ids
from secondpass.experiment import (
    ExperimentConfig,
    build_ranking,
    generate_synthetic,
    run_retraining_experiment,
)
from secondpass.service import ServiceConfig, SessionState, create_app

FAST_TAGGER = TrainConfig(epochs=6, l2=0.05, learning_rate=0.2, batch_size=8)


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic(160, 0.2, seed=4)


@pytest.fixture(scope="module")
def ranking(corpus):
    config = ExperimentConfig(seeds=(0,), tagger=FAST_TAGGER)
    return build_ranking(corpus, config, "confidence", seed=0)


@pytest.fixture()
def state(corpus, ranking, tmp_path):
    return SessionState(
        corpus,
        ranking,
        tmp_path / "adjudications.jsonl",
        config=ServiceConfig(train_config=FAST_TAGGER, retrain_seed=0),
    )


@pytest.fixture()
def client(state):
    return TestClient(create_app(state))


def wait_for_job(client, job_id, timeout=60.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        response = client.get(f"/job/{job_id}")
        assert response.status_code == 200
        payload = response.json()
        if payload["status"] != "running":
            return payload
        time.sleep(0.1)
    raise AssertionError("retrain job did not finish in time")


class TestQueue:
    def test_first_page_is_rank_order(self, client, ranking):
        response = client.get("/queue", params={"offset": 0, "limit": 3})
        assert response.status_code == 200
        payload = response.json()
        assert [item["id"] for item in payload["items"]] == ranking.ids[:3]
        assert payload["items"][0]["rank"] == 1
        assert payload["total"] == len(ranking.ordered)

    def test_offset_past_end_is_empty(self, client):
        payload = client.get("/queue", params={"offset": 10_000, "limit": 5}).json()
        assert payload["items"] == []

    def test_bad_pagination_is_400(self, client):
        assert client.get("/queue", params={"offset": "-1"}).status_code == 400
        assert client.get("/queue", params={"limit": "zero"}).status_code == 400

    def test_counters_match_item_statuses(self, client, ranking):
        top = ranking.ids[0]
        client.post(f"/sentence/{top}/skip")
        payload = client.get("/queue", params={"offset": 0, "limit": 1}).json()
        assert payload["counters"]["skipped"] == 1
        assert payload["items"][0]["status"] == "skipped"


class TestSentenceDetail:
    def test_confidence_explanation(self, client, ranking):
        payload = client.get(f"/sentence/{ranking.ids[0]}").json()
        assert payload["explanation"]["kind"] == "confidence"
        assert payload["explanation"]["confidence"] == pytest.approx(ranking.ordered[0].score)

    def test_unknown_id_404(self, client):
        assert client.get("/sentence/nope").status_code == 404

    def test_similarity_detail_has_alignment_pairs(self, tmp_path):
        # corpus picked so the pre-trained model does commit test1 errors
        corpus = generate_synthetic(240, 0.25, seed=0)
        config = ExperimentConfig(seeds=(0,), tagger=FAST_TAGGER)
        sim_ranking = build_ranking(corpus, config, "similarity", seed=0)
        state = SessionState(corpus, sim_ranking, tmp_path / "log.jsonl")
        client = TestClient(create_app(state))
        payload = client.get(f"/sentence/{sim_ranking.ids[0]}").json()
        explanation = payload["explanation"]
        assert explanation["kind"] == "similarity"
        assert explanation["best_error_id"]
        assert explanation["pairs"], "top-ranked item should align with its error sentence"
        assert explanation["error_tokens"]


class TestAdjudicate:
    def test_valid_submission(self, client, state, ranking):
        sid = ranking.ids[0]
        tags = [str(t) for t in state.corpus.adjudicated[sid]]
        response = client.post(f"/sentence/{sid}/adjudicate", json={"tags": tags})
        assert response.status_code == 200
        assert response.json()["status"] == "adjudicated"
        assert response.json()["submitted_tags"] == tags

    def test_wrong_length_422(self, client, ranking):
        response = client.post(f"/sentence/{ranking.ids[0]}/adjudicate", json={"tags": ["O"]})
        assert response.status_code == 422

    def test_bad_grammar_422(self, client, state, ranking):
        sid = ranking.ids[0]
        n = len(state.corpus.tokens[sid])
        response = client.post(f"/sentence/{sid}/adjudicate", json={"tags": ["Z-Bad"] * n})
        assert response.status_code == 422

    def test_idempotent_resubmission_single_log_entry(self, client, state, ranking):
        sid = ranking.ids[0]
        tags = [str(t) for t in state.corpus.adjudicated[sid]]
        assert client.post(f"/sentence/{sid}/adjudicate", json={"tags": tags}).status_code == 200
        assert client.post(f"/sentence/{sid}/adjudicate", json={"tags": tags}).status_code == 200
        entries = [
            json.loads(line)
            for line in state.log_path.read_text().splitlines()
            if line.strip()
        ]
        assert len([e for e in entries if e["id"] == sid]) == 1

    def test_conflicting_resubmission_409(self, client, state, ranking):
        sid = ranking.ids[0]
        n = len(state.corpus.tokens[sid])
        assert (
            client.post(f"/sentence/{sid}/adjudicate", json={"tags": ["O"] * n}).status_code == 200
        )
        conflicting = ["B-Mutation"] + ["O"] * (n - 1)
        response = client.post(f"/sentence/{sid}/adjudicate", json={"tags": conflicting})
        assert response.status_code == 409

    def test_adjudicating_skipped_item_409(self, client, state, ranking):
        sid = ranking.ids[1]
        client.post(f"/sentence/{sid}/skip")
        n = len(state.corpus.tokens[sid])
        response = client.post(f"/sentence/{sid}/adjudicate", json={"tags": ["O"] * n})
        assert response.status_code == 409


class TestLogReplay:
    def test_replay_reproduces_effective_annotations(self, corpus, ranking, tmp_path):
        log = tmp_path / "log.jsonl"
        first = SessionState(corpus, ranking, log, config=ServiceConfig(train_config=FAST_TAGGER))
        client = TestClient(create_app(first))
        fixed = ranking.ids[:5]
        for sid in fixed:
            tags = [str(t) for t in corpus.adjudicated[sid]]
            assert client.post(f"/sentence/{sid}/adjudicate", json={"tags": tags}).status_code == 200
        client.post(f"/sentence/{ranking.ids[6]}/skip")

        replayed = SessionState(corpus, ranking, log, config=ServiceConfig(train_config=FAST_TAGGER))
        assert replayed.effective_pre_tags() == first.effective_pre_tags()
        assert replayed.status_of(ranking.ids[6]) == "skipped"
        for sid in fixed:
            assert replayed.status_of(sid) == "adjudicated"


class TestRetrain:
    def test_retrain_without_fixes_needs_force(self, client):
        assert client.post("/retrain").status_code == 400
        response = client.post("/retrain", json={"force": True})
        assert response.status_code == 200
        payload = wait_for_job(client, response.json()["job_id"])
        assert payload["status"] == "done"
        assert 0.0 <= payload["result"]["f1"] <= 1.0

    def test_force_retrain_equals_check_none_arm(self, corpus, ranking, client):
        config = ExperimentConfig(
            seeds=(0,), thresholds=(5,), tagger=FAST_TAGGER, retrain_ranking_method="confidence"
        )
        expected = run_retraining_experiment(corpus, config, ranking=ranking)
        response = client.post("/retrain", json={"force": True})
        payload = wait_for_job(client, response.json()["job_id"])
        assert payload["result"]["f1"] == pytest.approx(
            expected.tables["arms"]["none"]["f1"]["mean"], abs=1e-9
        )

    def test_unknown_job_404(self, client):
        assert client.get("/job/nope").status_code == 404

    def test_retrain_with_all_discrepant_fixed_equals_check_all(self, corpus, ranking, tmp_path):
        state = SessionState(
            corpus,
            ranking,
            tmp_path / "log.jsonl",
            config=ServiceConfig(train_config=FAST_TAGGER, retrain_seed=0),
        )
        client = TestClient(create_app(state))
        for sid in sorted(discrepant_ids(corpus, ("train", "dev"))):
            tags = [str(t) for t in corpus.adjudicated[sid]]
            assert client.post(f"/sentence/{sid}/adjudicate", json={"tags": tags}).status_code == 200
        response = client.post("/retrain")
        assert response.status_code == 200
        payload = wait_for_job(client, response.json()["job_id"])
        assert payload["status"] == "done"

        config = ExperimentConfig(
            seeds=(0,), thresholds=(5,), tagger=FAST_TAGGER, retrain_ranking_method="confidence"
        )
        expected = run_retraining_experiment(corpus, config, ranking=ranking)
        for metric in ("precision", "recall", "f1"):
            assert payload["result"][metric] == pytest.approx(
                expected.tables["arms"]["all"][metric]["mean"], abs=1e-9
            )

    def test_concurrent_retrain_409(self, corpus, ranking, tmp_path):
        slow = ServiceConfig(
            train_config=TrainConfig(epochs=60, l2=0.05, learning_rate=0.2), retrain_seed=0
        )
        state = SessionState(corpus, ranking, tmp_path / "log.jsonl", config=slow)
        client = TestClient(create_app(state))
        first = client.post("/retrain", json={"force": True})
        assert first.status_code == 200
        second = client.post("/retrain", json={"force": True})
        assert second.status_code == 409
        wait_for_job(client, first.json()["job_id"])
