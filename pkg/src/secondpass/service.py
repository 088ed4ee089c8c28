"""HTTP service for working a ranked adjudication queue.

One reviewer per session: reads are concurrent, writes (adjudications,
skips) serialize through a lock and append to a JSON-lines log, and at
most one retrain job runs at a time against an immutable corpus snapshot.
Replaying the log against the original corpus files reconstructs the
session state exactly.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .corpus import BioTag, ParallelCorpus
from .crf import CrfModel, SentencePrediction, TrainConfig
from .evaluation import NerScore
from .experiment import evaluate_model, train_with_fixes
from .ranking import Ranking
from .similarity import LexicalResource, WordVectors, align_score

LOG_SCHEMA = "secondpass/adjudication@1"


class ServiceError(ValueError):
    """Invalid service configuration."""


@dataclass
class ServiceConfig:
    train_config: TrainConfig = field(default_factory=TrainConfig)
    entity_filter: str | None = None
    eval_split: str = "test2"
    retrain_seed: int = 0
    annotator: str = "reviewer"
    cors_origins: tuple[str, ...] = ("*",)


class SessionState:
    """Corpus + ranking + append-only adjudication log + retrain jobs."""

    def __init__(
        self,
        corpus: ParallelCorpus,
        ranking: Ranking,
        log_path: str | Path,
        config: ServiceConfig | None = None,
        model: CrfModel | None = None,
        predictions: Mapping[str, SentencePrediction] | None = None,
        resource: LexicalResource | None = None,
        vectors: WordVectors | None = None,
    ):
        unknown = [sid for sid in ranking.ids if sid not in corpus.tokens]
        if unknown:
            raise ServiceError(f"ranking references unknown sentences: {unknown[:5]}")
        self.corpus = corpus
        self.ranking = ranking
        self.config = config or ServiceConfig()
        self.log_path = Path(log_path)
        self.model = model
        self.resource = resource
        self.vectors = vectors
        self._rank_of = {item.sentence_id: i + 1 for i, item in enumerate(ranking.ordered)}
        self._items = {item.sentence_id: item for item in ranking.ordered}
        self._lock = threading.Lock()
        self._adjudicated: dict[str, tuple[BioTag, ...]] = {}
        self._skipped: set[str] = set()
        self._predictions: dict[str, SentencePrediction] = dict(predictions or {})
        self._jobs: dict[str, dict] = {}
        self._active_job: str | None = None
        if self.log_path.exists():
            self._replay_log()

    # -- log -----------------------------------------------------------------

    def _replay_log(self) -> None:
        with open(self.log_path, encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line:
                    continue
                record = json.loads(line)
                if record.get("schema") != LOG_SCHEMA:
                    raise ServiceError(f"{self.log_path}: line {line_no}: unknown log schema")
                sid = record["id"]
                if record["action"] == "adjudicate":
                    self._adjudicated[sid] = tuple(BioTag.parse(t) for t in record["tags"])
                elif record["action"] == "skip":
                    self._skipped.add(sid)
                else:
                    raise ServiceError(f"{self.log_path}: line {line_no}: unknown action")

    def _append_log(self, action: str, sid: str, tags: Sequence[BioTag] | None) -> None:
        record = {
            "schema": LOG_SCHEMA,
            "action": action,
            "id": sid,
            "annotator": self.config.annotator,
            "timestamp": time.time(),
        }
        if tags is not None:
            record["tags"] = [str(t) for t in tags]
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record) + "\n")

    # -- state ---------------------------------------------------------------

    def status_of(self, sid: str) -> str:
        if sid in self._adjudicated:
            return "adjudicated"
        if sid in self._skipped:
            return "skipped"
        return "pending"

    def counters(self) -> dict:
        with self._lock:
            adjudicated = sum(1 for sid in self._rank_of if sid in self._adjudicated)
            skipped = sum(1 for sid in self._rank_of if sid in self._skipped)
        return {
            "pending": len(self._rank_of) - adjudicated - skipped,
            "adjudicated": adjudicated,
            "skipped": skipped,
        }

    def effective_pre_tags(self) -> dict[str, tuple[BioTag, ...]]:
        """Pre-adjudicated tags with this session's fixes applied."""
        with self._lock:
            fixes = dict(self._adjudicated)
        out = {sid: tags for sid, tags in self.corpus.pre_adjudicated.items()}
        out.update(fixes)
        return out

    def adjudicate(self, sid: str, tags: Sequence[BioTag]) -> tuple[int, str]:
        """Returns (http_status, message). 200 includes idempotent resubmission."""
        with self._lock:
            if sid in self._skipped:
                return 409, "sentence was skipped; skipped items cannot be adjudicated"
            existing = self._adjudicated.get(sid)
            if existing is not None:
                if existing == tuple(tags):
                    return 200, "already adjudicated with identical tags"
                return 409, "sentence already adjudicated with different tags (first writer wins)"
            self._adjudicated[sid] = tuple(tags)
            self._append_log("adjudicate", sid, tags)
            return 200, "adjudicated"

    def skip(self, sid: str) -> tuple[int, str]:
        with self._lock:
            if sid in self._adjudicated:
                return 409, "sentence already adjudicated"
            if sid in self._skipped:
                return 200, "already skipped"
            self._skipped.add(sid)
            self._append_log("skip", sid, None)
            return 200, "skipped"

    def prediction_for(self, sid: str) -> SentencePrediction | None:
        with self._lock:
            if sid in self._predictions:
                return self._predictions[sid]
        if self.model is None:
            return None
        prediction = self.model.decode(self.corpus.adj_sentence(sid))
        with self._lock:
            self._predictions[sid] = prediction
        return prediction

    # -- retrain jobs ----------------------------------------------------------

    def start_retrain(self, force: bool) -> tuple[int, dict]:
        with self._lock:
            if self._active_job is not None and self._jobs[self._active_job]["status"] == "running":
                return 409, {"error": "a retrain job is already running", "job_id": self._active_job}
            if not self._adjudicated and not force:
                return 400, {"error": "no adjudications yet; pass force=true to retrain anyway"}
            job_id = uuid.uuid4().hex[:12]
            fixes = dict(self._adjudicated)
            self._jobs[job_id] = {"status": "running", "result": None, "error": None, "fixes": len(fixes)}
            self._active_job = job_id
        thread = threading.Thread(target=self._run_retrain, args=(job_id, fixes), daemon=True)
        thread.start()
        return 200, {"job_id": job_id}

    def _run_retrain(self, job_id: str, fixes: dict[str, tuple[BioTag, ...]]) -> None:
        try:
            model = train_with_fixes(
                self.corpus, fixes, self.config.train_config, self.config.retrain_seed
            )
            score = evaluate_model(
                model, self.corpus, self.config.eval_split, self.config.entity_filter
            )
            with self._lock:
                self._jobs[job_id]["status"] = "done"
                self._jobs[job_id]["result"] = score.to_dict()
                self._active_job = None
        except Exception as exc:  # surfaced through the job, not the server log
            with self._lock:
                self._jobs[job_id]["status"] = "failed"
                self._jobs[job_id]["error"] = str(exc)
                self._active_job = None

    def job(self, job_id: str) -> dict | None:
        with self._lock:
            record = self._jobs.get(job_id)
            return dict(record) if record else None

    # -- payloads ---------------------------------------------------------------

    def explanation_for(self, sid: str, detail: bool) -> dict | None:
        item = self._items[sid]
        if self.ranking.method == "similarity":
            payload: dict = {
                "kind": "similarity",
                "score": item.score,
                "best_error_id": item.best_error_id,
            }
            if detail and item.best_error_id and item.best_error_id in self.corpus.tokens:
                error_tokens = list(self.corpus.tokens[item.best_error_id])
                alignment = align_score(
                    list(self.corpus.tokens[sid]),
                    error_tokens,
                    resource=self.resource,
                    vectors=self.vectors,
                )
                payload["error_tokens"] = error_tokens
                payload["pairs"] = [[p.s1_index, p.s2_index, p.evidence] for p in alignment.pairs]
                payload["alignment_score"] = alignment.score
            return payload
        if self.ranking.method == "confidence":
            return {"kind": "confidence", "confidence": item.score}
        return None

    def queue_item(self, sid: str, detail: bool = False) -> dict:
        item = self._items[sid]
        prediction = self.prediction_for(sid)
        with self._lock:
            submitted = self._adjudicated.get(sid)
        pre = self.corpus.pre_adjudicated.get(sid)
        return {
            "schema": "secondpass/queue-item@1",
            "id": sid,
            "rank": self._rank_of[sid],
            "score": item.score,
            "tokens": list(self.corpus.tokens[sid]),
            "pre_tags": [str(t) for t in pre] if pre is not None else None,
            "prediction_tags": [str(t) for t in prediction.tags] if prediction else None,
            "confidence": prediction.confidence if prediction else None,
            "explanation": self.explanation_for(sid, detail),
            "status": self.status_of(sid),
            "submitted_tags": [str(t) for t in submitted] if submitted else None,
        }


def _parse_page_params(request: Request) -> tuple[int, int] | None:
    try:
        offset = int(request.query_params.get("offset", "0"))
        limit = int(request.query_params.get("limit", "50"))
    except ValueError:
        return None
    if offset < 0 or limit < 1:
        return None
    return offset, limit


def _validate_tags(payload: object, expected_length: int) -> tuple[BioTag, ...] | str:
    if not isinstance(payload, dict) or not isinstance(payload.get("tags"), list):
        return "body must be a JSON object with a 'tags' list"
    raw = payload["tags"]
    if len(raw) != expected_length:
        return f"expected {expected_length} tags, got {len(raw)}"
    try:
        return tuple(BioTag.parse(str(t)) for t in raw)
    except ValueError as exc:
        return str(exc)


def create_app(state: SessionState) -> FastAPI:
    app = FastAPI(title="secondpass triage service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(state.config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/queue")
    def queue(request: Request) -> JSONResponse:
        page = _parse_page_params(request)
        if page is None:
            return JSONResponse({"error": "offset/limit must be non-negative integers"}, status_code=400)
        offset, limit = page
        ids = state.ranking.ids[offset : offset + limit]
        return JSONResponse(
            {
                "schema": "secondpass/queue@1",
                "total": len(state.ranking.ordered),
                "offset": offset,
                "limit": limit,
                "counters": state.counters(),
                "items": [state.queue_item(sid) for sid in ids],
            }
        )

    @app.get("/sentence/{sid}")
    def sentence(sid: str) -> JSONResponse:
        if sid not in state._items:
            return JSONResponse({"error": f"unknown sentence {sid}"}, status_code=404)
        return JSONResponse(state.queue_item(sid, detail=True))

    @app.post("/sentence/{sid}/adjudicate")
    async def adjudicate(sid: str, request: Request) -> JSONResponse:
        if sid not in state._items:
            return JSONResponse({"error": f"unknown sentence {sid}"}, status_code=404)
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"}, status_code=422)
        tags = _validate_tags(payload, len(state.corpus.tokens[sid]))
        if isinstance(tags, str):
            return JSONResponse({"error": tags}, status_code=422)
        status, message = state.adjudicate(sid, tags)
        if status != 200:
            return JSONResponse({"error": message}, status_code=status)
        return JSONResponse(state.queue_item(sid))

    @app.post("/sentence/{sid}/skip")
    async def skip(sid: str) -> JSONResponse:
        if sid not in state._items:
            return JSONResponse({"error": f"unknown sentence {sid}"}, status_code=404)
        status, message = state.skip(sid)
        if status != 200:
            return JSONResponse({"error": message}, status_code=status)
        return JSONResponse(state.queue_item(sid))

    @app.post("/retrain")
    async def retrain(request: Request) -> JSONResponse:
        force = False
        body = await request.body()
        if body:
            try:
                payload = json.loads(body)
                force = bool(payload.get("force", False))
            except (json.JSONDecodeError, AttributeError):
                return JSONResponse({"error": "body must be JSON"}, status_code=422)
        status, payload = state.start_retrain(force)
        payload["schema"] = "secondpass/retrain@1"
        return JSONResponse(payload, status_code=status)

    @app.get("/job/{job_id}")
    def job(job_id: str) -> JSONResponse:
        record = state.job(job_id)
        if record is None:
            return JSONResponse({"error": f"unknown job {job_id}"}, status_code=404)
        return JSONResponse(
            {
                "schema": "secondpass/job@1",
                "id": job_id,
                "status": record["status"],
                "result": record["result"],
                "error": record["error"],
                "fixes": record["fixes"],
            }
        )

    return app


def serve(state: SessionState, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(state), host=host, port=port, log_level="warning")
