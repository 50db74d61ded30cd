"""HTTP service for operators and the feedback UI.

Single-writer run model: one pipeline run executes at a time (409 on a
second POST /run), runs execute on a background thread so the feedback
endpoints stay responsive in interactive mode, and completed stage graphs
are served as immutable snapshots.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import PipelineConfig
from .feedback import FeedbackStore
from .graph import CausalGraph
from .pipeline import (
    EncoderArtifact,
    PipelineData,
    PipelineRun,
    prepare_data,
    report_dict,
    run_pipeline,
    train_encoder_artifact,
)
from .rca import RcaConfig, detect_anomaly, random_walk_rca
from .rules import ContextRule, apply_rules, parse_rules_text

STAGES = ("raw", "feedback_adjusted", "pruned", "context_extended")


class AnswerBody(BaseModel):
    query_id: str
    choice: str


class RcaBody(BaseModel):
    anomaly: str | None = None


class RunBody(BaseModel):
    feedback_source: str = "oracle"
    budget: int = 30


class ApiError(Exception):
    def __init__(self, code: int, message: str, detail: str | None = None):
        if code not in (400, 404, 409, 500):
            raise ValueError(f"unsupported error code {code}")
        self.code = code
        self.message = message
        self.detail = detail
        super().__init__(message)

    def response(self) -> JSONResponse:
        body = {"code": self.code, "message": self.message}
        if self.detail:
            body["detail"] = self.detail
        return JSONResponse(status_code=self.code, content=body)


class PipelineService:
    """Owns the store, encoder, data, rules, and completed runs."""

    def __init__(self, state_dir: str | Path, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.store = FeedbackStore(
            state_dir=self.state_dir / "feedback",
            retrain_threshold=self.config.retrain_threshold,
        )
        self.rules: list[ContextRule] = []
        self.runs: dict[str, PipelineRun] = {}
        self.latest: PipelineRun | None = None
        self._data: PipelineData | None = None
        self._artifact: EncoderArtifact | None = None
        self._run_lock = threading.Lock()
        self._running: str | None = None

    # -- lazy heavy state -------------------------------------------------

    def data(self) -> PipelineData:
        if self._data is None:
            self._data = prepare_data(self.config)
        return self._data

    def artifact(self) -> EncoderArtifact:
        if self._artifact is None:
            path = self.state_dir / "encoder.json"
            if path.exists():
                self._artifact = EncoderArtifact.load(path)
            else:
                self._artifact = train_encoder_artifact(self.config, self.data())
                self._artifact.save(path)
        return self._artifact

    # -- runs --------------------------------------------------------------

    def start_run(self, feedback_source: str, budget: int) -> str:
        if feedback_source not in ("oracle", "interactive"):
            raise ApiError(400, f"unknown feedback source {feedback_source!r}")
        with self._run_lock:
            if self._running is not None:
                raise ApiError(409, f"run {self._running} still in progress")
            run_id = uuid.uuid4().hex[:12]
            self._running = run_id
        placeholder = PipelineRun(run_id=run_id, config=self.config.to_dict())
        self.runs[run_id] = placeholder
        thread = threading.Thread(
            target=self._execute, args=(run_id, feedback_source, budget), daemon=True
        )
        thread.start()
        return run_id

    def _execute(self, run_id: str, feedback_source: str, budget: int) -> None:
        try:
            run = run_pipeline(
                self.config,
                feedback_source=feedback_source,
                feedback_budget=budget,
                encoder_artifact=self.artifact(),
                data=self.data(),
                store=self.store,
                rules=self.rules or None,
                run_id=run_id,
            )
            self.runs[run_id] = run
            self.latest = run
        except Exception as exc:  # surfaced via GET /run/{id}
            self.runs[run_id].status = f"failed: {exc}"
        finally:
            with self._run_lock:
                self._running = None

    # -- graph / rules / rca ------------------------------------------------

    def graph(self, stage: str) -> CausalGraph:
        if stage not in STAGES:
            raise ApiError(404, f"unknown stage {stage!r}")
        if self.latest is None or stage not in self.latest.stage_graphs:
            raise ApiError(404, f"stage {stage!r} not produced yet")
        return self.latest.stage_graphs[stage]

    def upload_rules(self, text: str) -> list[dict]:
        try:
            rules = parse_rules_text(text)
        except ValueError as exc:
            raise ApiError(400, "invalid rule file", detail=str(exc))
        self.rules = rules
        if self.latest is None or "pruned" not in self.latest.stage_graphs:
            return [
                {"rule_id": r.rule_id, "fired": False, "injected": False,
                 "reason": "no pruned graph yet"}
                for r in rules
            ]
        extended, outcomes = apply_rules(
            self.latest.stage_graphs["pruned"], rules, self.data().latest_batch
        )
        self.latest.stage_graphs["context_extended"] = extended
        return [o.to_dict() for o in outcomes]

    def rca(self, anomaly: str | None) -> dict:
        if self.latest is None or "context_extended" not in self.latest.stage_graphs:
            raise ApiError(400, "no context-extended graph; complete a run first")
        graph = self.latest.stage_graphs["context_extended"]
        if anomaly is None:
            anomaly = detect_anomaly(self.data().latest_batch, self.config.z_threshold)
            if anomaly is None:
                raise ApiError(404, "no anomaly detected and none supplied")
        if anomaly not in graph.nodes:
            raise ApiError(404, f"anomaly node {anomaly!r} not in graph")
        result = random_walk_rca(
            graph,
            anomaly,
            RcaConfig(
                walks=self.config.walks,
                max_steps=self.config.max_steps,
                restart_prob=self.config.restart_prob,
                seed=self.config.seed + 307,
            ),
        )
        return result.to_dict()

    def recent_metrics(self, nodes: list[str], samples: int) -> dict:
        batch = self.data().latest_batch
        series = {}
        for node in nodes:
            if node in batch.node_ids:
                series[node] = [float(v) for v in batch.series(node)[-samples:]]
        return {"samples": samples, "series": series}


def create_app(
    state_dir: str | Path = "state", config: PipelineConfig | None = None
) -> FastAPI:
    service = PipelineService(state_dir, config)
    app = FastAPI(title="causemine", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return ApiError(400, "malformed request body", detail=str(exc)).response()

    @app.get("/feedback/next")
    def feedback_next():
        query = service.store.oldest_pending()
        if query is None:
            raise ApiError(404, "no pending queries")
        return query.to_dict()

    @app.post("/feedback/answer")
    def feedback_answer(body: AnswerBody):
        if body.choice not in ("a", "b"):
            raise ApiError(400, f"choice must be 'a' or 'b', got {body.choice!r}")
        try:
            triggered = service.store.submit_feedback(body.query_id, body.choice)
        except KeyError as exc:
            message = str(exc).strip("'\"")
            if "already answered" in message:
                raise ApiError(409, message) from exc
            raise ApiError(404, message) from exc
        return {"accepted": True, "retrain_triggered": triggered}

    @app.get("/graph/{stage}")
    def get_graph(stage: str):
        return service.graph(stage).to_dict()

    @app.get("/ground-truth")
    def get_ground_truth():
        data = service.data()
        if data.ground_truth is None:
            raise ApiError(404, "no ground truth available")
        return data.ground_truth.causal_graph.to_dict()

    @app.post("/rules")
    async def post_rules(request: Request):
        text = (await request.body()).decode("utf-8")
        return service.upload_rules(text)

    @app.post("/rca")
    def post_rca(body: RcaBody):
        return service.rca(body.anomaly)

    @app.post("/run")
    def post_run(body: RunBody):
        run_id = service.start_run(body.feedback_source, body.budget)
        return {"run_id": run_id}

    @app.get("/run/{run_id}")
    def get_run(run_id: str):
        run = service.runs.get(run_id)
        if run is None:
            raise ApiError(404, f"unknown run {run_id!r}")
        return report_dict(run)

    @app.get("/metrics/recent")
    def metrics_recent(nodes: str = "", samples: int = 120):
        wanted = [n for n in nodes.split(",") if n]
        return service.recent_metrics(wanted, samples)

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

        @app.get("/")
        def index():
            return RedirectResponse(url="/ui/")

    return app
