"""HTTP surface over the on-disk data root.

Layout under the data root (all state is plain files, no database):

    claims.jsonl             gold claims served by this instance
    submissions/<id>.jsonl   uploaded submissions
    submissions/index.json   submission id -> {team}
    reports/<id>.json        score reports
    plan.json                annotation sampling plan
    ratings.jsonl            append-only human rating log
    annotators.json          optional {token: annotator} map

Endpoints mirror the CLI workflows; scoring runs as a polled background job
because judge calls may be slow.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .adapters import CachingJudge, HttpJudge, MockTextJudge, MockVisualJudge
from .analysis import HumanRating, RatingLog, SamplingPlan, correlation_report
from .leaderboard import build_leaderboard
from .model import (
    Claim,
    ParseError,
    Submission,
    ValidationError,
    load_claims,
    record_from_dict,
    record_to_dict,
    submission_from_jsonl,
    submission_to_jsonl,
    validate_submission,
)
from .scoring import DEFAULT_TAU, ScoreReport, averimatec_score, normalize_submission


def task_token(sample_id: str) -> str:
    return hashlib.sha256(sample_id.encode("utf-8")).hexdigest()[:16]


class SubmissionUpload(BaseModel):
    team: str
    records: list[dict]


class RatingUpload(BaseModel):
    task_id: str
    coverage: int = Field(ge=0, le=5)
    relevance: int = Field(ge=0, le=5)
    annotator: Optional[str] = None


class ServiceState:
    def __init__(self, root: str | Path, judge_url: Optional[str] = None, tau: float = DEFAULT_TAU):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "submissions").mkdir(exist_ok=True)
        (self.root / "reports").mkdir(exist_ok=True)
        self.tau = tau
        inner = HttpJudge(judge_url) if judge_url else None
        self.text_judge = CachingJudge(inner or MockTextJudge(), cache_dir=self.root / "judge_cache")
        self.visual_judge = inner or MockVisualJudge()
        self.jobs: dict[str, dict] = {}
        self._job_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self._rating_lock = threading.Lock()
        self._claims: Optional[list[Claim]] = None

    def claims(self) -> list[Claim]:
        if self._claims is None:
            path = self.root / "claims.jsonl"
            self._claims = load_claims(path) if path.exists() else []
        return self._claims

    def submission_index(self) -> dict:
        path = self.root / "submissions" / "index.json"
        return json.loads(path.read_text()) if path.exists() else {}

    def save_submission(self, team: str, sub: Submission) -> str:
        payload = submission_to_jsonl(sub)
        sub_id = f"{team}-{hashlib.sha256(payload.encode()).hexdigest()[:12]}"
        (self.root / "submissions" / f"{sub_id}.jsonl").write_text(payload, encoding="utf-8")
        index = self.submission_index()
        index[sub_id] = {"team": team}
        (self.root / "submissions" / "index.json").write_text(json.dumps(index))
        return sub_id

    def load_submission(self, sub_id: str) -> Submission:
        path = self.root / "submissions" / f"{sub_id}.jsonl"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown submission: {sub_id}")
        return submission_from_jsonl(path.read_text(encoding="utf-8"))

    def job_lock(self, sub_id: str) -> threading.Lock:
        with self._guard:
            return self._job_locks.setdefault(sub_id, threading.Lock())

    def rating_log(self) -> RatingLog:
        return RatingLog(self.root / "ratings.jsonl")

    def plan(self) -> Optional[SamplingPlan]:
        path = self.root / "plan.json"
        if not path.exists():
            return None
        return SamplingPlan.from_dict(json.loads(path.read_text()))

    def resolve_annotator(self, token: Optional[str], query_name: Optional[str]) -> str:
        tokens_path = self.root / "annotators.json"
        if tokens_path.exists():
            tokens = json.loads(tokens_path.read_text())
            if token and token in tokens:
                return tokens[token]
            raise HTTPException(status_code=401, detail="unknown annotator token")
        if query_name:
            return query_name
        raise HTTPException(status_code=400, detail="annotator required")


def create_app(
    root: str | Path,
    judge_url: Optional[str] = None,
    tau: float = DEFAULT_TAU,
    frontend_dir: Optional[str | Path] = None,
) -> FastAPI:
    state = ServiceState(root, judge_url=judge_url, tau=tau)
    app = FastAPI(title="image-text claim verification service")
    app.state.harness = state
    # the annotation UI may be served from a different origin during
    # development; the payloads carry no secrets beyond the annotator token
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/submissions")
    def upload_submission(body: SubmissionUpload):
        try:
            records = tuple(record_from_dict(r) for r in body.records)
            sub = Submission(records=records)
        except (ParseError, ValidationError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        report = validate_submission(sub, state.claims())
        sub_id = state.save_submission(body.team, sub)
        return {
            "submission_id": sub_id,
            "warnings": [
                {"claim_id": i.claim_id, "code": i.code, "message": i.message}
                for i in report.issues
            ],
        }

    def run_scoring(sub_id: str, job_id: str) -> None:
        try:
            sub = state.load_submission(sub_id)
            report = averimatec_score(
                state.claims(), sub, state.text_judge, state.visual_judge, tau=state.tau
            )
            (state.root / "reports" / f"{sub_id}.json").write_text(
                json.dumps(report.to_dict(), indent=2)
            )
            state.jobs[job_id].update(status="done", report_id=sub_id)
        except Exception as exc:
            state.jobs[job_id].update(status="failed", error=str(exc))

    @app.post("/score/{submission_id}")
    def score_submission(submission_id: str):
        state.load_submission(submission_id)  # 404 on unknown id
        lock = state.job_lock(submission_id)
        if not lock.acquire(blocking=False):
            running = [
                jid
                for jid, j in state.jobs.items()
                if j["submission_id"] == submission_id and j["status"] == "running"
            ]
            return {"job_id": running[0], "status": "running"} if running else {
                "job_id": None,
                "status": "busy",
            }
        job_id = f"job-{submission_id}-{len(state.jobs)}"
        state.jobs[job_id] = {"submission_id": submission_id, "status": "running"}

        def work():
            try:
                run_scoring(submission_id, job_id)
            finally:
                lock.release()

        threading.Thread(target=work, daemon=True).start()
        return {"job_id": job_id, "status": "running"}

    @app.get("/score/jobs/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job: {job_id}")
        return job

    @app.get("/reports/{report_id}")
    def get_report(report_id: str):
        path = state.root / "reports" / f"{report_id}.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown report: {report_id}")
        return json.loads(path.read_text())

    @app.get("/leaderboard")
    def leaderboard():
        index = state.submission_index()
        reports: dict[str, ScoreReport] = {}
        for path in (state.root / "reports").glob("*.json"):
            team = index.get(path.stem, {}).get("team", path.stem)
            reports[team] = ScoreReport.from_dict(json.loads(path.read_text()))
        rows = build_leaderboard(reports)
        return [
            {
                "rank": r.rank,
                "team": r.team,
                "question_score": r.question_score,
                "evidence_score": r.evidence_score,
                "justification_score": r.justification_score,
                "averimatec_score": r.averimatec_score,
            }
            for r in rows
        ]

    def task_payload(task, rated_ids: set[str]) -> dict:
        claims = {c.id: c for c in state.claims()}
        claim = claims.get(task.claim_id)
        index = state.submission_index()
        sub_id = next(
            (sid for sid, meta in sorted(index.items()) if meta.get("team") == task.team), None
        )
        predicted = []
        if sub_id:
            sub = normalize_submission(state.load_submission(sub_id))
            rec = sub.by_claim().get(task.claim_id)
            if rec:
                predicted = [
                    {"text": e.text, "images": [img.b64 for img in e.images], "url": e.url}
                    for e in rec.evidence
                ]
        reference = []
        claim_image_b64 = {img.b64 for img in claim.images} if claim else set()
        if claim:
            for qa in claim.gold_qas:
                reference.append(
                    {
                        "text": qa.answer.text,
                        "images": [
                            {"b64": img.b64, "claim_image": img.b64 in claim_image_b64}
                            for img in qa.answer.images
                        ],
                        "url": qa.answer.url,
                    }
                )
        # blind by design: no team name, no automatic score in the payload;
        # the task id is opaque because sample ids embed the team name
        return {
            "task_id": task_token(task.sample_id),
            "claim": {
                "text": claim.text if claim else "",
                "images": [img.b64 for img in claim.images] if claim else [],
                "date": claim.claim_date.isoformat() if claim else None,
                "location": claim.location if claim else None,
                "metadata": dict(claim.metadata) if claim else {},
            },
            "predicted_evidence": predicted,
            "reference_evidence": reference,
            "rated": task.sample_id in rated_ids,
        }

    @app.get("/annotation/tasks")
    def annotation_tasks(
        annotator: Optional[str] = Query(default=None),
        x_annotator_token: Optional[str] = Header(default=None),
    ):
        name = state.resolve_annotator(x_annotator_token, annotator)
        plan = state.plan()
        if plan is None:
            return {"annotator": name, "tasks": []}
        ratings = state.rating_log().load()
        rated = {r.sample_id for r in ratings if r.annotator == name}
        tasks = [task_payload(t, rated) for t in plan.for_annotator(name)]
        return {"annotator": name, "tasks": tasks}

    @app.post("/annotation/ratings")
    def submit_rating(
        body: RatingUpload,
        annotator: Optional[str] = Query(default=None),
        x_annotator_token: Optional[str] = Header(default=None),
    ):
        name = state.resolve_annotator(x_annotator_token, annotator or body.annotator)
        plan = state.plan()
        task = None
        if plan is not None:
            task = next(
                (
                    t
                    for t in plan.tasks
                    if body.task_id in (t.sample_id, task_token(t.sample_id))
                ),
                None,
            )
        if task is None:
            raise HTTPException(status_code=404, detail=f"unknown task: {body.task_id}")
        if name not in task.annotators:
            raise HTTPException(status_code=400, detail="task not assigned to this annotator")
        rating = HumanRating(
            sample_id=task.sample_id,
            claim_id=task.claim_id,
            team=task.team,
            annotator=name,
            coverage=body.coverage,
            relevance=body.relevance,
        )
        with state._rating_lock:
            state.rating_log().append(rating)
        return {"status": "ok", "task_id": task_token(task.sample_id)}

    @app.get("/annotation/correlation")
    def annotation_correlation():
        plan = state.plan()
        if plan is None:
            raise HTTPException(status_code=404, detail="no sampling plan")
        index = state.submission_index()
        auto: dict[str, float] = {}
        for path in (state.root / "reports").glob("*.json"):
            team = index.get(path.stem, {}).get("team", path.stem)
            report = ScoreReport.from_dict(json.loads(path.read_text()))
            per_claim = {c.claim_id: c.evidence_recall for c in report.claim_scores}
            for task in plan.tasks:
                if task.team == team and task.claim_id in per_claim:
                    auto[task.sample_id] = per_claim[task.claim_id]
        ratings = state.rating_log().load()
        return correlation_report(ratings, auto).to_dict()

    if frontend_dir and Path(frontend_dir).exists():
        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
