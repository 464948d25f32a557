"""Baseline verification pipeline: question generation, strategy-dispatched
answering, verdict prediction, and justification generation.

Every adapter call is recorded in a per-claim trace; replaying a trace
through ``replay_pipeline`` reproduces the submission byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from . import prompts
from .adapters import EmbeddingProvider, HashEmbeddingProvider, ModelAdapter
from .model import (
    Base64Image,
    Claim,
    EvidenceItem,
    QAPair,
    Submission,
    SubmissionRecord,
    Verdict,
)
from .retrieval import Bm25Index, topk_images
from .store import Channel, KnowledgeStore

logger = logging.getLogger(__name__)

# Evidence-URL markers for answers that cite no store document.
CLAIM_SOURCE_URL = "claim-source://{claim_id}"
NO_EVIDENCE_URL = "no-evidence://"

NO_ANSWER_TEXT = "No answer could be found."


class PipelineError(RuntimeError):
    """A claim's run failed at a stage that cannot be defaulted."""


class AnswerStrategy(Enum):
    VISUAL_QA = "visual_qa"
    IMAGE_RELATED_RAG = "image_rag"
    TEXTUAL_RAG = "text_rag"
    IMAGE_ANSWER_SELECTION = "image_answer"


@dataclass
class PipelineConfig:
    n_questions: int = 5
    few_shot: int = 3
    topk_docs: int = 30
    topk_images: int = 2
    iterative: bool = False
    workers: int = 1


@dataclass
class TraceEvent:
    step: str
    prompt_sha: str
    images_sha: str
    response: str
    retrieval_ids: list[str] = field(default_factory=list)


@dataclass
class ClaimTrace:
    claim_id: str
    events: list[TraceEvent] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "events": [
                {
                    "step": e.step,
                    "prompt_sha": e.prompt_sha,
                    "images_sha": e.images_sha,
                    "response": e.response,
                    "retrieval_ids": e.retrieval_ids,
                }
                for e in self.events
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClaimTrace":
        return cls(
            claim_id=d["claim_id"],
            events=[
                TraceEvent(
                    step=e["step"],
                    prompt_sha=e["prompt_sha"],
                    images_sha=e["images_sha"],
                    response=e["response"],
                    retrieval_ids=list(e.get("retrieval_ids", [])),
                )
                for e in d["events"]
            ],
        )


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _images_sha(images: Sequence[bytes]) -> str:
    h = hashlib.sha256()
    for img in images:
        h.update(_sha(img).encode())
    return h.hexdigest()


class _TracingAdapter:
    """Records every call of the wrapped adapter into a claim trace."""

    def __init__(self, inner: ModelAdapter, trace: ClaimTrace):
        self._inner = inner
        self._trace = trace
        self.name = getattr(inner, "name", "adapter")
        self._step = "?"

    def set_step(self, step: str) -> None:
        self._step = step

    def complete(self, prompt: str, images: Sequence[bytes] = ()) -> str:
        response = self._inner.complete(prompt, images)
        self._trace.events.append(
            TraceEvent(
                step=self._step,
                prompt_sha=_sha(prompt.encode("utf-8")),
                images_sha=_images_sha(images),
                response=response,
            )
        )
        return response


class ReplayAdapter:
    """Serves recorded responses in order, verifying each call's digests."""

    name = "replay"

    def __init__(self, trace: ClaimTrace):
        self._events = iter(trace.events)

    def set_step(self, step: str) -> None:  # interface parity with _TracingAdapter
        pass

    def complete(self, prompt: str, images: Sequence[bytes] = ()) -> str:
        while True:
            try:
                event = next(self._events)
            except StopIteration:
                raise PipelineError("trace exhausted: more adapter calls than recorded") from None
            # retrieval bookkeeping events carry no prompt digest; skip them
            if event.prompt_sha:
                break
        if event.prompt_sha != _sha(prompt.encode("utf-8")):
            raise PipelineError(f"trace mismatch at step {event.step}: prompt digest differs")
        if event.images_sha != _images_sha(images):
            raise PipelineError(f"trace mismatch at step {event.step}: image digest differs")
        return event.response


# ---------------------------------------------------------------------------
# stages


def few_shot_examples(claim: Claim, train: Sequence[Claim], n: int) -> list[Claim]:
    """The n training claims most similar to ``claim`` by BM25 over claim text,
    ties broken by ascending claim id."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not train or n == 0:
        return []
    index = Bm25Index.build({c.id: c.text for c in train})
    ranked = index.topk(claim.text, min(n, len(train)))
    by_id = {c.id: c for c in train}
    return [by_id[cid] for cid in ranked]


def _parse_questions(text: str) -> list[str]:
    questions = []
    for line in text.splitlines():
        line = re.sub(r"^\s*(?:\d+[.)]|[-*•])\s*", "", line).strip()
        if line:
            questions.append(line)
    return questions


def _questions_fallback(text: str) -> list[str]:
    # prose output: split on question marks
    parts = [p.strip() for p in re.split(r"(?<=\?)", " ".join(text.split()))]
    return [p for p in parts if p.endswith("?")]


def generate_questions(
    claim: Claim, examples: Sequence[Claim], adapter: ModelAdapter, n: int = 5
) -> list[str]:
    """Exactly n evidence-seeking questions when the adapter cooperates.

    Short output triggers one re-prompt; a still-short list is accepted with
    a warning. Adapter failure raises and halts this claim's run.
    """
    example_block = ""
    if examples:
        lines = []
        for ex in examples:
            lines.append(f"Example claim: {ex.text}")
            for qa in ex.gold_qas:
                lines.append(f"Example question: {qa.question}")
        example_block = "\n".join(lines) + "\n"
    prompt = prompts.QUESTION_GENERATION.format(
        examples=example_block, claim=claim.text, claim_date=claim.claim_date.isoformat()
    )
    try:
        raw = adapter.complete(prompt, [img.to_bytes() for img in claim.images])
    except Exception as exc:
        raise PipelineError(f"question generation failed for claim {claim.id}: {exc}") from exc
    questions = _parse_questions(raw)
    if len(questions) < n:
        fallback = _questions_fallback(raw)
        if len(fallback) > len(questions):
            questions = fallback
    if len(questions) < n:
        try:
            raw2 = adapter.complete(prompt, [img.to_bytes() for img in claim.images])
        except Exception as exc:
            raise PipelineError(f"question generation failed for claim {claim.id}: {exc}") from exc
        more = _parse_questions(raw2) or _questions_fallback(raw2)
        if len(more) > len(questions):
            questions = more
    if len(questions) < n:
        logger.warning("claim %s: only %d questions generated", claim.id, len(questions))
    return questions[:n]


_STRATEGY_LABELS = {
    "visual_qa": AnswerStrategy.VISUAL_QA,
    "image_rag": AnswerStrategy.IMAGE_RELATED_RAG,
    "text_rag": AnswerStrategy.TEXTUAL_RAG,
    "image_answer": AnswerStrategy.IMAGE_ANSWER_SELECTION,
}


def classify_question(question: str, claim: Claim, adapter: ModelAdapter) -> AnswerStrategy:
    prompt = prompts.QUESTION_CLASSIFICATION.format(claim=claim.text, question=question)
    try:
        raw = adapter.complete(prompt).strip().lower()
    except Exception as exc:
        logger.warning("question classification failed (%s); defaulting to text_rag", exc)
        return AnswerStrategy.TEXTUAL_RAG
    for label, strategy in _STRATEGY_LABELS.items():
        if label in raw:
            return strategy
    logger.warning("unparseable strategy %r; defaulting to text_rag", raw)
    return AnswerStrategy.TEXTUAL_RAG


def _claim_index(store: KnowledgeStore, claim_id: str, channel: Channel) -> tuple[Bm25Index, dict]:
    entries = [e for e in store.for_claim(claim_id) if e.channel == channel and e.text.strip()]
    docs = {}
    by_id = {}
    for i, e in enumerate(entries):
        doc_id = f"{i:06d}"
        docs[doc_id] = e.text
        by_id[doc_id] = e
    return Bm25Index.build(docs), by_id


_SOURCE_RE = re.compile(r"SOURCE:\s*(\d+)", re.IGNORECASE)


def answer_question(
    question: str,
    strategy: AnswerStrategy,
    claim: Claim,
    store: KnowledgeStore,
    adapter: ModelAdapter,
    embeddings: Optional[EmbeddingProvider] = None,
    config: Optional[PipelineConfig] = None,
    trace: Optional[ClaimTrace] = None,
) -> QAPair:
    config = config or PipelineConfig()
    embeddings = embeddings or HashEmbeddingProvider()

    if strategy == AnswerStrategy.VISUAL_QA:
        prompt = prompts.VISUAL_QA.format(question=question)
        answer = adapter.complete(prompt, [img.to_bytes() for img in claim.images])
        return QAPair(
            question=question,
            answer=EvidenceItem(
                text=answer.strip(), url=CLAIM_SOURCE_URL.format(claim_id=claim.id)
            ),
        )

    if strategy == AnswerStrategy.IMAGE_ANSWER_SELECTION:
        candidates = [
            (e.media_digest, store.images[e.media_digest])
            for e in store.for_claim(claim.id)
            if e.channel == Channel.GOOGLE_SEARCH_IMAGE and e.media_digest in store.images
        ]
        ranked = topk_images(candidates, question, embeddings, config.topk_images)
        if trace is not None:
            trace.events.append(
                TraceEvent("image_retrieval", "", "", "", retrieval_ids=list(ranked))
            )
        if not ranked:
            return QAPair(
                question=question,
                answer=EvidenceItem(text=NO_ANSWER_TEXT, url=NO_EVIDENCE_URL),
            )
        images = [store.images[d] for d in ranked]
        prompt = prompts.IMAGE_SELECTION.format(question=question)
        raw = adapter.complete(prompt, images)
        match = re.search(r"[12]", raw)
        pick = int(match.group(0)) - 1 if match else 0
        pick = min(pick, len(ranked) - 1)
        chosen_digest = ranked[pick]
        chosen_entry = next(
            e for e in store.for_claim(claim.id) if e.media_digest == chosen_digest
        )
        return QAPair(
            question=question,
            answer=EvidenceItem(
                text="[IMG_1]",
                images=(Base64Image.from_bytes(store.images[chosen_digest]),),
                url=chosen_entry.url,
            ),
        )

    channel = (
        Channel.REVERSE_IMAGE_SEARCH
        if strategy == AnswerStrategy.IMAGE_RELATED_RAG
        else Channel.GOOGLE_SEARCH_TEXT
    )
    index, by_id = _claim_index(store, claim.id, channel)
    ranked = index.topk(question, config.topk_docs)
    if trace is not None:
        trace.events.append(TraceEvent("text_retrieval", "", "", "", retrieval_ids=list(ranked)))
    if not ranked:
        return QAPair(
            question=question, answer=EvidenceItem(text=NO_ANSWER_TEXT, url=NO_EVIDENCE_URL)
        )
    passages = "\n".join(
        f"[{i + 1}] {by_id[doc_id].text}" for i, doc_id in enumerate(ranked)
    )
    prompt = prompts.RAG_ANSWER.format(question=question, passages=passages)
    raw = adapter.complete(prompt)
    match = _SOURCE_RE.search(raw)
    cited = 0
    if match:
        idx = int(match.group(1)) - 1
        if 0 <= idx < len(ranked):
            cited = idx
    answer_text = _SOURCE_RE.sub("", raw).strip()
    return QAPair(
        question=question,
        answer=EvidenceItem(text=answer_text, url=by_id[ranked[cited]].url),
    )


_QA_BLOCK = "Q: {question}\nA: {answer}"


def _qa_lines(qas: Sequence[QAPair]) -> str:
    return "\n".join(
        _QA_BLOCK.format(question=qa.question, answer=qa.answer.text) for qa in qas
    )


def predict_verdict(claim: Claim, qas: Sequence[QAPair], adapter: ModelAdapter) -> Verdict:
    """One verdict from the joint QA evidence; after one failed re-prompt the
    conservative default is not-enough-evidence."""
    prompt = prompts.VERDICT.format(claim=claim.text, qas=_qa_lines(qas))
    for _ in range(2):
        try:
            raw = adapter.complete(prompt, [img.to_bytes() for img in claim.images])
            return Verdict.parse(raw.strip())
        except Exception:
            continue
    logger.warning("claim %s: unparseable verdict; defaulting to not_enough_evidence", claim.id)
    return Verdict.NOT_ENOUGH_EVIDENCE


def generate_justification(
    claim: Claim, qas: Sequence[QAPair], verdict: Verdict, adapter: ModelAdapter
) -> str:
    prompt = prompts.JUSTIFICATION.format(
        claim=claim.text, verdict=verdict.value, qas=_qa_lines(qas)
    )
    try:
        return adapter.complete(prompt, [img.to_bytes() for img in claim.images]).strip()
    except Exception as exc:
        logger.warning("claim %s: justification generation failed: %s", claim.id, exc)
        return ""


# ---------------------------------------------------------------------------
# orchestration


@dataclass
class PipelineRun:
    claim_id: str
    questions: list[str]
    qas: list[QAPair]
    verdict: Verdict
    justification: str
    trace: ClaimTrace


@dataclass
class RunFailure:
    claim_id: str
    stage: str
    reason: str


def _dedup_evidence(qas: Sequence[QAPair]) -> tuple[EvidenceItem, ...]:
    seen: set[tuple[str, str]] = set()
    out = []
    for qa in qas:
        key = (qa.answer.text, qa.answer.url)
        if key in seen:
            continue
        seen.add(key)
        out.append(qa.answer)
    return tuple(out)


def run_claim(
    claim: Claim,
    store: KnowledgeStore,
    adapter: ModelAdapter,
    train: Sequence[Claim] = (),
    embeddings: Optional[EmbeddingProvider] = None,
    config: Optional[PipelineConfig] = None,
) -> PipelineRun:
    config = config or PipelineConfig()
    trace = ClaimTrace(claim_id=claim.id)
    traced = adapter if isinstance(adapter, ReplayAdapter) else _TracingAdapter(adapter, trace)

    examples = few_shot_examples(claim, train, config.few_shot)

    traced.set_step("question_generation")
    if config.iterative:
        questions: list[str] = []
        qas: list[QAPair] = []
        for _ in range(config.n_questions):
            traced.set_step("question_generation")
            history = _qa_lines(qas)
            remaining = generate_questions(claim, examples, _Prefixed(traced, history), n=1)
            if not remaining:
                break
            question = remaining[0]
            questions.append(question)
            traced.set_step("question_classification")
            strategy = classify_question(question, claim, traced)
            traced.set_step("answering")
            qas.append(
                answer_question(
                    question, strategy, claim, store, traced, embeddings, config, trace
                )
            )
    else:
        questions = generate_questions(claim, examples, traced, n=config.n_questions)
        qas = []
        for question in questions:
            traced.set_step("question_classification")
            strategy = classify_question(question, claim, traced)
            traced.set_step("answering")
            qas.append(
                answer_question(
                    question, strategy, claim, store, traced, embeddings, config, trace
                )
            )

    traced.set_step("verdict")
    verdict = predict_verdict(claim, qas, traced)
    traced.set_step("justification")
    justification = generate_justification(claim, qas, verdict, traced)
    return PipelineRun(
        claim_id=claim.id,
        questions=questions,
        qas=qas,
        verdict=verdict,
        justification=justification,
        trace=trace,
    )


class _Prefixed:
    """Prepends QA history to prompts in iterative mode."""

    def __init__(self, inner, history: str):
        self._inner = inner
        self._history = history
        self.name = getattr(inner, "name", "adapter")

    def set_step(self, step: str) -> None:
        self._inner.set_step(step)

    def complete(self, prompt: str, images: Sequence[bytes] = ()) -> str:
        if self._history:
            prompt = f"Previously answered:\n{self._history}\n\n{prompt}"
        return self._inner.complete(prompt, images)


def run_pipeline(
    claims: Sequence[Claim],
    store: KnowledgeStore,
    adapter: ModelAdapter,
    train: Sequence[Claim] = (),
    embeddings: Optional[EmbeddingProvider] = None,
    config: Optional[PipelineConfig] = None,
    trace_dir: Optional[str | Path] = None,
) -> tuple[Submission, list[ClaimTrace], list[RunFailure]]:
    """One submission record per claim; per-claim failures are isolated."""
    config = config or PipelineConfig()
    records: list[SubmissionRecord] = []
    traces: list[ClaimTrace] = []
    failures: list[RunFailure] = []

    def run_one(claim: Claim):
        return run_claim(claim, store, adapter, train, embeddings, config)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {claim.id: pool.submit(run_one, claim) for claim in claims}
            results = {cid: f for cid, f in futures.items()}
    else:
        results = None

    for claim in claims:
        try:
            run = results[claim.id].result() if results else run_one(claim)
        except Exception as exc:
            logger.warning("claim %s failed: %s", claim.id, exc)
            failures.append(RunFailure(claim.id, "pipeline", str(exc)))
            continue
        records.append(
            SubmissionRecord(
                claim_id=claim.id,
                questions=tuple(run.questions),
                evidence=_dedup_evidence(run.qas),
                verdict=run.verdict,
                justification=run.justification,
            )
        )
        traces.append(run.trace)

    if trace_dir is not None:
        trace_dir = Path(trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)
        for trace in traces:
            (trace_dir / f"{trace.claim_id}.json").write_text(
                json.dumps(trace.to_dict(), ensure_ascii=False, indent=2)
            )

    return Submission(records=tuple(records)), traces, failures


def replay_pipeline(
    claims: Sequence[Claim],
    store: KnowledgeStore,
    traces: Sequence[ClaimTrace],
    train: Sequence[Claim] = (),
    embeddings: Optional[EmbeddingProvider] = None,
    config: Optional[PipelineConfig] = None,
) -> Submission:
    """Re-run claims against recorded traces; output must match the original."""
    by_claim = {t.claim_id: t for t in traces}
    records = []
    for claim in claims:
        trace = by_claim.get(claim.id)
        if trace is None:
            continue
        run = run_claim(claim, store, ReplayAdapter(trace), train, embeddings, config)
        records.append(
            SubmissionRecord(
                claim_id=claim.id,
                questions=tuple(run.questions),
                evidence=_dedup_evidence(run.qas),
                verdict=run.verdict,
                justification=run.justification,
            )
        )
    return Submission(records=tuple(records))


def load_traces(trace_dir: str | Path) -> list[ClaimTrace]:
    out = []
    for path in sorted(Path(trace_dir).glob("*.json")):
        out.append(ClaimTrace.from_dict(json.loads(path.read_text())))
    return out
