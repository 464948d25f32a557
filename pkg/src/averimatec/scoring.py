"""Conditional evaluation protocol: submission normalization, judge-based
question/evidence/justification scores, the visual similarity gate, and the
threshold-gated verdict score.

A claim's headline score is 1 exactly when its predicted verdict matches the
gold verdict AND its evidence recall reaches the threshold (default 0.3);
otherwise 0. The aggregate is the arithmetic mean over claims.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .adapters import TextJudge, VisualJudge
from .model import (
    Base64Image,
    Claim,
    EvidenceItem,
    EVIDENCE_ITEM_CAP,
    EVIDENCE_TOKEN_CAP,
    Submission,
    SubmissionRecord,
    count_tokens,
    render_evidence_text,
)

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.3
VISUAL_GATE_MIN = 8  # pairs scoring below this are insufficiently similar
CUTOFF_DATE_ISO = "2025-01-01"


class ScoringError(RuntimeError):
    """The judge failed; the affected claim is left unscored."""


# ---------------------------------------------------------------------------
# normalization

_IMG_RE = re.compile(r"\[IMG_([1-9][0-9]*)\]")


def _normalize_item(ev: EvidenceItem, token_cap: int) -> EvidenceItem:
    if count_tokens(ev.text) <= token_cap:
        return ev
    text = " ".join(ev.text.split()[:token_cap])
    # images whose placeholder got cut are dropped; survivors renumbered in
    # order of appearance so the placeholder invariant still holds
    kept: list[int] = []
    for m in _IMG_RE.finditer(text):
        k = int(m.group(1))
        if k <= len(ev.images) and k not in kept:
            kept.append(k)
    remap = {k: i + 1 for i, k in enumerate(kept)}

    def renumber(m: re.Match) -> str:
        k = int(m.group(1))
        return f"[IMG_{remap[k]}]" if k in remap else m.group(0)

    return EvidenceItem(
        text=_IMG_RE.sub(renumber, text),
        images=tuple(ev.images[k - 1] for k in kept),
        url=ev.url,
    )


def normalize_submission(
    sub: Submission,
    item_cap: int = EVIDENCE_ITEM_CAP,
    token_cap: int = EVIDENCE_TOKEN_CAP,
) -> Submission:
    """Keep the first ``item_cap`` evidence items per claim and truncate each
    item to ``token_cap`` whitespace tokens. Idempotent."""
    records = []
    for rec in sub.records:
        evidence = tuple(_normalize_item(ev, token_cap) for ev in rec.evidence[:item_cap])
        records.append(
            SubmissionRecord(
                claim_id=rec.claim_id,
                questions=rec.questions,
                evidence=evidence,
                verdict=rec.verdict,
                justification=rec.justification,
            )
        )
    return Submission(records=tuple(records))


# ---------------------------------------------------------------------------
# judge-based scores


def visual_match(
    img_gt: Base64Image, img_pred: Base64Image, judge: VisualJudge
) -> tuple[int, bool]:
    """0-10 similarity and whether it passes the gate (score >= 8)."""
    try:
        raw_gt = img_gt.to_bytes()
        raw_pred = img_pred.to_bytes()
    except Exception:
        return 0, False
    score = int(judge.similarity(raw_gt, raw_pred))
    return score, score >= VISUAL_GATE_MIN


def _visual_gate_passes(
    gt: EvidenceItem, pred: EvidenceItem, judge: VisualJudge
) -> bool:
    if not gt.images:
        return True
    if not pred.images:
        return False
    best = 0
    for g in gt.images:
        for p in pred.images:
            score, _ = visual_match(g, p, judge)
            best = max(best, score)
    return best >= VISUAL_GATE_MIN


def evidence_recall(
    gt: Sequence[EvidenceItem],
    pred: Sequence[EvidenceItem],
    judge: TextJudge,
    visual_judge: VisualJudge,
) -> float:
    """Fraction of ground-truth items covered by the prediction.

    Textual coverage comes from the judge; a covered item that carries images
    must additionally pass the visual gate against the matched predicted
    item's images. No ground truth means vacuous recall 1.0.
    """
    if not gt:
        return 1.0
    refs = [render_evidence_text(g) for g in gt]
    preds = [render_evidence_text(p) for p in pred]
    try:
        decisions = judge.coverage(refs, preds)
    except Exception as exc:
        raise ScoringError(f"coverage judge failed: {exc}") from exc
    valid = 0
    for g, decision in zip(gt, decisions):
        if not decision.covered:
            continue
        if g.images:
            if decision.matched_index is None:
                continue
            matched = pred[decision.matched_index]
            if not _visual_gate_passes(g, matched, visual_judge):
                continue
        valid += 1
    return valid / len(gt)


def question_score(
    gt_questions: Sequence[str], pred_questions: Sequence[str], judge: TextJudge
) -> float:
    """Mean coverage of gold questions by the predicted questions."""
    if not gt_questions:
        return 1.0
    if not pred_questions:
        return 0.0
    try:
        decisions = judge.coverage(list(gt_questions), list(pred_questions))
    except Exception as exc:
        raise ScoringError(f"coverage judge failed: {exc}") from exc
    return sum(1 for d in decisions if d.covered) / len(gt_questions)


def justification_score(gt: str, pred: str, judge: TextJudge) -> float:
    if not gt.strip():
        return 1.0
    if not pred.strip():
        return 0.0
    try:
        decisions = judge.coverage([gt], [pred])
    except Exception as exc:
        raise ScoringError(f"coverage judge failed: {exc}") from exc
    return 1.0 if decisions[0].covered else 0.0


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class ClaimScore:
    claim_id: str
    question_score: float
    evidence_recall: float
    justification_score: float
    verdict_correct: bool
    averimatec: int  # 1 iff verdict_correct and evidence_recall >= tau
    evidence_count: int

    def __post_init__(self) -> None:
        if self.averimatec == 1 and not self.verdict_correct:
            raise ValueError("gated score 1 requires a correct verdict")


@dataclass
class ScoreReport:
    tau: float
    claim_scores: list[ClaimScore]
    unscored: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    vacuous_recall_claims: list[str] = field(default_factory=list)

    def _mean(self, values: Sequence[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    @property
    def question(self) -> float:
        return self._mean([c.question_score for c in self.claim_scores])

    @property
    def evidence(self) -> float:
        return self._mean([c.evidence_recall for c in self.claim_scores])

    @property
    def justification(self) -> float:
        return self._mean([c.justification_score for c in self.claim_scores])

    @property
    def averimatec(self) -> float:
        return self._mean([float(c.averimatec) for c in self.claim_scores])

    @property
    def avg_evidence_count(self) -> float:
        return self._mean([float(c.evidence_count) for c in self.claim_scores])

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "aggregates": {
                "question": self.question,
                "evidence": self.evidence,
                "justification": self.justification,
                "averimatec": self.averimatec,
                "avg_evidence_count": self.avg_evidence_count,
            },
            "claims": [
                {
                    "claim_id": c.claim_id,
                    "question_score": c.question_score,
                    "evidence_recall": c.evidence_recall,
                    "justification_score": c.justification_score,
                    "verdict_correct": c.verdict_correct,
                    "averimatec": c.averimatec,
                    "evidence_count": c.evidence_count,
                }
                for c in self.claim_scores
            ],
            "unscored": self.unscored,
            "warnings": self.warnings,
            "vacuous_recall_claims": self.vacuous_recall_claims,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreReport":
        return cls(
            tau=d["tau"],
            claim_scores=[
                ClaimScore(
                    claim_id=c["claim_id"],
                    question_score=c["question_score"],
                    evidence_recall=c["evidence_recall"],
                    justification_score=c["justification_score"],
                    verdict_correct=c["verdict_correct"],
                    averimatec=c["averimatec"],
                    evidence_count=c["evidence_count"],
                )
                for c in d["claims"]
            ],
            unscored=list(d.get("unscored", [])),
            warnings=list(d.get("warnings", [])),
            vacuous_recall_claims=list(d.get("vacuous_recall_claims", [])),
        )


def gate(verdict_correct: bool, recall: float, tau: float = DEFAULT_TAU) -> int:
    """The conditional per-claim score: correct verdict AND recall >= tau."""
    return 1 if verdict_correct and recall >= tau else 0


def averimatec_score(
    claims: Sequence[Claim],
    sub: Submission,
    judge: TextJudge,
    visual_judge: VisualJudge,
    tau: float = DEFAULT_TAU,
) -> ScoreReport:
    """Score a (normalized) submission against the gold claims.

    Missing claim records score 0 on every metric with a warning; judge
    failures leave the claim in ``unscored``. Claims are reported in id order.
    """
    sub = normalize_submission(sub)
    by_claim = sub.by_claim()
    report = ScoreReport(tau=tau, claim_scores=[])
    for claim in sorted(claims, key=lambda c: c.id):
        rec = by_claim.get(claim.id)
        if rec is None:
            report.warnings.append(f"claim {claim.id}: no submission record; scored 0")
            report.claim_scores.append(
                ClaimScore(claim.id, 0.0, 0.0, 0.0, False, 0, 0)
            )
            continue
        gt_evidence = [qa.answer for qa in claim.gold_qas]
        if not gt_evidence:
            report.vacuous_recall_claims.append(claim.id)
        try:
            recall = evidence_recall(gt_evidence, list(rec.evidence), judge, visual_judge)
            q_score = question_score(
                [qa.question for qa in claim.gold_qas], list(rec.questions), judge
            )
            j_score = justification_score(claim.justification, rec.justification, judge)
        except ScoringError as exc:
            logger.warning("claim %s unscored: %s", claim.id, exc)
            report.unscored.append(claim.id)
            continue
        correct = rec.verdict == claim.gold_verdict
        report.claim_scores.append(
            ClaimScore(
                claim_id=claim.id,
                question_score=q_score,
                evidence_recall=recall,
                justification_score=j_score,
                verdict_correct=correct,
                averimatec=gate(correct, recall, tau),
                evidence_count=len(rec.evidence),
            )
        )
    return report


# ---------------------------------------------------------------------------
# breakdowns


@dataclass
class BreakdownCell:
    mean: Optional[float]  # None when the subset is empty
    count: int

    def render(self) -> str:
        return "—" if self.mean is None else f"{self.mean:.2f}"


@dataclass
class Breakdown:
    by_claim_type: dict[str, BreakdownCell]
    by_verdict: dict[str, BreakdownCell]
    before_cutoff: BreakdownCell
    after_cutoff: BreakdownCell
    avg_evidence_count: float


def breakdown(report: ScoreReport, claims: Sequence[Claim]) -> Breakdown:
    """Mean gated score by claim type (multi-label: a claim counts in every
    type it carries), by gold verdict, and by the 2025-01-01 date cutoff."""
    import datetime as dt

    cutoff = dt.date.fromisoformat(CUTOFF_DATE_ISO)
    by_id = {c.id: c for c in claims}
    scores = [(s, by_id[s.claim_id]) for s in report.claim_scores if s.claim_id in by_id]

    def cell(values: list[int]) -> BreakdownCell:
        if not values:
            return BreakdownCell(mean=None, count=0)
        return BreakdownCell(mean=sum(values) / len(values), count=len(values))

    type_groups: dict[str, list[int]] = {}
    verdict_groups: dict[str, list[int]] = {}
    before: list[int] = []
    after: list[int] = []
    for score, claim in scores:
        for ct in claim.claim_types:
            type_groups.setdefault(ct.label, []).append(score.averimatec)
        verdict_groups.setdefault(claim.gold_verdict.value, []).append(score.averimatec)
        (before if claim.claim_date < cutoff else after).append(score.averimatec)

    return Breakdown(
        by_claim_type={k: cell(v) for k, v in sorted(type_groups.items())},
        by_verdict={k: cell(v) for k, v in sorted(verdict_groups.items())},
        before_cutoff=cell(before),
        after_cutoff=cell(after),
        avg_evidence_count=report.avg_evidence_count,
    )
