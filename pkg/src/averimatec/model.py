"""Shared data model: claims, evidence, submissions, and format validation.

Claims and submissions travel as line-delimited JSON records carrying a
``format_version`` field. Evidence text may embed image placeholders of the
exact form ``[IMG_k]`` (k >= 1, no leading zeros); anything else is plain text.
"""

from __future__ import annotations

import base64
import datetime as dt
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

FORMAT_VERSION = 1

# Placeholder grammar is fixed and case-sensitive.
IMG_TOKEN_RE = re.compile(r"\[IMG_([1-9][0-9]*)\]")

EVIDENCE_ITEM_CAP = 10
EVIDENCE_TOKEN_CAP = 1500


class ParseError(ValueError):
    """A wire record could not be parsed."""


class ValidationError(ValueError):
    """A parsed value violates a model invariant."""


class DanglingPlaceholderError(ValidationError):
    """Evidence text references an image index beyond the attached images."""


def count_tokens(text: str) -> int:
    """Token count under the scoring tokenizer: Unicode-whitespace split."""
    return len(text.split())


def truncate_tokens(text: str, cap: int) -> str:
    """Keep the first ``cap`` whitespace tokens; under-cap text is unchanged."""
    tokens = text.split()
    if len(tokens) <= cap:
        return text
    return " ".join(tokens[:cap])


class Verdict(Enum):
    SUPPORTED = "supported"
    REFUTED = "refuted"
    NOT_ENOUGH_EVIDENCE = "not_enough_evidence"
    CONFLICTING_CHERRY_PICKING = "conflicting_cherry_picking"

    @classmethod
    def parse(cls, label: str) -> "Verdict":
        key = re.sub(r"[\s/_.-]+", " ", label.strip().lower()).strip()
        try:
            return _VERDICT_ALIASES[key]
        except KeyError:
            raise ParseError(f"unknown verdict label: {label!r}") from None

    def __str__(self) -> str:
        return self.value


_VERDICT_ALIASES = {
    "supported": Verdict.SUPPORTED,
    "support": Verdict.SUPPORTED,
    "refuted": Verdict.REFUTED,
    "refute": Verdict.REFUTED,
    "not enough evidence": Verdict.NOT_ENOUGH_EVIDENCE,
    "nee": Verdict.NOT_ENOUGH_EVIDENCE,
    "conflicting cherry picking": Verdict.CONFLICTING_CHERRY_PICKING,
    "conflicting evidence cherry picking": Verdict.CONFLICTING_CHERRY_PICKING,
    "conflicting evidence cherrypicking": Verdict.CONFLICTING_CHERRY_PICKING,
    "cherry picking": Verdict.CONFLICTING_CHERRY_PICKING,
    "cherrypicking": Verdict.CONFLICTING_CHERRY_PICKING,
    "conflicting": Verdict.CONFLICTING_CHERRY_PICKING,
    "ce c": Verdict.CONFLICTING_CHERRY_PICKING,
}


@dataclass(frozen=True)
class ClaimType:
    """Claim category; unknown labels become catch-all types, never errors."""

    label: str

    EVENT_PROPERTY = "event_property"
    MEDIA_ANALYSIS = "media_analysis"
    CAUSAL = "causal"
    NUMERICAL = "numerical"

    _ALIASES = {
        "event property": EVENT_PROPERTY,
        "event_property": EVENT_PROPERTY,
        "ep": EVENT_PROPERTY,
        "media analysis": MEDIA_ANALYSIS,
        "media_analysis": MEDIA_ANALYSIS,
        "ma": MEDIA_ANALYSIS,
        "causal": CAUSAL,
        "cs": CAUSAL,
        "numerical": NUMERICAL,
        "nm": NUMERICAL,
    }

    def __post_init__(self) -> None:
        if not self.label:
            raise ValidationError("claim type label must be non-empty")

    @classmethod
    def parse(cls, label: str) -> "ClaimType":
        if not label.strip():
            raise ValidationError("claim type label must be non-empty")
        key = label.strip().lower().replace("/", " ")
        return cls(cls._ALIASES.get(key, key.replace(" ", "_")))

    @property
    def is_known(self) -> bool:
        return self.label in (
            self.EVENT_PROPERTY,
            self.MEDIA_ANALYSIS,
            self.CAUSAL,
            self.NUMERICAL,
        )


@dataclass(frozen=True)
class Strategy:
    """Fact-checking strategy; unknown labels are kept, not rejected."""

    label: str

    REVERSE_IMAGE_SEARCH = "reverse_image_search"
    CONSULTATION = "consultation"
    WRITTEN_EVIDENCE = "written_evidence"
    IMAGE_ANALYSIS = "image_analysis"
    MEDIA_SOURCE_DISCOVERY = "media_source_discovery"

    _ALIASES = {
        "reverse image search": REVERSE_IMAGE_SEARCH,
        "reverse_image_search": REVERSE_IMAGE_SEARCH,
        "ris": REVERSE_IMAGE_SEARCH,
        "consultation": CONSULTATION,
        "ct": CONSULTATION,
        "written evidence": WRITTEN_EVIDENCE,
        "written_evidence": WRITTEN_EVIDENCE,
        "we": WRITTEN_EVIDENCE,
        "image analysis": IMAGE_ANALYSIS,
        "image_analysis": IMAGE_ANALYSIS,
        "ia": IMAGE_ANALYSIS,
        "media source discovery": MEDIA_SOURCE_DISCOVERY,
        "media_source_discovery": MEDIA_SOURCE_DISCOVERY,
        "msd": MEDIA_SOURCE_DISCOVERY,
        "sd": MEDIA_SOURCE_DISCOVERY,
    }

    def __post_init__(self) -> None:
        if not self.label:
            raise ValidationError("strategy label must be non-empty")

    @classmethod
    def parse(cls, label: str) -> "Strategy":
        if not label.strip():
            raise ValidationError("strategy label must be non-empty")
        key = label.strip().lower().replace("/", " ")
        return cls(cls._ALIASES.get(key, key.replace(" ", "_")))


@dataclass(frozen=True)
class Base64Image:
    """An image carried inline as base64 text."""

    b64: str

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Base64Image":
        return cls(base64.b64encode(raw).decode("ascii"))

    def to_bytes(self) -> bytes:
        try:
            return base64.b64decode(self.b64, validate=True)
        except Exception as exc:
            raise ValidationError(f"invalid base64 image payload: {exc}") from exc


# Claim images use the same inline representation as evidence images.
ImageRef = Base64Image


@dataclass(frozen=True)
class EvidenceItem:
    """One evidence statement: text with optional ``[IMG_k]`` placeholders,
    the referenced images in order, and the source URL."""

    text: str
    images: tuple[Base64Image, ...] = ()
    url: str = ""

    def placeholder_indices(self) -> list[int]:
        return [int(m.group(1)) for m in IMG_TOKEN_RE.finditer(self.text)]

    def validate(self) -> None:
        if not self.url:
            raise ValidationError("evidence item must carry a source URL")
        indices = self.placeholder_indices()
        for k in indices:
            if k > len(self.images):
                raise DanglingPlaceholderError(
                    f"placeholder [IMG_{k}] but only {len(self.images)} image(s) attached"
                )
        if sorted(indices) != list(range(1, len(self.images) + 1)):
            raise ValidationError(
                "every attached image must be referenced by exactly one placeholder"
            )


def render_evidence_text(ev: EvidenceItem) -> str:
    """Canonical text form of an evidence item, placeholders kept verbatim."""
    for k in ev.placeholder_indices():
        if k > len(ev.images):
            raise DanglingPlaceholderError(
                f"placeholder [IMG_{k}] but only {len(ev.images)} image(s) attached"
            )
    return ev.text


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: EvidenceItem

    def validate(self) -> None:
        if not self.question.strip():
            raise ValidationError("question must be non-empty")


@dataclass(frozen=True)
class Claim:
    id: str
    text: str
    images: tuple[ImageRef, ...]
    claim_date: dt.date
    gold_verdict: Verdict
    location: Optional[str] = None
    metadata: dict[str, str] = field(default_factory=dict)
    gold_qas: tuple[QAPair, ...] = ()
    claim_types: frozenset[ClaimType] = frozenset()
    strategies: frozenset[Strategy] = frozenset()
    justification: str = ""

    def validate(self, split: Optional[str] = None) -> None:
        if not self.id:
            raise ValidationError("claim id must be non-empty")
        if not self.images:
            raise ValidationError(f"claim {self.id}: must carry at least one image")
        if split in ("train", "dev") and not self.gold_qas:
            raise ValidationError(f"claim {self.id}: {split} claims need gold QA pairs")
        for qa in self.gold_qas:
            qa.validate()
            qa.answer.validate()


@dataclass(frozen=True)
class SubmissionRecord:
    claim_id: str
    questions: tuple[str, ...]
    evidence: tuple[EvidenceItem, ...]
    verdict: Verdict
    justification: str = ""


@dataclass(frozen=True)
class Submission:
    records: tuple[SubmissionRecord, ...]

    def __post_init__(self) -> None:
        ids = [r.claim_id for r in self.records]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate claim ids in submission: {dupes}")

    def by_claim(self) -> dict[str, SubmissionRecord]:
        return {r.claim_id: r for r in self.records}


@dataclass(frozen=True)
class ValidationIssue:
    claim_id: str
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues

    def for_claim(self, claim_id: str) -> list[ValidationIssue]:
        return [i for i in self.issues if i.claim_id == claim_id]


# ---------------------------------------------------------------------------
# wire format


def evidence_to_dict(ev: EvidenceItem) -> dict:
    return {"text": ev.text, "images": [img.b64 for img in ev.images], "url": ev.url}


def evidence_from_dict(d: dict) -> EvidenceItem:
    return EvidenceItem(
        text=d.get("text", ""),
        images=tuple(Base64Image(b) for b in d.get("images", [])),
        url=d.get("url", ""),
    )


def claim_to_dict(claim: Claim) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "id": claim.id,
        "text": claim.text,
        "images": [img.b64 for img in claim.images],
        "claim_date": claim.claim_date.isoformat(),
        "location": claim.location,
        "metadata": dict(claim.metadata),
        "gold_verdict": claim.gold_verdict.value,
        "gold_qas": [
            {"question": qa.question, "answer": evidence_to_dict(qa.answer)}
            for qa in claim.gold_qas
        ],
        "claim_types": sorted(t.label for t in claim.claim_types),
        "strategies": sorted(s.label for s in claim.strategies),
        "justification": claim.justification,
    }


def claim_from_dict(d: dict) -> Claim:
    try:
        claim_date = dt.date.fromisoformat(d["claim_date"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad claim_date: {d.get('claim_date')!r}") from exc
    return Claim(
        id=str(d["id"]),
        text=d.get("text", ""),
        images=tuple(Base64Image(b) for b in d.get("images", [])),
        claim_date=claim_date,
        location=d.get("location"),
        metadata={str(k): str(v) for k, v in d.get("metadata", {}).items()},
        gold_verdict=Verdict.parse(d["gold_verdict"]),
        gold_qas=tuple(
            QAPair(question=q["question"], answer=evidence_from_dict(q["answer"]))
            for q in d.get("gold_qas", [])
        ),
        claim_types=frozenset(ClaimType.parse(t) for t in d.get("claim_types", [])),
        strategies=frozenset(Strategy.parse(s) for s in d.get("strategies", [])),
        justification=d.get("justification", ""),
    )


def load_claims(path: str | Path, split: str = "test") -> list[Claim]:
    """Load a line-delimited claim file, validating invariants.

    Raises ParseError naming the offending line, or ValidationError on
    invariant violations (including duplicate ids).
    """
    if split not in ("train", "dev", "test"):
        raise ValueError(f"unknown split: {split!r}")
    claims: list[Claim] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: malformed record: {exc}") from exc
            try:
                claim = claim_from_dict(record)
                claim.validate(split=split)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            except (KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: missing/ill-typed field: {exc}") from exc
            if claim.id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate claim id {claim.id!r}")
            seen.add(claim.id)
            claims.append(claim)
    return claims


def save_claims(claims: Iterable[Claim], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for claim in claims:
            fh.write(json.dumps(claim_to_dict(claim), ensure_ascii=False) + "\n")


def record_to_dict(rec: SubmissionRecord) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "claim_id": rec.claim_id,
        "questions": list(rec.questions),
        "evidence": [evidence_to_dict(e) for e in rec.evidence],
        "verdict": rec.verdict.value,
        "justification": rec.justification,
    }


def record_from_dict(d: dict) -> SubmissionRecord:
    return SubmissionRecord(
        claim_id=str(d["claim_id"]),
        questions=tuple(d.get("questions", [])),
        evidence=tuple(evidence_from_dict(e) for e in d.get("evidence", [])),
        verdict=Verdict.parse(d["verdict"]),
        justification=d.get("justification", ""),
    )


def load_submission(path: str | Path) -> Submission:
    records: list[SubmissionRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: malformed record: {exc}") from exc
            except (KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: missing/ill-typed field: {exc}") from exc
    return Submission(records=tuple(records))


def save_submission(sub: Submission, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(submission_to_jsonl(sub))


def submission_to_jsonl(sub: Submission) -> str:
    return "".join(
        json.dumps(record_to_dict(r), ensure_ascii=False, sort_keys=True) + "\n"
        for r in sub.records
    )


def submission_from_jsonl(text: str) -> Submission:
    records = [record_from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
    return Submission(records=tuple(records))


def validate_submission(sub: Submission, claims: list[Claim]) -> ValidationReport:
    """Report-only format check; never mutates or truncates anything."""
    known = {c.id for c in claims}
    issues: list[ValidationIssue] = []
    for rec in sub.records:
        if rec.claim_id not in known:
            issues.append(
                ValidationIssue(rec.claim_id, "unknown_claim", "claim id not in the claim set")
            )
        if len(rec.evidence) > EVIDENCE_ITEM_CAP:
            issues.append(
                ValidationIssue(
                    rec.claim_id,
                    "evidence_count",
                    f"{len(rec.evidence)} evidence items; items beyond "
                    f"{EVIDENCE_ITEM_CAP} will be ignored",
                )
            )
        for pos, ev in enumerate(rec.evidence):
            n = count_tokens(ev.text)
            if n > EVIDENCE_TOKEN_CAP:
                issues.append(
                    ValidationIssue(
                        rec.claim_id,
                        "evidence_length",
                        f"evidence {pos}: {n} tokens; will be truncated to "
                        f"{EVIDENCE_TOKEN_CAP} tokens",
                    )
                )
            try:
                ev.validate()
            except ValidationError as exc:
                issues.append(ValidationIssue(rec.claim_id, "evidence_images", str(exc)))
    return ValidationReport(issues=tuple(issues))
