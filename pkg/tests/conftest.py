import datetime as dt

import pytest

from averimatec.model import (
    Base64Image,
    Claim,
    ClaimType,
    EvidenceItem,
    QAPair,
    Strategy,
    Submission,
    SubmissionRecord,
    Verdict,
)

PNG_A = b"\x89PNG-fake-image-A"
PNG_B = b"\x89PNG-fake-image-B"


def make_evidence(text="some evidence", url="https://example.org/a", images=()):
    return EvidenceItem(text=text, images=tuple(images), url=url)


def make_claim(
    claim_id="c1",
    text="A photo shows a flooded street in Valencia",
    date=dt.date(2023, 4, 1),
    verdict=Verdict.REFUTED,
    qas=None,
    types=("event_property",),
    strategies=("reverse_image_search",),
    images=None,
    justification="The image predates the flood.",
):
    if qas is None:
        qas = [
            QAPair(
                question="When was the photo first published?",
                answer=make_evidence("The photo was first published in 2019."),
            )
        ]
    return Claim(
        id=claim_id,
        text=text,
        images=tuple(images or [Base64Image.from_bytes(PNG_A)]),
        claim_date=date,
        gold_verdict=verdict,
        gold_qas=tuple(qas),
        claim_types=frozenset(ClaimType.parse(t) for t in types),
        strategies=frozenset(Strategy.parse(s) for s in strategies),
        justification=justification,
    )


def make_submission_record(claim_id="c1", questions=None, evidence=None,
                           verdict=Verdict.REFUTED, justification="because"):
    return SubmissionRecord(
        claim_id=claim_id,
        questions=tuple(questions or ["When was the photo first published?"]),
        evidence=tuple(evidence or [make_evidence()]),
        verdict=verdict,
        justification=justification,
    )


@pytest.fixture
def claim():
    return make_claim()


@pytest.fixture
def submission():
    return Submission(records=(make_submission_record(),))
