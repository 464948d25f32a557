"""Start the scoring service with a small pre-seeded data root.

Usage: python3 serve_fixture.py DATA_DIR PORT

Seeds one claim, one scored submission from team "alpha", and a sampling
plan assigning sample "alpha:c1" to annotators "beta" and "gamma", then
serves the app on 127.0.0.1:PORT. Used by the frontend integration test.
"""

import datetime as dt
import json
import sys
import time
from pathlib import Path

import uvicorn
from fastapi.testclient import TestClient

from averimatec.analysis import SamplingPlan, SampleTask
from averimatec.model import (
    Base64Image,
    Claim,
    ClaimType,
    EvidenceItem,
    QAPair,
    Strategy,
    SubmissionRecord,
    Verdict,
    record_to_dict,
    save_claims,
)
from averimatec.service import create_app


def main() -> None:
    root = Path(sys.argv[1])
    port = int(sys.argv[2])
    root.mkdir(parents=True, exist_ok=True)

    claim = Claim(
        id="c1",
        text="A photo shows a flooded street in Valencia",
        images=(Base64Image.from_bytes(b"\x89PNG-fake-image-A"),),
        claim_date=dt.date(2023, 4, 1),
        gold_verdict=Verdict.REFUTED,
        gold_qas=(
            QAPair(
                question="When was the photo first published?",
                answer=EvidenceItem(
                    text="The photo was first published in 2019.",
                    images=(),
                    url="https://example.org/gold",
                ),
            ),
        ),
        claim_types=frozenset({ClaimType.parse("event_property")}),
        strategies=frozenset({Strategy.parse("reverse_image_search")}),
        justification="The image predates the flood.",
    )
    save_claims([claim], root / "claims.jsonl")

    app = create_app(root)

    record = SubmissionRecord(
        claim_id="c1",
        questions=("When was the photo first published?",),
        evidence=(
            EvidenceItem(
                text="The photo was first published in 2019.",
                images=(),
                url="https://example.org/a",
            ),
        ),
        verdict=Verdict.REFUTED,
        justification="The image predates the flood.",
    )
    with TestClient(app) as client:
        sub = client.post(
            "/submissions",
            json={"team": "alpha", "records": [record_to_dict(record)]},
        ).json()
        job = client.post(f"/score/{sub['submission_id']}").json()
        while client.get(f"/score/jobs/{job['job_id']}").json()["status"] == "running":
            time.sleep(0.02)

    plan = SamplingPlan(
        tasks=[
            SampleTask(
                sample_id="alpha:c1",
                team="alpha",
                claim_id="c1",
                annotators=("beta", "gamma"),
                stratum=0,
            )
        ]
    )
    (root / "plan.json").write_text(json.dumps(plan.to_dict()))

    print("READY", flush=True)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
