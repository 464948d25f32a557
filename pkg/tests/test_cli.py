import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from averimatec.analysis import HumanRating, RatingLog
from averimatec.cli import cli
from averimatec.model import (
    Submission,
    save_claims,
    save_submission,
)
from averimatec.scoring import ClaimScore, ScoreReport

from conftest import make_claim, make_evidence, make_submission_record


@pytest.fixture
def runner():
    return CliRunner()


def write_claims(path, claims=None):
    save_claims(claims or [make_claim()], path)
    return path


class TestTopLevel:
    def test_no_args_shows_usage_error(self, runner):
        result = runner.invoke(cli, [])
        assert result.exit_code == 2
        assert "Usage:" in result.output

    def test_help(self, runner):
        result = runner.invoke(cli, ["--help"])
        assert result.exit_code == 0
        for group in ("store", "pipeline", "score", "leaderboard", "annotate", "serve"):
            assert group in result.output


class TestStoreCommands:
    def test_build_stats_roundtrip(self, runner, tmp_path):
        claims = write_claims(tmp_path / "claims.jsonl")
        fixture = tmp_path / "fixture.json"
        fixture.write_text("{}")  # offline build: every search is empty
        out = tmp_path / "store"
        result = runner.invoke(cli, [
            "store", "build", "--claims", str(claims), "--split", "train",
            "--fixture", str(fixture), "--out", str(out), "--seed", "3",
        ])
        assert result.exit_code == 0, result.output
        assert "store written" in result.output
        # the gold URL is always present, even with no search results
        stats = runner.invoke(cli, ["store", "stats", "--store", str(out)])
        assert stats.exit_code == 0
        parsed = json.loads(stats.output)
        assert parsed["url_count_total"] >= 1

    def test_ingest(self, runner, tmp_path):
        claims = write_claims(tmp_path / "claims.jsonl")
        fixture = tmp_path / "fixture.json"
        fixture.write_text("{}")
        src = tmp_path / "src"
        runner.invoke(cli, ["store", "build", "--claims", str(claims), "--split", "train",
                            "--fixture", str(fixture), "--out", str(src)])
        result = runner.invoke(cli, ["store", "ingest", "--src", str(src),
                                     "--out", str(tmp_path / "dst")])
        assert result.exit_code == 0
        assert "ingested" in result.output


class TestPipelineCommand:
    def test_run_writes_submission(self, runner, tmp_path):
        claims = write_claims(tmp_path / "claims.jsonl")
        fixture = tmp_path / "fixture.json"
        fixture.write_text("{}")
        store = tmp_path / "store"
        runner.invoke(cli, ["store", "build", "--claims", str(claims), "--split", "train",
                            "--fixture", str(fixture), "--out", str(store)])
        out = tmp_path / "submission.jsonl"
        result = runner.invoke(cli, [
            "pipeline", "run", "--claims", str(claims), "--split", "train",
            "--store", str(store), "--out", str(out),
            "--trace-dir", str(tmp_path / "traces"),
        ])
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert (tmp_path / "traces" / "c1.json").exists()


class TestScoreCommand:
    def test_golden_aggregate_line(self, runner, tmp_path):
        claims = write_claims(tmp_path / "claims.jsonl")
        rec = make_submission_record(evidence=[
            make_evidence("Matching: The photo was first published in 2019.")
        ])
        sub_path = tmp_path / "sub.jsonl"
        save_submission(Submission(records=(rec,)), sub_path)
        out = tmp_path / "report.json"
        result = runner.invoke(cli, [
            "score", "run", "--claims", str(claims), "--split", "train",
            "--submission", str(sub_path), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert "question 1.0000  evidence 1.0000  justification 0.0000  gated 1.0000" \
            in result.output
        assert "by claim type:" in result.output
        report = json.loads(out.read_text())
        assert report["aggregates"]["averimatec"] == 1.0

    def test_validation_warnings_on_stderr(self, runner, tmp_path):
        claims = write_claims(tmp_path / "claims.jsonl")
        rec = make_submission_record(evidence=[make_evidence(f"e{i}") for i in range(12)])
        sub_path = tmp_path / "sub.jsonl"
        save_submission(Submission(records=(rec,)), sub_path)
        result = runner.invoke(cli, [
            "score", "run", "--claims", str(claims), "--split", "train",
            "--submission", str(sub_path),
        ])
        assert result.exit_code == 0
        assert "warning" in result.output


class TestLeaderboardCommand:
    def write_report(self, path, gated, evidence, n=10):
        count = round(gated * n)
        scores = [ClaimScore(
            claim_id=f"c{i}", question_score=0.5, evidence_recall=evidence,
            justification_score=0.5, verdict_correct=i < count,
            averimatec=1 if i < count else 0, evidence_count=2,
        ) for i in range(n)]
        path.write_text(json.dumps(ScoreReport(tau=0.3, claim_scores=scores).to_dict()))

    def test_seven_team_ordering(self, runner, tmp_path):
        reports = tmp_path / "reports"
        reports.mkdir()
        gated = {"t-first": 0.9, "t-second": 0.6, "t-third": 0.5, "t-fourth": 0.4,
                 "t-fifth": 0.3, "t-sixth": 0.2, "t-seventh": 0.1}
        for team, g in gated.items():
            self.write_report(reports / f"{team}.json", g, 0.5)
        result = runner.invoke(cli, ["leaderboard", "--reports", str(reports)])
        assert result.exit_code == 0
        lines = [l for l in result.output.splitlines() if l and l[0].isdigit()]
        got = [l.split()[1] for l in lines]
        assert got == sorted(gated, key=lambda t: -gated[t])

    def test_empty_dir_fails(self, runner, tmp_path):
        empty = tmp_path / "reports"
        empty.mkdir()
        result = runner.invoke(cli, ["leaderboard", "--reports", str(empty)])
        assert result.exit_code == 1


class TestAnnotateCommands:
    def test_plan_and_export(self, runner, tmp_path):
        scores = {team: {f"c{i:03d}": (i % 10) / 10 for i in range(40)}
                  for team in ("alpha", "beta", "gamma")}
        scores_path = tmp_path / "scores.json"
        scores_path.write_text(json.dumps(scores))
        plan_path = tmp_path / "plan.json"
        result = runner.invoke(cli, ["annotate", "plan", "--scores", str(scores_path),
                                     "--out", str(plan_path), "--seed", "1"])
        assert result.exit_code == 0, result.output
        assert "75 rating tasks" in result.output
        plan = json.loads(plan_path.read_text())
        assert len(plan["tasks"]) == 75

        log = RatingLog(tmp_path / "ratings.jsonl")
        auto = {}
        for task in plan["tasks"][:10]:
            auto[task["sample_id"]] = 0.5
            for annotator in task["annotators"]:
                log.append(HumanRating(
                    sample_id=task["sample_id"], claim_id=task["claim_id"],
                    team=task["team"], annotator=annotator, coverage=3, relevance=2,
                ))
        auto_path = tmp_path / "auto.json"
        auto_path.write_text(json.dumps(auto))
        result = runner.invoke(cli, ["annotate", "export",
                                     "--ratings", str(tmp_path / "ratings.jsonl"),
                                     "--auto-scores", str(auto_path)])
        assert result.exit_code == 0, result.output
        assert "Dimension" in result.output
        assert "mean coverage by team:" in result.output
