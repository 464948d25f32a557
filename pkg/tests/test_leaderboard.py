import pytest

from averimatec.leaderboard import build_leaderboard, render_leaderboard
from averimatec.scoring import ClaimScore, ScoreReport


def report(gated_mean, evidence_mean, n=10):
    gated_count = round(gated_mean * n)
    scores = []
    for i in range(n):
        gated = 1 if i < gated_count else 0
        scores.append(ClaimScore(
            claim_id=f"c{i}",
            question_score=0.5,
            evidence_recall=evidence_mean,
            justification_score=0.4,
            verdict_correct=bool(gated),
            averimatec=gated,
            evidence_count=3,
        ))
    return ScoreReport(tau=0.3, claim_scores=scores)


class TestBuildLeaderboard:
    def test_sorted_by_gated_score(self):
        rows = build_leaderboard({
            "low": report(0.1, 0.2),
            "high": report(0.9, 0.2),
            "mid": report(0.5, 0.2),
        })
        assert [r.team for r in rows] == ["high", "mid", "low"]
        assert [r.rank for r in rows] == [1, 2, 3]

    def test_tie_broken_by_evidence_then_name(self):
        rows = build_leaderboard({
            "b": report(0.5, 0.3),
            "a": report(0.5, 0.3),
            "c": report(0.5, 0.7),
        })
        assert [r.team for r in rows] == ["c", "a", "b"]

    def test_empty(self):
        assert build_leaderboard({}) == []

    def test_row_carries_all_aggregates(self):
        rows = build_leaderboard({"t": report(0.4, 0.6)})
        row = rows[0]
        assert row.question_score == pytest.approx(0.5)
        assert row.evidence_score == pytest.approx(0.6)
        assert row.justification_score == pytest.approx(0.4)
        assert row.averimatec_score == pytest.approx(0.4)


class TestRenderLeaderboard:
    def test_four_decimal_places(self):
        text = render_leaderboard(build_leaderboard({"team-x": report(0.3, 0.55)}))
        assert "0.3000" in text
        assert "0.5500" in text
        assert text.splitlines()[0].startswith("Rank")

    def test_one_line_per_team(self):
        rows = build_leaderboard({f"t{i}": report(i / 10, 0.5) for i in range(7)})
        text = render_leaderboard(rows)
        assert len(text.splitlines()) == 2 + 7
