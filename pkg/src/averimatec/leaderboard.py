"""Leaderboard assembly over per-team score reports."""

from __future__ import annotations

from dataclasses import dataclass

from .scoring import ScoreReport


@dataclass(frozen=True)
class LeaderboardRow:
    rank: int
    team: str
    question_score: float
    evidence_score: float
    justification_score: float
    averimatec_score: float


def build_leaderboard(reports: dict[str, ScoreReport]) -> list[LeaderboardRow]:
    """Rows sorted by gated score descending, ties by evidence score
    descending, then team name."""
    keyed = sorted(
        reports.items(),
        key=lambda item: (-item[1].averimatec, -item[1].evidence, item[0]),
    )
    return [
        LeaderboardRow(
            rank=i + 1,
            team=team,
            question_score=report.question,
            evidence_score=report.evidence,
            justification_score=report.justification,
            averimatec_score=report.averimatec,
        )
        for i, (team, report) in enumerate(keyed)
    ]


def render_leaderboard(rows: list[LeaderboardRow]) -> str:
    header = f"{'Rank':<5} {'Team':<16} {'Ques.':>7} {'Evid.':>7} {'Just.':>7} {'Score':>7}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row.rank:<5} {row.team:<16} {row.question_score:>7.4f}"
            f" {row.evidence_score:>7.4f} {row.justification_score:>7.4f}"
            f" {row.averimatec_score:>7.4f}"
        )
    return "\n".join(lines)
