"""Human-evaluation machinery: rating records, the stratified sampling plan,
and Spearman/Pearson correlation tables between human and automatic scores.
"""

from __future__ import annotations

import datetime as dt
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

RATING_SCALE = range(0, 6)


# ---------------------------------------------------------------------------
# correlation coefficients


def _average_ranks(x: Sequence[float]) -> np.ndarray:
    """Ranks starting at 1; tied values share the average of their ranks."""
    arr = np.asarray(x, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Covariance over the product of standard deviations; None when either
    input has zero variance."""
    if len(x) != len(y):
        raise ValueError("input lengths differ")
    if len(x) < 2:
        raise ValueError("need at least two points")
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    dx = ax - ax.mean()
    dy = ay - ay.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(np.sum(dx * dy) / (sx * sy))


def spearman(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Pearson correlation of average-tie rank vectors."""
    if len(x) != len(y):
        raise ValueError("input lengths differ")
    if len(x) < 2:
        raise ValueError("need at least two points")
    return pearson(_average_ranks(x), _average_ranks(y))


# ---------------------------------------------------------------------------
# ratings


@dataclass(frozen=True)
class HumanRating:
    sample_id: str
    claim_id: str
    team: str  # team whose prediction is being rated
    annotator: str
    coverage: int
    relevance: int
    timestamp: str = ""

    def __post_init__(self) -> None:
        if self.coverage not in RATING_SCALE or self.relevance not in RATING_SCALE:
            raise ValueError("coverage and relevance must be integers in 0..5")

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "claim_id": self.claim_id,
            "team": self.team,
            "annotator": self.annotator,
            "coverage": self.coverage,
            "relevance": self.relevance,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HumanRating":
        return cls(
            sample_id=d["sample_id"],
            claim_id=d["claim_id"],
            team=d["team"],
            annotator=d["annotator"],
            coverage=int(d["coverage"]),
            relevance=int(d["relevance"]),
            timestamp=d.get("timestamp", ""),
        )


class RatingLog:
    """Append-only line-delimited rating log with idempotent upsert on
    (sample_id, annotator): the latest record wins on load."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, rating: HumanRating) -> HumanRating:
        if not rating.timestamp:
            rating = HumanRating(
                **{**rating.to_dict(), "timestamp": dt.datetime.utcnow().isoformat()}
            )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rating.to_dict(), ensure_ascii=False) + "\n")
        return rating

    def load(self) -> list[HumanRating]:
        if not self.path.exists():
            return []
        latest: dict[tuple[str, str], HumanRating] = {}
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rating = HumanRating.from_dict(json.loads(line))
                latest[(rating.sample_id, rating.annotator)] = rating
        return list(latest.values())


# ---------------------------------------------------------------------------
# sampling plan


@dataclass(frozen=True)
class SampleTask:
    sample_id: str
    team: str
    claim_id: str
    annotators: tuple[str, str]
    stratum: int

    def __post_init__(self) -> None:
        if len(set(self.annotators)) != 2:
            raise ValueError("each sample needs two distinct annotators")
        if self.team in self.annotators:
            raise ValueError("a team must not rate its own predictions")


@dataclass
class SamplingPlan:
    tasks: list[SampleTask]
    warnings: list[str] = field(default_factory=list)

    def for_annotator(self, annotator: str) -> list[SampleTask]:
        return [t for t in self.tasks if annotator in t.annotators]

    def to_dict(self) -> dict:
        return {
            "tasks": [
                {
                    "sample_id": t.sample_id,
                    "team": t.team,
                    "claim_id": t.claim_id,
                    "annotators": list(t.annotators),
                    "stratum": t.stratum,
                }
                for t in self.tasks
            ],
            "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingPlan":
        return cls(
            tasks=[
                SampleTask(
                    sample_id=t["sample_id"],
                    team=t["team"],
                    claim_id=t["claim_id"],
                    annotators=tuple(t["annotators"]),
                    stratum=t["stratum"],
                )
                for t in d["tasks"]
            ],
            warnings=list(d.get("warnings", [])),
        )


def build_sampling_plan(
    auto_scores: dict[str, dict[str, float]],
    seed: int,
    n_per_team: int = 25,
    n_strata: int = 5,
) -> SamplingPlan:
    """Per team, draw claims so automatic scores are roughly uniform on [0,1].

    ``auto_scores`` maps team -> claim_id -> automatic evidence score. Equal-
    width strata get equal draws; an underfilled stratum borrows from the
    nearest one with a warning. Every sample is assigned to two annotator
    teams, never the predicting team itself.
    """
    teams = sorted(auto_scores)
    if len(teams) < 3:
        raise ValueError("need at least 3 teams for double assignment without self-rating")
    rng = random.Random(seed)
    warnings: list[str] = []
    tasks: list[SampleTask] = []
    per_stratum = n_per_team // n_strata
    for team in teams:
        scores = auto_scores[team]
        if len(scores) < n_per_team:
            raise ValueError(f"team {team}: fewer than {n_per_team} scored claims")
        strata: list[list[str]] = [[] for _ in range(n_strata)]
        for claim_id in sorted(scores):
            s = min(int(scores[claim_id] * n_strata), n_strata - 1)
            strata[s].append(claim_id)
        chosen: list[tuple[str, int]] = []
        deficits: list[tuple[int, int]] = []
        for s, pool in enumerate(strata):
            take = min(per_stratum, len(pool))
            chosen.extend((cid, s) for cid in rng.sample(pool, take))
            if take < per_stratum:
                warnings.append(
                    f"team {team}: stratum {s} has {len(pool)} claims, wanted {per_stratum}"
                )
                deficits.append((s, per_stratum - take))
        # borrow from the nearest stratum with spare claims
        taken = {cid for cid, _ in chosen}
        for s, deficit in deficits:
            for distance in range(1, n_strata):
                for neighbor in (s - distance, s + distance):
                    if deficit == 0 or not (0 <= neighbor < n_strata):
                        continue
                    spare = [c for c in strata[neighbor] if c not in taken]
                    take = min(deficit, len(spare))
                    for cid in rng.sample(spare, take):
                        chosen.append((cid, neighbor))
                        taken.add(cid)
                    deficit -= take
                if deficit == 0:
                    break
        chosen = chosen[:n_per_team]
        others = [t for t in teams if t != team]
        for claim_id, stratum in chosen:
            annotators = tuple(rng.sample(others, 2))
            tasks.append(
                SampleTask(
                    sample_id=f"{team}:{claim_id}",
                    team=team,
                    claim_id=claim_id,
                    annotators=annotators,
                    stratum=stratum,
                )
            )
    return SamplingPlan(tasks=tasks, warnings=warnings)


# ---------------------------------------------------------------------------
# correlation report


@dataclass
class CorrelationPair:
    spearman: Optional[float]
    pearson: Optional[float]
    n: int

    def render(self, which: str) -> str:
        value = getattr(self, which)
        return "—" if value is None else f"{value:.3f}"


def _correlate(x: list[float], y: list[float]) -> CorrelationPair:
    if len(x) < 2:
        return CorrelationPair(spearman=None, pearson=None, n=len(x))
    return CorrelationPair(spearman=spearman(x, y), pearson=pearson(x, y), n=len(x))


@dataclass
class CorrelationReport:
    human_human: dict[str, CorrelationPair]  # dimension -> pair
    human_model: dict[str, CorrelationPair]
    per_team: dict[str, dict[str, CorrelationPair]]  # team -> dimension -> pair
    lowest: dict[str, CorrelationPair]  # ratings whose auto score is 0
    highest: dict[str, CorrelationPair]  # ratings whose auto score is 1
    mean_coverage_by_team: dict[str, float]

    def to_dict(self) -> dict:
        def enc(pair: CorrelationPair) -> dict:
            return {"spearman": pair.spearman, "pearson": pair.pearson, "n": pair.n}

        return {
            "human_human": {k: enc(v) for k, v in self.human_human.items()},
            "human_model": {k: enc(v) for k, v in self.human_model.items()},
            "per_team": {
                team: {k: enc(v) for k, v in dims.items()}
                for team, dims in self.per_team.items()
            },
            "lowest": {k: enc(v) for k, v in self.lowest.items()},
            "highest": {k: enc(v) for k, v in self.highest.items()},
            "mean_coverage_by_team": self.mean_coverage_by_team,
        }


DIMENSIONS = ("coverage", "relevance")


def correlation_report(
    ratings: Sequence[HumanRating], auto_scores: dict[str, float]
) -> CorrelationReport:
    """Human-human and human-model correlations per dimension, plus per-team
    and lowest/highest automatic-score slices.

    ``auto_scores`` maps sample_id to the automatic evidence score. Samples
    missing a second rating are excluded from the human-human pairing.
    """
    by_sample: dict[str, list[HumanRating]] = {}
    for r in ratings:
        by_sample.setdefault(r.sample_id, []).append(r)

    human_human = {}
    for dim in DIMENSIONS:
        a, b = [], []
        for sample_id in sorted(by_sample):
            group = sorted(by_sample[sample_id], key=lambda r: r.annotator)
            if len(group) != 2:
                continue
            a.append(float(getattr(group[0], dim)))
            b.append(float(getattr(group[1], dim)))
        human_human[dim] = _correlate(a, b)

    def model_slice(subset: Sequence[HumanRating]) -> dict[str, CorrelationPair]:
        out = {}
        for dim in DIMENSIONS:
            human, model = [], []
            for r in subset:
                if r.sample_id not in auto_scores:
                    continue
                human.append(float(getattr(r, dim)))
                model.append(float(auto_scores[r.sample_id]))
            out[dim] = _correlate(human, model)
        return out

    ordered = sorted(ratings, key=lambda r: (r.sample_id, r.annotator))
    human_model = model_slice(ordered)
    teams = sorted({r.team for r in ratings})
    per_team = {team: model_slice([r for r in ordered if r.team == team]) for team in teams}
    lowest = model_slice([r for r in ordered if auto_scores.get(r.sample_id) == 0.0])
    highest = model_slice([r for r in ordered if auto_scores.get(r.sample_id) == 1.0])

    mean_coverage = {}
    for team in teams:
        values = [r.coverage for r in ratings if r.team == team]
        mean_coverage[team] = sum(values) / len(values) if values else 0.0

    return CorrelationReport(
        human_human=human_human,
        human_model=human_model,
        per_team=per_team,
        lowest=lowest,
        highest=highest,
        mean_coverage_by_team=mean_coverage,
    )


def render_correlation_table(report: CorrelationReport) -> str:
    lines = [
        "Dimension       HH-rho  HH-r    HM-rho  HM-r",
        "-" * 46,
    ]
    for dim in DIMENSIONS:
        hh = report.human_human[dim]
        hm = report.human_model[dim]
        lines.append(
            f"{dim:<15} {hh.render('spearman'):>6}  {hh.render('pearson'):>6}"
            f"  {hm.render('spearman'):>6}  {hm.render('pearson'):>6}"
        )
    return "\n".join(lines)
