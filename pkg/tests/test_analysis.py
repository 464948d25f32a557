import json
import math
import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from averimatec.analysis import (
    HumanRating,
    RatingLog,
    SampleTask,
    SamplingPlan,
    build_sampling_plan,
    correlation_report,
    pearson,
    render_correlation_table,
    spearman,
)

FIXTURES = Path(__file__).parent / "fixtures"

# ---------------------------------------------------------------------------
# independent oracles, written from the textbook formulas


def oracle_pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sx = math.sqrt(sum((a - mx) ** 2 for a in x))
    sy = math.sqrt(sum((b - my) ** 2 for b in y))
    if sx == 0 or sy == 0:
        return None
    return cov / (sx * sy)


def oracle_ranks(x):
    out = [0.0] * len(x)
    for i, v in enumerate(x):
        below = sum(1 for w in x if w < v)
        ties = sum(1 for w in x if w == v)
        out[i] = below + (ties + 1) / 2.0
    return out


def oracle_spearman(x, y):
    return oracle_pearson(oracle_ranks(x), oracle_ranks(y))


class TestCorrelationOracles:
    def test_randomized_equivalence(self):
        rng = random.Random(13)
        for _ in range(1000):
            n = rng.randint(2, 40)
            # coarse values force plenty of ties
            x = [rng.randint(0, 5) for _ in range(n)]
            y = [rng.randint(0, 10) / 10 for _ in range(n)]
            ep = oracle_pearson(x, y)
            es = oracle_spearman(x, y)
            gp = pearson(x, y)
            gs = spearman(x, y)
            if ep is None:
                assert gp is None and gs is None
            else:
                assert gp == pytest.approx(ep, abs=1e-12)
                assert gs == pytest.approx(es, abs=1e-12)

    def test_perfect_monotone(self):
        x = [1.0, 2.0, 3.0, 4.0]
        assert spearman(x, [v * 10 for v in x]) == pytest.approx(1.0)
        assert spearman(x, [-v for v in x]) == pytest.approx(-1.0)

    def test_zero_variance_is_undefined(self):
        assert pearson([1, 1, 1], [1, 2, 3]) is None
        assert spearman([1, 2, 3], [5, 5, 5]) is None

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            spearman([1], [2])

    def test_too_short(self):
        with pytest.raises(ValueError):
            pearson([1], [2])

    @given(
        st.lists(st.integers(0, 5), min_size=3, max_size=30),
        st.lists(st.integers(0, 5), min_size=3, max_size=30),
    )
    @settings(max_examples=200)
    def test_symmetry_and_bounds(self, x, y):
        n = min(len(x), len(y))
        x, y = x[:n], y[:n]
        r = pearson(x, y)
        if r is not None:
            assert -1.0 - 1e-12 <= r <= 1.0 + 1e-12
            assert pearson(y, x) == pytest.approx(r, abs=1e-12)
        s = spearman(x, y)
        if s is not None:
            assert -1.0 - 1e-12 <= s <= 1.0 + 1e-12
            assert spearman(y, x) == pytest.approx(s, abs=1e-12)

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=20, unique=True))
    @settings(max_examples=100)
    def test_spearman_invariant_under_monotone_transform(self, x):
        y = [random.Random(1).random() for _ in x]
        base = spearman(x, y)
        squashed = spearman([math.atan(v) for v in x], y)
        if base is not None:
            assert squashed == pytest.approx(base, abs=1e-12)

    @given(st.lists(st.integers(-50, 50), min_size=3, max_size=20))
    @settings(max_examples=100)
    def test_pearson_invariant_under_positive_affine(self, x):
        y = list(range(len(x)))
        base = pearson(x, y)
        shifted = pearson([3 * v + 7 for v in x], y)
        if base is None:
            assert shifted is None
        else:
            assert shifted == pytest.approx(base, abs=1e-12)


# ---------------------------------------------------------------------------
# ratings


class TestHumanRating:
    def test_scale_enforced(self):
        with pytest.raises(ValueError):
            HumanRating("s1", "c1", "t1", "t2", coverage=6, relevance=0)
        with pytest.raises(ValueError):
            HumanRating("s1", "c1", "t1", "t2", coverage=0, relevance=-1)

    def test_round_trip(self):
        r = HumanRating("s1", "c1", "t1", "t2", coverage=3, relevance=4, timestamp="x")
        assert HumanRating.from_dict(r.to_dict()) == r


class TestRatingLog:
    def test_append_and_load(self, tmp_path):
        log = RatingLog(tmp_path / "ratings.jsonl")
        r = log.append(HumanRating("s1", "c1", "t1", "t2", 3, 4))
        assert r.timestamp  # filled on append
        assert log.load() == [r]

    def test_resubmission_latest_wins(self, tmp_path):
        log = RatingLog(tmp_path / "ratings.jsonl")
        log.append(HumanRating("s1", "c1", "t1", "t2", 1, 1))
        revised = log.append(HumanRating("s1", "c1", "t1", "t2", 5, 5))
        loaded = log.load()
        assert len(loaded) == 1
        assert loaded[0].coverage == 5
        assert loaded[0].timestamp == revised.timestamp

    def test_distinct_annotators_kept(self, tmp_path):
        log = RatingLog(tmp_path / "ratings.jsonl")
        log.append(HumanRating("s1", "c1", "t1", "t2", 1, 1))
        log.append(HumanRating("s1", "c1", "t1", "t3", 2, 2))
        assert len(log.load()) == 2

    def test_missing_file(self, tmp_path):
        assert RatingLog(tmp_path / "absent.jsonl").load() == []


# ---------------------------------------------------------------------------
# sampling plan


def scores_for(teams, n=30, seed=0):
    rng = random.Random(seed)
    return {
        team: {f"c{i:03d}": rng.randint(0, 10) / 10 for i in range(n)}
        for team in teams
    }


class TestSampleTask:
    def test_self_rating_rejected(self):
        with pytest.raises(ValueError):
            SampleTask("s", "t1", "c", ("t1", "t2"), 0)

    def test_duplicate_annotators_rejected(self):
        with pytest.raises(ValueError):
            SampleTask("s", "t1", "c", ("t2", "t2"), 0)


class TestSamplingPlan:
    def test_task_count_five_teams(self):
        plan = build_sampling_plan(scores_for(["a", "b", "c", "d", "e"], n=60), seed=1)
        assert len(plan.tasks) == 125  # 25 per team
        for team in "abcde":
            assert sum(1 for t in plan.tasks if t.team == team) == 25

    def test_double_assignment_no_self_rating(self):
        plan = build_sampling_plan(scores_for(["a", "b", "c"], n=60), seed=1)
        for task in plan.tasks:
            assert len(set(task.annotators)) == 2
            assert task.team not in task.annotators

    def test_stratification_when_well_populated(self):
        # uniform scores: each stratum can supply its full quota
        scores = {t: {f"c{i:03d}": (i % 10) / 10 + 0.05 for i in range(50)}
                  for t in ["a", "b", "c"]}
        plan = build_sampling_plan(scores, seed=3)
        for team in "abc":
            strata = [t.stratum for t in plan.tasks if t.team == team]
            assert sorted(set(strata)) == [0, 1, 2, 3, 4]
            assert all(strata.count(s) == 5 for s in range(5))
        assert plan.warnings == []

    def test_borrowing_with_warning(self):
        # no team has any score >= 0.8, so stratum 4 is empty
        scores = {t: {f"c{i:03d}": (i % 7) / 10 for i in range(40)}
                  for t in ["a", "b", "c"]}
        plan = build_sampling_plan(scores, seed=3)
        assert any("stratum 4" in w for w in plan.warnings)
        for team in "abc":
            assert sum(1 for t in plan.tasks if t.team == team) == 25

    def test_no_duplicate_claims_within_team(self):
        plan = build_sampling_plan(scores_for(["a", "b", "c", "d"], n=40), seed=9)
        for team in "abcd":
            picked = [t.claim_id for t in plan.tasks if t.team == team]
            assert len(picked) == len(set(picked))

    def test_seed_determinism(self):
        scores = scores_for(["a", "b", "c"], n=60)
        p1 = build_sampling_plan(scores, seed=5)
        p2 = build_sampling_plan(scores, seed=5)
        p3 = build_sampling_plan(scores, seed=6)
        assert p1.to_dict() == p2.to_dict()
        assert p1.to_dict() != p3.to_dict()

    def test_fewer_than_three_teams_rejected(self):
        with pytest.raises(ValueError):
            build_sampling_plan(scores_for(["a", "b"]), seed=0)

    def test_too_few_claims_rejected(self):
        with pytest.raises(ValueError):
            build_sampling_plan(scores_for(["a", "b", "c"], n=10), seed=0)

    def test_round_trip(self):
        plan = build_sampling_plan(scores_for(["a", "b", "c"], n=60), seed=2)
        assert SamplingPlan.from_dict(plan.to_dict()).to_dict() == plan.to_dict()

    def test_for_annotator(self):
        plan = build_sampling_plan(scores_for(["a", "b", "c"], n=60), seed=2)
        mine = plan.for_annotator("a")
        assert mine
        assert all("a" in t.annotators for t in mine)


# ---------------------------------------------------------------------------
# correlation report


def load_fixture():
    data = json.loads((FIXTURES / "correlation_fixture.json").read_text())
    ratings = [HumanRating.from_dict(r) for r in data["ratings"]]
    return ratings, data["auto_scores"]


class TestCorrelationReport:
    def test_frozen_fixture_reproduces_published_agreement(self):
        # 250 ratings over 125 samples; the coverage and relevance scores
        # were constructed to land on the published correlations
        ratings, auto = load_fixture()
        report = correlation_report(ratings, auto)
        assert report.human_model["coverage"].n == 250
        assert round(report.human_model["coverage"].spearman, 3) == 0.310
        assert round(report.human_model["relevance"].spearman, 3) == 0.319

    def test_fixture_oracle_agreement(self):
        ratings, auto = load_fixture()
        report = correlation_report(ratings, auto)
        x = [float(r.coverage) for r in sorted(ratings, key=lambda r: (r.sample_id, r.annotator))]
        y = [float(auto[r.sample_id]) for r in sorted(ratings, key=lambda r: (r.sample_id, r.annotator))]
        assert report.human_model["coverage"].spearman == pytest.approx(
            oracle_spearman(x, y), abs=1e-12
        )

    def test_human_human_pairs(self):
        ratings = [
            HumanRating("s1", "c1", "t1", "a", 5, 5),
            HumanRating("s1", "c1", "t1", "b", 4, 4),
            HumanRating("s2", "c2", "t1", "a", 1, 1),
            HumanRating("s2", "c2", "t1", "b", 0, 2),
            HumanRating("s3", "c3", "t1", "a", 2, 2),  # unpaired, excluded
        ]
        report = correlation_report(ratings, {"s1": 1.0, "s2": 0.0, "s3": 0.5})
        assert report.human_human["coverage"].n == 2
        assert report.human_human["coverage"].spearman == pytest.approx(1.0)

    def test_extreme_slices(self):
        ratings, auto = load_fixture()
        report = correlation_report(ratings, auto)
        n_low = sum(1 for r in ratings if auto[r.sample_id] == 0.0)
        n_high = sum(1 for r in ratings if auto[r.sample_id] == 1.0)
        assert report.lowest["coverage"].n == n_low
        assert report.highest["coverage"].n == n_high

    def test_per_team_partition(self):
        ratings, auto = load_fixture()
        report = correlation_report(ratings, auto)
        assert sum(p["coverage"].n for p in report.per_team.values()) == 250
        assert set(report.mean_coverage_by_team) == set(report.per_team)

    def test_undefined_rendered_as_dash(self):
        ratings = [
            HumanRating("s1", "c1", "t1", "a", 3, 3),
            HumanRating("s2", "c2", "t1", "a", 3, 3),
        ]
        report = correlation_report(ratings, {"s1": 0.2, "s2": 0.4})
        table = render_correlation_table(report)
        assert "—" in table

    def test_report_round_trip_dict(self):
        ratings, auto = load_fixture()
        report = correlation_report(ratings, auto)
        encoded = report.to_dict()
        assert encoded["human_model"]["coverage"]["n"] == 250
        json.dumps(encoded)  # must be serializable
