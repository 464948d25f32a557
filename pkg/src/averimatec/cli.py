"""Command-line surface; every service behavior is reachable here too."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .adapters import (
    CachingJudge,
    HashEmbeddingProvider,
    HttpJudge,
    HttpModelAdapter,
    MockModelAdapter,
    MockTextJudge,
    MockVisualJudge,
)
from .analysis import (
    RatingLog,
    build_sampling_plan,
    correlation_report,
    render_correlation_table,
)
from .leaderboard import build_leaderboard, render_leaderboard
from .model import load_claims, load_submission, save_submission, validate_submission
from .pipeline import PipelineConfig, run_pipeline
from .scoring import DEFAULT_TAU, ScoreReport, averimatec_score, breakdown
from .store import (
    build_store,
    compute_stats,
    load_store,
    save_store,
)
from .store.clients import FixtureClients, FixtureRisClient


@click.group()
def cli():
    """Image-text claim verification harness."""


# ---------------------------------------------------------------------------
# store


@cli.group()
def store():
    """Knowledge-store construction and inspection."""


@store.command("build")
@click.option("--claims", "claims_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="train", type=click.Choice(["train", "dev", "test"]))
@click.option("--fixture", "fixture_path", required=True, type=click.Path(exists=True),
              help="Recorded client fixture; building never hits the live web here.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--image-cap", default=100, type=int)
@click.option("--strict-ris-dates", is_flag=True, default=False)
def store_build(claims_path, split, fixture_path, out_dir, seed, image_cap, strict_ris_dates):
    claims = load_claims(claims_path, split=split)
    fixtures = FixtureClients(fixture_path)
    knowledge_store, report = build_store(
        claims,
        generator=MockModelAdapter(),
        search_client=fixtures,
        image_client=fixtures,
        ris_client=FixtureRisClient(fixtures),
        dater=fixtures,
        fetcher=fixtures,
        seed=seed,
        image_cap=image_cap,
        strict_ris_dates=strict_ris_dates,
    )
    save_store(knowledge_store, out_dir)
    click.echo(f"store written to {out_dir}: {len(knowledge_store.entries)} entries")
    if report.failures:
        click.echo(f"{len(report.failures)} recorded failures", err=True)
    if report.flagged_undated:
        click.echo(f"{len(report.flagged_undated)} undated RIS pages kept and flagged", err=True)


@store.command("ingest")
@click.option("--src", "src_dir", required=True, type=click.Path(exists=True),
              help="Existing store directory to validate and copy.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def store_ingest(src_dir, out_dir):
    knowledge_store = load_store(src_dir)
    save_store(knowledge_store, out_dir)
    stats = compute_stats(knowledge_store)
    click.echo(
        f"ingested {stats.url_count_total} text URLs"
        f" ({stats.url_count_scraped} scraped), {stats.image_count} images"
    )


@store.command("stats")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
def store_stats(store_dir):
    stats = compute_stats(load_store(store_dir))
    click.echo(json.dumps(stats.__dict__, indent=2))


# ---------------------------------------------------------------------------
# pipeline


@cli.group()
def pipeline():
    """Baseline retrieval + QA + verdict pipeline."""


@pipeline.command("run")
@click.option("--claims", "claims_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="dev", type=click.Choice(["train", "dev", "test"]))
@click.option("--train-claims", "train_path", type=click.Path(exists=True))
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--adapter-url", default=None, help="Generation service URL; mock when omitted.")
@click.option("--trace-dir", default=None, type=click.Path())
@click.option("--iterative", is_flag=True, default=False)
@click.option("--workers", default=1, type=int)
def pipeline_run(claims_path, split, train_path, store_dir, out_path, adapter_url,
                 trace_dir, iterative, workers):
    claims = load_claims(claims_path, split=split)
    train = load_claims(train_path, split="train") if train_path else []
    knowledge_store = load_store(store_dir)
    adapter = HttpModelAdapter(adapter_url) if adapter_url else MockModelAdapter()
    config = PipelineConfig(iterative=iterative, workers=workers)
    submission, _, failures = run_pipeline(
        claims,
        knowledge_store,
        adapter,
        train=train,
        embeddings=HashEmbeddingProvider(),
        config=config,
        trace_dir=trace_dir,
    )
    save_submission(submission, out_path)
    click.echo(f"submission written to {out_path}: {len(submission.records)} records")
    for failure in failures:
        click.echo(f"claim {failure.claim_id} failed at {failure.stage}: {failure.reason}",
                   err=True)
    if failures:
        sys.exit(1)


# ---------------------------------------------------------------------------
# scoring


@cli.group()
def score():
    """Submission scoring."""


@score.command("run")
@click.option("--claims", "claims_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="dev", type=click.Choice(["train", "dev", "test"]))
@click.option("--submission", "sub_path", required=True, type=click.Path(exists=True))
@click.option("--tau", default=DEFAULT_TAU, type=float, show_default=True)
@click.option("--judge-url", default=None, help="Judge service URL; mock judge when omitted.")
@click.option("--cache-dir", default=None, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path())
def score_run(claims_path, split, sub_path, tau, judge_url, cache_dir, out_path):
    claims = load_claims(claims_path, split=split)
    sub = load_submission(sub_path)
    validation = validate_submission(sub, claims)
    for issue in validation.issues:
        click.echo(f"warning: claim {issue.claim_id}: {issue.message}", err=True)
    inner = HttpJudge(judge_url) if judge_url else MockTextJudge()
    text_judge = CachingJudge(inner, cache_dir=cache_dir)
    visual_judge = HttpJudge(judge_url) if judge_url else MockVisualJudge()
    report = averimatec_score(claims, sub, text_judge, visual_judge, tau=tau)
    if out_path:
        Path(out_path).write_text(json.dumps(report.to_dict(), indent=2))
        click.echo(f"report written to {out_path}")
    click.echo(
        f"question {report.question:.4f}  evidence {report.evidence:.4f}"
        f"  justification {report.justification:.4f}  gated {report.averimatec:.4f}"
    )
    bd = breakdown(report, claims)
    click.echo("by claim type: " + ", ".join(
        f"{k}={v.render()}" for k, v in bd.by_claim_type.items()))
    click.echo("by verdict:    " + ", ".join(
        f"{k}={v.render()}" for k, v in bd.by_verdict.items()))
    click.echo(
        f"before cutoff: {bd.before_cutoff.render()} (n={bd.before_cutoff.count})"
        f"  after cutoff: {bd.after_cutoff.render()} (n={bd.after_cutoff.count})"
    )
    click.echo(f"avg evidence count: {bd.avg_evidence_count:.2f}")


# ---------------------------------------------------------------------------
# leaderboard


@cli.command("leaderboard")
@click.option("--reports", "reports_dir", required=True, type=click.Path(exists=True),
              help="Directory of <team>.json score reports.")
def leaderboard_cmd(reports_dir):
    reports = {}
    for path in sorted(Path(reports_dir).glob("*.json")):
        reports[path.stem] = ScoreReport.from_dict(json.loads(path.read_text()))
    if not reports:
        click.echo("no reports found", err=True)
        sys.exit(1)
    click.echo(render_leaderboard(build_leaderboard(reports)))


# ---------------------------------------------------------------------------
# annotation


@cli.group()
def annotate():
    """Human-evaluation planning and export."""


@annotate.command("plan")
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True),
              help="JSON {team: {claim_id: auto evidence score}}.")
@click.option("--seed", default=0, type=int)
@click.option("--per-team", default=25, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def annotate_plan(scores_path, seed, per_team, out_path):
    auto_scores = json.loads(Path(scores_path).read_text())
    plan = build_sampling_plan(auto_scores, seed=seed, n_per_team=per_team)
    Path(out_path).write_text(json.dumps(plan.to_dict(), indent=2))
    click.echo(f"plan written to {out_path}: {len(plan.tasks)} rating tasks")
    for warning in plan.warnings:
        click.echo(f"warning: {warning}", err=True)


@annotate.command("export")
@click.option("--ratings", "ratings_path", required=True, type=click.Path(exists=True))
@click.option("--auto-scores", "auto_path", required=True, type=click.Path(exists=True),
              help="JSON {sample_id: automatic evidence score}.")
@click.option("--out", "out_path", default=None, type=click.Path())
def annotate_export(ratings_path, auto_path, out_path):
    ratings = RatingLog(ratings_path).load()
    auto_scores = json.loads(Path(auto_path).read_text())
    report = correlation_report(ratings, auto_scores)
    if out_path:
        Path(out_path).write_text(json.dumps(report.to_dict(), indent=2))
        click.echo(f"correlation report written to {out_path}")
    click.echo(render_correlation_table(report))
    click.echo("mean coverage by team: " + ", ".join(
        f"{team}={value:.2f}" for team, value in report.mean_coverage_by_team.items()))


# ---------------------------------------------------------------------------
# service


@cli.command("serve")
@click.option("--root", "data_root", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--judge-url", default=None)
@click.option("--tau", default=DEFAULT_TAU, type=float)
@click.option("--frontend", "frontend_dir", default=None, type=click.Path())
def serve(data_root, host, port, judge_url, tau, frontend_dir):
    import uvicorn

    from .service import create_app

    app = create_app(data_root, judge_url=judge_url, tau=tau, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port)


def main() -> int:
    return cli(standalone_mode=True)


if __name__ == "__main__":
    main()
