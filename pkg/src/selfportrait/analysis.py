"""Report assembly over stored logs: per-user metrics tables, group
assignment from edit counts, and the ANCOVA / ANOVA report with
significance stars. The CLI and the HTTP service both call into this
module, so their outputs are identical bytes on identical logs.
"""
from __future__ import annotations

import csv
import io
from datetime import datetime, timedelta

import numpy as np

from .domain import Catalog, EmbeddingVector
from .edits import EditRecord
from .metrics import (
    METRIC_NAMES,
    InteractionEvent,
    SESSION_GAP,
    UserMetrics,
    compute_ils,
    compute_user_metrics,
    metrics_csv,
)
from .semantic import EmbeddingProvider
from .stats import (
    AncovaResult,
    DegenerateGroup,
    Group,
    GroupAssignment,
    ancova,
    anova_oneway,
    assign_groups,
    format_p,
)

PAIR_COLUMNS = (
    ("ref_int", Group.REFLECTED, Group.INTERACTED),
    ("ref_col", Group.REFLECTED, Group.COLLABORATED),
    ("int_col", Group.INTERACTED, Group.COLLABORATED),
)


class InsufficientData(Exception):
    pass


def movie_tag_embeddings(
    catalog: Catalog, provider: EmbeddingProvider
) -> dict[str, EmbeddingVector]:
    """Per-movie vectors for ILS: mean of the movie's top tag embeddings."""
    out: dict[str, EmbeddingVector] = {}
    for movie_id in sorted(catalog.tags):
        tagged = catalog.tags[movie_id]
        if not tagged.top_tags:
            continue
        vectors = provider.embed([tag for tag, _ in tagged.top_tags])
        mean = np.mean([v.values for v in vectors], axis=0)
        out[movie_id] = EmbeddingVector(values=tuple(mean.tolist()))
    return out


def prior_ratings_before(
    events: list[InteractionEvent], cutoff: datetime
) -> dict[str, dict[str, float]]:
    """Latest score per (user, movie) among ratings strictly before cutoff."""
    priors: dict[str, dict[str, float]] = {}
    for event in sorted(events, key=lambda e: e.timestamp):
        if event.kind != "rating" or event.timestamp >= cutoff:
            continue
        if event.movie_id is None or event.score is None:
            continue
        priors.setdefault(event.user_id, {})[event.movie_id] = event.score
    return priors


def metrics_for_window(
    events: list[InteractionEvent],
    window: tuple[datetime, datetime],
    user_ids: list[str],
    embeddings: dict[str, EmbeddingVector] | None = None,
    session_gap: timedelta = SESSION_GAP,
) -> list[UserMetrics]:
    """Per-user metrics for every listed user; embeddings filter to movies
    that actually have one so untagged movies don't abort diversity."""
    by_user: dict[str, list[InteractionEvent]] = {u: [] for u in user_ids}
    for event in events:
        if event.user_id in by_user:
            by_user[event.user_id].append(event)
    priors = prior_ratings_before(events, window[0])
    start, end = window

    def diversity(user_events: list[InteractionEvent], kind: str) -> float | None:
        if embeddings is None:
            return None
        distinct = sorted(
            {
                e.movie_id
                for e in user_events
                if e.kind == kind
                and e.movie_id in embeddings
                and start <= e.timestamp < end
            }
        )
        if len(distinct) < 2:
            return None
        return compute_ils(distinct, embeddings)

    rows = []
    for user_id in sorted(user_ids):
        user_events = sorted(by_user[user_id], key=lambda e: e.timestamp)
        base = compute_user_metrics(
            user_events,
            window,
            priors.get(user_id, {}),
            movie_embeddings=None,
            session_gap=session_gap,
        )
        rows.append(
            UserMetrics(
                user_id=user_id,
                movie_view_count=base.movie_view_count,
                rating_count=base.rating_count,
                login_count=base.login_count,
                session_length_hours=base.session_length_hours,
                rated_movie_div=diversity(user_events, "rating"),
                viewed_movie_div=diversity(user_events, "movie_view"),
                rerate_total=base.rerate_total,
                avg_rating=base.avg_rating,
            )
        )
    return rows


def _metric_value(row: UserMetrics, name: str) -> float | None:
    return {
        "movie_view_count": float(row.movie_view_count),
        "rating_count": float(row.rating_count),
        "login_count": float(row.login_count),
        "session_length": row.session_length_hours,
        "rated_movie_div": row.rated_movie_div,
        "viewed_movie_div": row.viewed_movie_div,
        "rerate_total": float(row.rerate_total),
        "avg_rating": row.avg_rating,
    }[name]


def analyze_metric(
    name: str,
    experiment: list[UserMetrics],
    baseline: list[UserMetrics] | None,
    groups: list[GroupAssignment],
) -> AncovaResult:
    """ANCOVA against the baseline covariate, or one-way ANOVA without one.

    Users missing a value for this metric (e.g. no in-window ratings) drop
    out of the analysis for this metric only.
    """
    exp_by_user = {m.user_id: _metric_value(m, name) for m in experiment}
    base_by_user = (
        {m.user_id: _metric_value(m, name) for m in baseline}
        if baseline is not None
        else None
    )
    usable = []
    for assignment in groups:
        value = exp_by_user.get(assignment.user_id)
        if value is None:
            continue
        if base_by_user is not None and base_by_user.get(assignment.user_id) is None:
            continue
        usable.append(assignment)
    outcome = {a.user_id: exp_by_user[a.user_id] for a in usable}
    if base_by_user is None:
        return anova_oneway(outcome, usable, metric=name)
    covariate = {a.user_id: base_by_user[a.user_id] for a in usable}
    return ancova(outcome, covariate, usable, metric=name)


def report_rows(
    experiment: list[UserMetrics],
    baseline: list[UserMetrics] | None,
    groups: list[GroupAssignment],
) -> list[AncovaResult]:
    results = []
    for name in METRIC_NAMES:
        try:
            results.append(analyze_metric(name, experiment, baseline, groups))
        except DegenerateGroup as exc:
            raise InsufficientData(f"{name}: {exc}") from exc
    return results


def report_csv(results: list[AncovaResult], p_column: str) -> str:
    """Star-annotated p-value table: omnibus p plus the three Tukey pairs."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["metric", p_column, "ref_int", "ref_col", "int_col"])
    for result in results:
        pair_values = {}
        for comparison in result.pairwise:
            pair_values[(comparison.group_a, comparison.group_b)] = (
                comparison.p_adjusted
            )
        row = [result.metric, format_p(result.p_value)]
        for _, a, b in PAIR_COLUMNS:
            p = pair_values.get((a, b), pair_values.get((b, a)))
            row.append(format_p(p) if p is not None else "")
        writer.writerow(row)
    return buffer.getvalue()


def groups_from_edits(
    edits: list[EditRecord], user_ids: list[str]
) -> list[GroupAssignment]:
    counts = {user_id: 0 for user_id in user_ids}
    for edit in edits:
        if edit.user_id in counts:
            counts[edit.user_id] += 1
    return assign_groups(counts)


def run_analysis(
    events: list[InteractionEvent],
    edits: list[EditRecord],
    window: tuple[datetime, datetime],
    baseline_window: tuple[datetime, datetime] | None,
    user_ids: list[str],
    embeddings: dict[str, EmbeddingVector] | None = None,
    groups: list[GroupAssignment] | None = None,
    session_gap: timedelta = SESSION_GAP,
) -> dict:
    """Full analysis bundle: metrics tables, group sizes, and the report."""
    if not user_ids:
        raise InsufficientData("no users to analyze")
    if groups is None:
        groups = groups_from_edits(edits, user_ids)
    experiment = metrics_for_window(
        events, window, user_ids, embeddings, session_gap
    )
    baseline = (
        metrics_for_window(events, baseline_window, user_ids, embeddings, session_gap)
        if baseline_window is not None
        else None
    )
    results = report_rows(experiment, baseline, groups)
    p_column = "ancova" if baseline is not None else "anova"
    return {
        "results": results,
        "experiment_metrics": experiment,
        "baseline_metrics": baseline,
        "groups": groups,
        "report_csv": report_csv(results, p_column),
        "experiment_csv": metrics_csv(experiment),
        "baseline_csv": metrics_csv(baseline) if baseline is not None else None,
        "p_column": p_column,
    }
