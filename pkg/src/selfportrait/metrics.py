"""Behavioral log metrics: engagement counts, session derivation, intra-list
similarity diversity, re-rates, and average rating.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .domain import format_instant, parse_instant
from .semantic import EmbeddingVector

SESSION_GAP = timedelta(minutes=30)

METRIC_NAMES = (
    "movie_view_count",
    "rating_count",
    "login_count",
    "session_length",
    "rated_movie_div",
    "viewed_movie_div",
    "rerate_total",
    "avg_rating",
)


class MetricsError(Exception):
    pass


class TooFewItems(MetricsError):
    pass


class MissingEmbedding(MetricsError):
    pass


@dataclass(frozen=True)
class InteractionEvent:
    user_id: str
    kind: str  # movie_view | rating | login | page_event
    timestamp: datetime
    movie_id: str | None = None
    score: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "rating" and (self.movie_id is None or self.score is None):
            raise ValueError("rating events need movie_id and score")
        if self.kind == "movie_view" and self.movie_id is None:
            raise ValueError("view events need movie_id")

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "kind": self.kind,
            "timestamp": format_instant(self.timestamp),
            "movie_id": self.movie_id,
            "score": self.score,
        }

    @classmethod
    def from_json(cls, data: dict) -> "InteractionEvent":
        return cls(
            user_id=data["user_id"],
            kind=data["kind"],
            timestamp=parse_instant(data["timestamp"]),
            movie_id=data.get("movie_id"),
            score=None if data.get("score") is None else float(data["score"]),
        )


@dataclass(frozen=True)
class UserMetrics:
    user_id: str
    movie_view_count: int
    rating_count: int
    login_count: int
    session_length_hours: float
    rated_movie_div: float | None
    viewed_movie_div: float | None
    rerate_total: int
    avg_rating: float | None

    def as_row(self) -> list:
        def fmt(value):
            return "" if value is None else value

        return [
            self.user_id,
            self.movie_view_count,
            self.rating_count,
            self.login_count,
            fmt(self.session_length_hours),
            fmt(self.rated_movie_div),
            fmt(self.viewed_movie_div),
            self.rerate_total,
            fmt(self.avg_rating),
        ]


def compute_ils(
    movies: list[str], tag_embeddings: dict[str, EmbeddingVector]
) -> float:
    """Mean pairwise cosine similarity of the movies' tag embeddings.

    Repeated movie ids collapse to one occurrence: a list's diversity is a
    property of which movies it mentions, so re-listing one never moves the
    value. Negative cosines clamp to zero so the result stays in [0, 1] for
    signed embeddings; a higher value means a less diverse list.
    """
    distinct = list(dict.fromkeys(movies))
    n = len(distinct)
    if n < 2:
        raise TooFewItems(f"ILS needs at least 2 distinct movies, got {n}")
    missing = [m for m in distinct if m not in tag_embeddings]
    if missing:
        raise MissingEmbedding(f"no embedding for: {', '.join(missing[:5])}")
    vectors = np.asarray([tag_embeddings[m].values for m in distinct], dtype=float)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise MissingEmbedding("zero-vector embedding cannot enter ILS")
    unit = vectors / norms
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    upper = np.triu_indices(n, k=1)
    clamped = np.maximum(sims[upper], 0.0)
    return float(np.sum(clamped) * 2.0 / (n * (n - 1)))


def derive_sessions(
    events: list[InteractionEvent], gap: timedelta = SESSION_GAP
) -> list[tuple[datetime, datetime]]:
    """Group time-sorted events into sessions split at inter-arrival > gap."""
    if not events:
        return []
    timestamps = [e.timestamp for e in events]
    if timestamps != sorted(timestamps):
        raise ValueError("events must be sorted by timestamp")
    sessions = []
    start = prev = timestamps[0]
    for ts in timestamps[1:]:
        if ts - prev > gap:
            sessions.append((start, prev))
            start = ts
        prev = ts
    sessions.append((start, prev))
    return sessions


def compute_user_metrics(
    events: list[InteractionEvent],
    window: tuple[datetime, datetime],
    prior_ratings: dict[str, float],
    movie_embeddings: dict[str, EmbeddingVector] | None = None,
    session_gap: timedelta = SESSION_GAP,
    unique_views: bool = False,
) -> UserMetrics:
    """Table-style per-user metrics over the half-open window [start, end).

    A re-rate is an in-window rating of a movie in ``prior_ratings`` whose
    score differs from the prior score. Diversities need at least two distinct
    movies with embeddings; otherwise they (and an undefined average) are
    reported as absent.
    """
    start, end = window
    if end < start:
        raise ValueError("window must be well-ordered")
    user_id = events[0].user_id if events else ""
    in_window = sorted(
        (e for e in events if start <= e.timestamp < end),
        key=lambda e: e.timestamp,
    )

    views = [e for e in in_window if e.kind == "movie_view"]
    ratings = [e for e in in_window if e.kind == "rating"]
    sessions = derive_sessions(in_window, gap=session_gap)
    session_hours = sum(
        (s_end - s_start).total_seconds() for s_start, s_end in sessions
    ) / 3600.0

    rerate_total = sum(
        1
        for e in ratings
        if e.movie_id in prior_ratings and e.score != prior_ratings[e.movie_id]
    )
    scores = [e.score for e in ratings if e.score is not None]
    avg_rating = sum(scores) / len(scores) if scores else None

    def diversity(movie_ids: list[str]) -> float | None:
        distinct = sorted(set(movie_ids))
        if movie_embeddings is None or len(distinct) < 2:
            return None
        return compute_ils(distinct, movie_embeddings)

    viewed_ids = [e.movie_id for e in views if e.movie_id]
    view_count = len(set(viewed_ids)) if unique_views else len(viewed_ids)

    return UserMetrics(
        user_id=user_id,
        movie_view_count=view_count,
        rating_count=len(ratings),
        login_count=len(sessions),
        session_length_hours=session_hours,
        rated_movie_div=diversity([e.movie_id for e in ratings if e.movie_id]),
        viewed_movie_div=diversity(viewed_ids),
        rerate_total=rerate_total,
        avg_rating=avg_rating,
    )


def metrics_csv(rows: list[UserMetrics]) -> str:
    """One row per user with the Table-style metric headers."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["user_id", *METRIC_NAMES])
    for row in sorted(rows, key=lambda r: r.user_id):
        writer.writerow(row.as_row())
    return buffer.getvalue()
