"""CSV ingestion and per-user quartile movie-set extraction.

Input files follow the MovieLens layout (RFC 4180 CSV with a header row):
movies.csv (movieId,title,genres[,actors,directors,language,year]),
ratings.csv (userId,movieId,rating,timestamp epoch seconds), and
tags.csv (movieId,tag,relevance).
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from .domain import (
    Catalog,
    MovieRecord,
    RatingEvent,
    TaggedMovie,
    format_instant,
    parse_instant,
    validate_rating,
)

RECENT_WINDOW = timedelta(days=365)


class IngestError(Exception):
    pass


class MissingFile(IngestError):
    pass


class MalformedRow(IngestError):
    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class DanglingTagReference(IngestError):
    pass


class EmptyHistory(IngestError):
    pass


_TITLE_YEAR = re.compile(r"\((\d{4})\)\s*$")


def _split_multi(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split("|") if part.strip())


def _read_rows(path: Path) -> tuple[list[dict], list[int]]:
    if not path.exists():
        raise MissingFile(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        rows = []
        lines = []
        for row in reader:
            rows.append(row)
            lines.append(reader.line_num)
    return rows, lines


def load_catalog(movies_path: str | Path, tags_path: str | Path) -> Catalog:
    """Load movie records and community tags; tags truncate to the top 10."""
    movies_path = Path(movies_path)
    tags_path = Path(tags_path)

    movies: dict[str, MovieRecord] = {}
    rows, lines = _read_rows(movies_path)
    for row, line in zip(rows, lines):
        movie_id = (row.get("movieId") or "").strip()
        title = (row.get("title") or "").strip()
        if not movie_id or not title:
            raise MalformedRow(str(movies_path), line, "movieId and title required")
        year_text = (row.get("year") or "").strip()
        if not year_text:
            match = _TITLE_YEAR.search(title)
            year_text = match.group(1) if match else ""
        try:
            year = int(year_text) if year_text else None
        except ValueError:
            raise MalformedRow(str(movies_path), line, f"bad year {year_text!r}")
        try:
            record = MovieRecord(
                movie_id=movie_id,
                title=title,
                genres=_split_multi(row.get("genres") or ""),
                actors=_split_multi(row.get("actors") or ""),
                directors=_split_multi(row.get("directors") or ""),
                language=(row.get("language") or "").strip() or "(unknown)",
                release_year=year,
            )
        except Exception as exc:
            raise MalformedRow(str(movies_path), line, str(exc))
        if movie_id in movies:
            raise MalformedRow(str(movies_path), line, f"duplicate movieId {movie_id}")
        movies[movie_id] = record

    raw_tags: dict[str, list[tuple[str, float]]] = {mid: [] for mid in movies}
    rows, lines = _read_rows(tags_path)
    for row, line in zip(rows, lines):
        movie_id = (row.get("movieId") or "").strip()
        tag = (row.get("tag") or "").strip()
        if not movie_id or not tag:
            raise MalformedRow(str(tags_path), line, "movieId and tag required")
        if movie_id not in movies:
            raise DanglingTagReference(
                f"{tags_path}:{line}: tag row references unknown movie {movie_id}"
            )
        try:
            relevance = float(row.get("relevance") or "")
        except ValueError:
            raise MalformedRow(str(tags_path), line, "bad relevance value")
        raw_tags[movie_id].append((tag, relevance))

    tags = {}
    for movie_id, pairs in raw_tags.items():
        pairs.sort(key=lambda p: (-p[1], p[0]))
        tags[movie_id] = TaggedMovie(
            movie_id=movie_id, top_tags=tuple(pairs[: TaggedMovie.MAX_TAGS])
        )
    return Catalog(movies=movies, tags=tags)


def load_ratings(ratings_path: str | Path) -> tuple[list[RatingEvent], int]:
    """Load rating rows sorted by time; exact (user, movie) duplicates keep
    the latest row. Returns (events, deduplicated_row_count)."""
    ratings_path = Path(ratings_path)
    rows, lines = _read_rows(ratings_path)
    latest: dict[tuple[str, str], RatingEvent] = {}
    duplicates = 0
    for row, line in zip(rows, lines):
        user_id = (row.get("userId") or "").strip()
        movie_id = (row.get("movieId") or "").strip()
        if not user_id or not movie_id:
            raise MalformedRow(str(ratings_path), line, "userId and movieId required")
        try:
            score = float(row.get("rating") or "")
            timestamp = parse_instant(float(row.get("timestamp") or ""))
        except Exception as exc:
            raise MalformedRow(str(ratings_path), line, f"bad rating row: {exc}")
        try:
            event = validate_rating(
                RatingEvent(
                    user_id=user_id, movie_id=movie_id, score=score, timestamp=timestamp
                )
            )
        except Exception as exc:
            raise MalformedRow(str(ratings_path), line, str(exc))
        key = (user_id, movie_id)
        if key in latest:
            duplicates += 1
            if event.timestamp >= latest[key].timestamp:
                latest[key] = event
        else:
            latest[key] = event
    events = sorted(
        latest.values(), key=lambda e: (e.timestamp, e.user_id, e.movie_id)
    )
    return events, duplicates


@dataclass(frozen=True)
class QuartileSets:
    """Per-user liked / disliked / recent-liked movie sets with score cutoffs."""

    user_id: str
    liked_longterm: frozenset[str]
    disliked_longterm: frozenset[str]
    liked_recent: frozenset[str]
    top_cutoff: float
    bottom_cutoff: float

    @property
    def gap(self) -> float:
        return self.top_cutoff - self.bottom_cutoff

    @property
    def degenerate(self) -> bool:
        return self.gap <= 0


def _latest_per_movie(ratings: list[RatingEvent]) -> list[RatingEvent]:
    latest: dict[str, RatingEvent] = {}
    for event in ratings:
        prior = latest.get(event.movie_id)
        if prior is None or event.timestamp >= prior.timestamp:
            latest[event.movie_id] = event
    return list(latest.values())


def _take_quartile(ratings: list[RatingEvent], highest: bool) -> list[RatingEvent]:
    size = math.ceil(0.25 * len(ratings))
    sign = -1.0 if highest else 1.0
    ordered = sorted(
        ratings,
        key=lambda e: (sign * e.score, -e.timestamp.timestamp(), e.movie_id),
    )
    return ordered[:size]


def extract_quartiles(
    ratings: list[RatingEvent], reference_date: datetime
) -> QuartileSets:
    """Compute top/bottom 25% sets over full history and the trailing year.

    Quartile size is ceil(0.25 * n); ties at the cutoff break by more recent
    timestamp, then lexicographic movie id. Only the latest rating per movie
    enters the computation.
    """
    if not ratings:
        raise EmptyHistory("user has no ratings")
    user_id = ratings[0].user_id
    deduped = _latest_per_movie(ratings)

    liked = _take_quartile(deduped, highest=True)
    disliked = _take_quartile(deduped, highest=False)

    window_start = reference_date - RECENT_WINDOW
    recent_pool = [
        e for e in deduped if window_start < e.timestamp <= reference_date
    ]
    recent = _take_quartile(recent_pool, highest=True) if recent_pool else []

    return QuartileSets(
        user_id=user_id,
        liked_longterm=frozenset(e.movie_id for e in liked),
        disliked_longterm=frozenset(e.movie_id for e in disliked),
        liked_recent=frozenset(e.movie_id for e in recent),
        top_cutoff=min(e.score for e in liked),
        bottom_cutoff=max(e.score for e in disliked),
    )


def group_by_user(events: list[RatingEvent]) -> dict[str, list[RatingEvent]]:
    grouped: dict[str, list[RatingEvent]] = {}
    for event in events:
        grouped.setdefault(event.user_id, []).append(event)
    return grouped


def quartile_gap_report(all_users: dict[str, QuartileSets]) -> str:
    """CSV of per-user quartile cutoffs, one row per user sorted by id."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["user_id", "top_cutoff", "bottom_cutoff"])
    for user_id in sorted(all_users):
        q = all_users[user_id]
        writer.writerow([user_id, q.top_cutoff, q.bottom_cutoff])
    return buffer.getvalue()


def default_reference_date(events: list[RatingEvent]) -> datetime:
    """Latest timestamp in the data; lets historical dumps replay identically."""
    if not events:
        raise EmptyHistory("no rating events to infer a reference date from")
    return max(e.timestamp for e in events)


__all__ = [
    "Catalog",
    "DanglingTagReference",
    "EmptyHistory",
    "IngestError",
    "MalformedRow",
    "MissingFile",
    "QuartileSets",
    "default_reference_date",
    "extract_quartiles",
    "format_instant",
    "group_by_user",
    "load_catalog",
    "load_ratings",
    "quartile_gap_report",
]
