"""Shared domain types: movies, ratings, tags, embeddings, and portraits.

All types are immutable value objects, safe to share across threads. Ids are
opaque strings so catalogs other than MovieLens dumps can be ingested.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any

MIN_RELEASE_YEAR = 1870
MIN_SCORE = 0.5
MAX_SCORE = 5.0


class DomainError(Exception):
    """Base class for all domain-level validation failures."""


class ScoreOffGrid(DomainError):
    """Rating score is not on the half-point grid in [0.5, 5.0]."""


class BadTimestamp(DomainError):
    """Timestamp is missing, unparseable, or not timezone-aware UTC."""


class Author(str, Enum):
    AI = "ai"
    USER = "user"
    MERGED = "merged"


class Section(str, Enum):
    RECENT = "recent"
    LIKED = "liked"
    DISLIKED = "disliked"


def parse_instant(value: Any) -> datetime:
    """Parse an ISO-8601 string, epoch seconds, or datetime into aware UTC."""
    if isinstance(value, datetime):
        if value.tzinfo is None:
            raise BadTimestamp(f"naive datetime not allowed: {value!r}")
        return value.astimezone(timezone.utc)
    if isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise BadTimestamp(f"non-finite epoch value: {value!r}")
        return datetime.fromtimestamp(value, tz=timezone.utc)
    if isinstance(value, str):
        text = value.strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        try:
            parsed = datetime.fromisoformat(text)
        except ValueError as exc:
            raise BadTimestamp(f"unparseable timestamp: {value!r}") from exc
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=timezone.utc)
        return parsed.astimezone(timezone.utc)
    raise BadTimestamp(f"unsupported timestamp value: {value!r}")


def format_instant(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class MovieRecord:
    movie_id: str
    title: str
    genres: tuple[str, ...]
    actors: tuple[str, ...] = ()
    directors: tuple[str, ...] = ()
    language: str = "(unknown)"
    release_year: int | None = None
    popularity: float = 0.0

    def __post_init__(self) -> None:
        if not self.movie_id:
            raise DomainError("movie_id must be non-empty")
        if not self.genres:
            object.__setattr__(self, "genres", ("(no genres listed)",))
        if self.release_year is not None:
            upper = datetime.now(timezone.utc).year + 2
            if not MIN_RELEASE_YEAR <= self.release_year <= upper:
                raise DomainError(
                    f"release_year {self.release_year} outside [{MIN_RELEASE_YEAR}, {upper}]"
                )
        if self.popularity < 0:
            raise DomainError("popularity must be nonnegative")

    def with_popularity(self, popularity: float) -> "MovieRecord":
        return replace(self, popularity=popularity)

    def to_json(self) -> dict:
        return {
            "movie_id": self.movie_id,
            "title": self.title,
            "genres": list(self.genres),
            "actors": list(self.actors),
            "directors": list(self.directors),
            "language": self.language,
            "release_year": self.release_year,
            "popularity": self.popularity,
        }

    @classmethod
    def from_json(cls, data: dict) -> "MovieRecord":
        return cls(
            movie_id=data["movie_id"],
            title=data["title"],
            genres=tuple(data["genres"]),
            actors=tuple(data.get("actors", ())),
            directors=tuple(data.get("directors", ())),
            language=data.get("language", "(unknown)"),
            release_year=data.get("release_year"),
            popularity=data.get("popularity", 0.0),
        )


def _score_on_grid(score: float) -> bool:
    if not (MIN_SCORE <= score <= MAX_SCORE):
        return False
    doubled = score * 2
    return abs(doubled - round(doubled)) < 1e-9


@dataclass(frozen=True)
class RatingEvent:
    user_id: str
    movie_id: str
    score: float
    timestamp: datetime

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "movie_id": self.movie_id,
            "score": self.score,
            "timestamp": format_instant(self.timestamp),
        }

    @classmethod
    def from_json(cls, data: dict) -> "RatingEvent":
        return cls(
            user_id=data["user_id"],
            movie_id=data["movie_id"],
            score=float(data["score"]),
            timestamp=parse_instant(data["timestamp"]),
        )


# A rating that passed validate_rating(); no extra structure is needed.
ValidatedRatingEvent = RatingEvent


def validate_rating(event: RatingEvent) -> ValidatedRatingEvent:
    """Accept a rating iff its score sits on the half-point grid.

    Raises ScoreOffGrid or BadTimestamp; returns the event unchanged otherwise.
    """
    if not isinstance(event.timestamp, datetime) or event.timestamp.tzinfo is None:
        raise BadTimestamp(f"rating for {event.movie_id} has no usable timestamp")
    if not _score_on_grid(event.score):
        raise ScoreOffGrid(
            f"score {event.score} not on the half-point grid [{MIN_SCORE}, {MAX_SCORE}]"
        )
    return event


@dataclass(frozen=True)
class TaggedMovie:
    """Top community tags for one movie, sorted by descending relevance."""

    movie_id: str
    top_tags: tuple[tuple[str, float], ...] = ()

    MAX_TAGS = 10

    def __post_init__(self) -> None:
        if len(self.top_tags) > self.MAX_TAGS:
            raise DomainError(f"{self.movie_id}: more than {self.MAX_TAGS} tags")
        relevances = [rel for _, rel in self.top_tags]
        if any(not 0.0 <= rel <= 1.0 for rel in relevances):
            raise DomainError(f"{self.movie_id}: tag relevance outside [0, 1]")
        if relevances != sorted(relevances, reverse=True):
            raise DomainError(f"{self.movie_id}: tags not sorted by relevance")

    def to_json(self) -> dict:
        return {"movie_id": self.movie_id, "top_tags": [list(t) for t in self.top_tags]}

    @classmethod
    def from_json(cls, data: dict) -> "TaggedMovie":
        return cls(
            movie_id=data["movie_id"],
            top_tags=tuple((t, float(r)) for t, r in data.get("top_tags", ())),
        )


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-dimension real vector; all entries finite, dimension >= 2."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) < 2:
            raise DomainError("embedding dimension must be >= 2")
        if any(not math.isfinite(v) for v in self.values):
            raise DomainError("embedding entries must be finite")

    @property
    def dimension(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Portrait:
    """One version of a user's three-section interest self-portrait."""

    user_id: str
    recent_summary: str
    liked_summary: str
    disliked_summary: str
    version: int
    generated_at: datetime
    author: Author = Author.AI

    def __post_init__(self) -> None:
        if self.version < 1:
            raise DomainError("portrait versions start at 1")

    def section_text(self, section: Section) -> str:
        return {
            Section.RECENT: self.recent_summary,
            Section.LIKED: self.liked_summary,
            Section.DISLIKED: self.disliked_summary,
        }[section]

    def with_section(
        self, section: Section, text: str, author: Author, generated_at: datetime
    ) -> "Portrait":
        updated = {
            Section.RECENT: "recent_summary",
            Section.LIKED: "liked_summary",
            Section.DISLIKED: "disliked_summary",
        }[section]
        return replace(
            self,
            **{updated: text},
            version=self.version + 1,
            author=author,
            generated_at=generated_at,
        )

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "recent_summary": self.recent_summary,
            "liked_summary": self.liked_summary,
            "disliked_summary": self.disliked_summary,
            "version": self.version,
            "generated_at": format_instant(self.generated_at),
            "author": self.author.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Portrait":
        return cls(
            user_id=data["user_id"],
            recent_summary=data["recent_summary"],
            liked_summary=data["liked_summary"],
            disliked_summary=data["disliked_summary"],
            version=int(data["version"]),
            generated_at=parse_instant(data["generated_at"]),
            author=Author(data["author"]),
        )


@dataclass(frozen=True)
class Catalog:
    """Loaded movie corpus: records plus per-movie community tags."""

    movies: dict[str, MovieRecord] = field(default_factory=dict)
    tags: dict[str, TaggedMovie] = field(default_factory=dict)

    def tagged(self, movie_id: str) -> TaggedMovie:
        return self.tags.get(movie_id, TaggedMovie(movie_id=movie_id))

    def with_popularity(self, rating_counts: dict[str, int]) -> "Catalog":
        movies = {
            mid: rec.with_popularity(float(rating_counts.get(mid, 0)))
            for mid, rec in self.movies.items()
        }
        return Catalog(movies=movies, tags=self.tags)

    def to_json(self) -> dict:
        return {
            "movies": [self.movies[mid].to_json() for mid in sorted(self.movies)],
            "tags": [self.tags[mid].to_json() for mid in sorted(self.tags)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Catalog":
        movies = {m["movie_id"]: MovieRecord.from_json(m) for m in data["movies"]}
        tags = {t["movie_id"]: TaggedMovie.from_json(t) for t in data["tags"]}
        return cls(movies=movies, tags=tags)
