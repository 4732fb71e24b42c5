from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from selfportrait.domain import (
    Catalog,
    EmbeddingVector,
    MovieRecord,
    RatingEvent,
    TaggedMovie,
)
from selfportrait.semantic import mock_provider

T0 = datetime(2025, 3, 29, tzinfo=timezone.utc)


class OrthogonalProvider:
    """Test-only embedder: every distinct normalized text gets its own basis
    vector, so intra-text cosine is exactly 1 and inter-text exactly 0."""

    def __init__(self, dimension: int = 16):
        self.dimension = dimension
        self._index: dict[str, int] = {}

    def embed(self, texts):
        out = []
        for text in texts:
            key = " ".join(text.lower().split())
            if key not in self._index:
                if len(self._index) >= self.dimension:
                    raise ValueError("orthogonal provider dimension exhausted")
                self._index[key] = len(self._index)
            values = [0.0] * self.dimension
            values[self._index[key]] = 1.0
            out.append(EmbeddingVector(values=tuple(values)))
        return out


@pytest.fixture
def embedder():
    return mock_provider(dimension=64, seed=0)


@pytest.fixture
def orthogonal():
    return OrthogonalProvider()


def rating(user="u1", movie="m1", score=4.0, at=T0, days_ago=None):
    ts = at - timedelta(days=days_ago) if days_ago is not None else at
    return RatingEvent(user_id=user, movie_id=movie, score=score, timestamp=ts)


def unit_vector(values) -> EmbeddingVector:
    arr = np.asarray(values, dtype=float)
    return EmbeddingVector(values=tuple((arr / np.linalg.norm(arr)).tolist()))


def make_movie(movie_id, **kwargs) -> MovieRecord:
    defaults = dict(
        title=f"Movie {movie_id} (1999)",
        genres=("Drama",),
        actors=(),
        directors=(),
        language="English",
        release_year=1999,
    )
    defaults.update(kwargs)
    return MovieRecord(movie_id=movie_id, **defaults)


def make_catalog(movie_tags: dict[str, list[str]], **movie_kwargs) -> Catalog:
    movies = {}
    tags = {}
    for movie_id, tag_texts in movie_tags.items():
        movies[movie_id] = make_movie(movie_id, **movie_kwargs.get(movie_id, {}))
        pairs = tuple((t, round(1.0 - 0.05 * i, 2)) for i, t in enumerate(tag_texts))
        tags[movie_id] = TaggedMovie(movie_id=movie_id, top_tags=pairs)
    return Catalog(movies=movies, tags=tags)
