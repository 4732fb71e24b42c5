"""End-to-end portrait generation for one user: quartile sets, tag
clustering, contrastive filtering, and the three section summaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

from .domain import Author, Catalog, Portrait, RatingEvent
from .ingest import QuartileSets, extract_quartiles
from .semantic import EmbeddingProvider, InterestCluster, cluster_tags
from .summarize import (
    GenerationRecord,
    PromptLibrary,
    SummaryProvider,
    contrastive_filter,
    facet_table,
    generate_longterm,
    generate_recent,
    prompt_hash,
    render_longterm_prompt,
    render_recent_prompt,
)

NO_LONGTERM_PLACEHOLDER = "Not enough tagged history for a long-term summary yet."
NO_RECENT_PLACEHOLDER = "No recent activity to summarize yet."


@dataclass(frozen=True)
class GenerationOutcome:
    portrait: Portrait
    record: GenerationRecord
    quartiles: QuartileSets
    clusters_liked: list[InterestCluster]
    clusters_disliked_surviving: list[InterestCluster]


def tags_for_movies(catalog: Catalog, movie_ids: frozenset[str]) -> list[tuple[str, str]]:
    """(tag text, movie id) pairs in deterministic movie-then-relevance order."""
    pairs = []
    for movie_id in sorted(movie_ids):
        for tag, _ in catalog.tagged(movie_id).top_tags:
            pairs.append((tag, movie_id))
    return pairs


def generate_portrait(
    user_id: str,
    ratings: list[RatingEvent],
    catalog: Catalog,
    embedder: EmbeddingProvider,
    summarizer: SummaryProvider,
    reference_date: datetime,
    version: int = 1,
    user_context: str | None = None,
    prompts: PromptLibrary | None = None,
    author: Author = Author.AI,
) -> GenerationOutcome:
    """Build one portrait version plus its provenance record.

    ``generated_at`` is pinned to ``reference_date`` so batch runs replay
    byte-identically regardless of wall clock or worker count.
    """
    quartiles = extract_quartiles(ratings, reference_date)

    prompts_issued: list[str] = []

    liked_tags = tags_for_movies(catalog, quartiles.liked_longterm)
    disliked_tags = tags_for_movies(catalog, quartiles.disliked_longterm)
    clusters_liked: list[InterestCluster] = []
    clusters_disliked: list[InterestCluster] = []
    if liked_tags:
        clusters_liked = cluster_tags(liked_tags, embedder, polarity="liked")
    if disliked_tags:
        clusters_disliked = cluster_tags(disliked_tags, embedder, polarity="disliked")

    if clusters_liked:
        surviving = contrastive_filter(clusters_liked, clusters_disliked)
        liked_summary, disliked_summary = generate_longterm(
            clusters_liked,
            clusters_disliked,
            summarizer,
            user_context=user_context,
            prompts=prompts,
        )
        prompts_issued.append(
            render_longterm_prompt(clusters_liked, user_context, prompts)
        )
        if surviving:
            prompts_issued.append(
                render_longterm_prompt(surviving, user_context, prompts)
            )
    else:
        surviving = []
        liked_summary = NO_LONGTERM_PLACEHOLDER
        disliked_summary = NO_LONGTERM_PLACEHOLDER

    recent_movies = [
        catalog.movies[m]
        for m in sorted(quartiles.liked_recent)
        if m in catalog.movies
    ]
    if recent_movies:
        recent_summary = generate_recent(
            recent_movies, summarizer, user_context=user_context, prompts=prompts
        )
        prompts_issued.append(
            render_recent_prompt(facet_table(recent_movies), user_context, prompts)
        )
    else:
        recent_summary = NO_RECENT_PLACEHOLDER

    portrait = Portrait(
        user_id=user_id,
        recent_summary=recent_summary,
        liked_summary=liked_summary,
        disliked_summary=disliked_summary,
        version=version,
        generated_at=reference_date,
        author=author,
    )
    record = GenerationRecord(
        user_id=user_id,
        portrait_version=version,
        input_cluster_ids=tuple(
            c.cluster_id for c in clusters_liked + clusters_disliked
        ),
        ratings_count_at_generation=len(ratings),
        user_context=user_context,
        prompt_hash=prompt_hash(*prompts_issued),
        generated_at=reference_date,
    )
    return GenerationOutcome(
        portrait=portrait,
        record=record,
        quartiles=quartiles,
        clusters_liked=clusters_liked,
        clusters_disliked_surviving=surviving,
    )
