"""Portrait text generation: long-term cluster summaries with contrastive
filtering, the five-facet recent summary, and the regeneration trigger.

Prompts are rendered from editable template files; the deterministic mock
provider understands the rendered structure, so the whole pipeline runs
offline and reproducibly.
"""
from __future__ import annotations

import hashlib
import os
import time
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timedelta
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from .domain import MovieRecord, format_instant, parse_instant
from .semantic import DimensionMismatch, InterestCluster, ProviderFailure, cosine, normalize_text

CONTRASTIVE_THRESHOLD = 0.8
DISLIKED_PLACEHOLDER = "No strong dislikes detected yet."
FACET_ORDER = ("genres", "actors", "directors", "release_years", "languages")

LIKED_MARKER = "LIKED GROUP:"
DISLIKED_MARKER = "DISLIKED GROUP:"
FACET_MARKER = "FACET "


class SummarizeError(Exception):
    pass


class NoLikedClusters(SummarizeError):
    pass


class EmptyRecentSet(SummarizeError):
    pass


class ClockSkew(SummarizeError):
    pass


class SummaryProvider(Protocol):
    def complete(self, prompt: str) -> str: ...


class PromptLibrary:
    """Prompt templates from text files; defaults ship with the package."""

    def __init__(self, template_dir: str | Path | None = None):
        if template_dir is not None:
            base = Path(template_dir)
            self.longterm = (base / "longterm.txt").read_text(encoding="utf-8")
            self.recent = (base / "recent.txt").read_text(encoding="utf-8")
        else:
            pkg = resources.files("selfportrait").joinpath("prompts")
            self.longterm = pkg.joinpath("longterm.txt").read_text(encoding="utf-8")
            self.recent = pkg.joinpath("recent.txt").read_text(encoding="utf-8")


_DEFAULT_PROMPTS = None


def default_prompts() -> PromptLibrary:
    global _DEFAULT_PROMPTS
    if _DEFAULT_PROMPTS is None:
        _DEFAULT_PROMPTS = PromptLibrary()
    return _DEFAULT_PROMPTS


def _context_block(user_context: str | None) -> str:
    if not user_context or not user_context.strip():
        return ""
    return f"User previously wrote:\n{user_context.strip()}\n"


def render_longterm_prompt(
    clusters: Sequence[InterestCluster],
    user_context: str | None = None,
    prompts: PromptLibrary | None = None,
) -> str:
    lines = []
    for cluster in clusters:
        marker = LIKED_MARKER if cluster.polarity == "liked" else DISLIKED_MARKER
        lines.append(f"{marker} {'; '.join(cluster.top_terms)}")
    template = (prompts or default_prompts()).longterm
    return template.format(groups="\n".join(lines), context=_context_block(user_context))


def render_recent_prompt(
    facets: dict[str, list[tuple[str, int]]],
    user_context: str | None = None,
    prompts: PromptLibrary | None = None,
) -> str:
    lines = []
    for facet in FACET_ORDER:
        top3 = [value for value, _ in facets.get(facet, [])[:3]]
        lines.append(f"{FACET_MARKER}{facet}: {', '.join(top3)}")
    template = (prompts or default_prompts()).recent
    return template.format(facets="\n".join(lines), context=_context_block(user_context))


_FACET_SENTENCES = {
    "genres": "Lately you gravitate toward {values} films.",
    "actors": "Performances by {values} stand out in your recent picks.",
    "directors": "Work directed by {values} features prominently.",
    "release_years": "Most of your recent favorites come from {values}.",
    "languages": "You mostly watch movies in {values}.",
}


class MockSummaryProvider:
    """Template completions driven by the structured prompt lines.

    One sentence per interest group or facet row, always quoting the listed
    terms, so faithfulness holds by construction and output is deterministic.
    """

    @staticmethod
    def _terms(line: str, marker: str) -> str:
        return ", ".join(
            t.strip() for t in line[len(marker):].split(";") if t.strip()
        )

    def complete(self, prompt: str) -> str:
        sentences = []
        for raw in prompt.splitlines():
            line = raw.strip()
            if line.startswith(LIKED_MARKER):
                terms = self._terms(line, LIKED_MARKER)
                sentences.append(f"Movies featuring {terms} appeal to you.")
            elif line.startswith(DISLIKED_MARKER):
                terms = self._terms(line, DISLIKED_MARKER)
                sentences.append(f"Movies featuring {terms} are generally not favored.")
            elif line.startswith(FACET_MARKER):
                name, _, values = line[len(FACET_MARKER):].partition(":")
                template = _FACET_SENTENCES.get(name.strip())
                if template:
                    sentences.append(template.format(values=values.strip()))
        if not sentences:
            return "Nothing to summarize yet."
        return " ".join(sentences)


class HttpSummaryProvider:
    """Chat-completion client (OpenAI-compatible); config-selected, never
    required by tests."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "SELFPORTRAIT_API_KEY",
        timeout: float = 60.0,
        retries: int = 2,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retries = retries

    def complete(self, prompt: str) -> str:
        import httpx

        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = httpx.post(
                    f"{self.base_url}/chat/completions",
                    json=body,
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                text = resp.json()["choices"][0]["message"]["content"].strip()
                if not text:
                    raise ProviderFailure("provider returned empty completion")
                return text
            except Exception as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(min(2.0**attempt, 8.0))
        raise ProviderFailure(f"completion failed: {last_error}") from last_error


def contrastive_filter(
    liked: Sequence[InterestCluster],
    disliked: Sequence[InterestCluster],
    threshold: float = CONTRASTIVE_THRESHOLD,
) -> list[InterestCluster]:
    """Drop disliked clusters whose centroid is too close to any liked one.

    The bound is inclusive: a disliked cluster at cosine exactly ``threshold``
    is removed.
    """
    survivors = []
    for cluster in disliked:
        if all(cosine(cluster.centroid, pos.centroid) < threshold for pos in liked):
            survivors.append(cluster)
    return survivors


def generate_longterm(
    clusters_liked: Sequence[InterestCluster],
    clusters_disliked: Sequence[InterestCluster],
    provider: SummaryProvider,
    user_context: str | None = None,
    prompts: PromptLibrary | None = None,
) -> tuple[str, str]:
    """One sentence per liked cluster and per surviving disliked cluster.

    When every disliked cluster is filtered out, the disliked section falls
    back to a fixed placeholder so the three-panel layout stays stable.
    """
    if not clusters_liked:
        raise NoLikedClusters("long-term generation needs at least one liked cluster")
    liked_prompt = render_longterm_prompt(clusters_liked, user_context, prompts)
    liked_summary = provider.complete(liked_prompt)
    if not liked_summary.strip():
        raise ProviderFailure("provider returned empty liked summary")

    surviving = contrastive_filter(clusters_liked, clusters_disliked)
    if surviving:
        disliked_prompt = render_longterm_prompt(surviving, user_context, prompts)
        disliked_summary = provider.complete(disliked_prompt)
        if not disliked_summary.strip():
            raise ProviderFailure("provider returned empty disliked summary")
    else:
        disliked_summary = DISLIKED_PLACEHOLDER
    return liked_summary, disliked_summary


def facet_table(movies: Sequence[MovieRecord]) -> dict[str, list[tuple[str, int]]]:
    """Value frequencies for the five facets, ordered by count then value."""
    counters: dict[str, Counter] = {facet: Counter() for facet in FACET_ORDER}
    for movie in movies:
        counters["genres"].update(movie.genres)
        counters["actors"].update(movie.actors)
        counters["directors"].update(movie.directors)
        year = str(movie.release_year) if movie.release_year else "(unknown)"
        counters["release_years"][year] += 1
        counters["languages"][movie.language] += 1
    return {
        facet: sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
        for facet, counter in counters.items()
    }


def generate_recent(
    recent_movies: Sequence[MovieRecord],
    provider: SummaryProvider,
    user_context: str | None = None,
    prompts: PromptLibrary | None = None,
) -> str:
    """Five-sentence summary over the top-3 values of each recent facet."""
    if not recent_movies:
        raise EmptyRecentSet("no recent highly-rated movies to summarize")
    facets = facet_table(recent_movies)
    prompt = render_recent_prompt(facets, user_context, prompts)
    text = provider.complete(prompt)
    if not text.strip():
        raise ProviderFailure("provider returned empty recent summary")
    return text


@dataclass(frozen=True)
class RegenerationPolicy:
    fraction_threshold: float = 0.10
    absolute_threshold: int = 10
    cadence: timedelta = timedelta(days=1)

    def __post_init__(self) -> None:
        if self.fraction_threshold <= 0 or self.absolute_threshold <= 0:
            raise ValueError("regeneration thresholds must be positive")
        if self.cadence <= timedelta(0):
            raise ValueError("cadence must be positive")


@dataclass(frozen=True)
class GenerationRecord:
    user_id: str
    portrait_version: int
    input_cluster_ids: tuple[str, ...]
    ratings_count_at_generation: int
    user_context: str | None
    prompt_hash: str
    generated_at: datetime

    def __post_init__(self) -> None:
        if self.ratings_count_at_generation < 0:
            raise ValueError("ratings_count_at_generation must be >= 0")

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "portrait_version": self.portrait_version,
            "input_cluster_ids": list(self.input_cluster_ids),
            "ratings_count_at_generation": self.ratings_count_at_generation,
            "user_context": self.user_context,
            "prompt_hash": self.prompt_hash,
            "generated_at": format_instant(self.generated_at),
        }

    @classmethod
    def from_json(cls, data: dict) -> "GenerationRecord":
        return cls(
            user_id=data["user_id"],
            portrait_version=int(data["portrait_version"]),
            input_cluster_ids=tuple(data.get("input_cluster_ids", ())),
            ratings_count_at_generation=int(data["ratings_count_at_generation"]),
            user_context=data.get("user_context"),
            prompt_hash=data["prompt_hash"],
            generated_at=parse_instant(data["generated_at"]),
        )


def prompt_hash(*prompt_texts: str) -> str:
    digest = hashlib.sha256()
    for text in prompt_texts:
        digest.update(text.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


def should_regenerate(
    record: GenerationRecord,
    current_rating_count: int,
    policy: RegenerationPolicy,
    now: datetime,
    last_check: datetime,
) -> bool:
    """True iff the cadence elapsed and the rating delta clears either the
    absolute threshold or the fractional one.

    The fractional comparison is exact (rational arithmetic), so e.g. a delta
    of 7 on a base of 70 fires at a 10% threshold despite float rounding.
    """
    if now < last_check:
        raise ClockSkew(f"now {now} precedes last check {last_check}")
    if current_rating_count < record.ratings_count_at_generation:
        raise ValueError("current rating count below count at generation")
    if now - last_check < policy.cadence:
        return False
    delta = current_rating_count - record.ratings_count_at_generation
    if delta >= policy.absolute_threshold:
        return True
    fraction = Fraction(str(policy.fraction_threshold))
    return Fraction(delta) >= fraction * record.ratings_count_at_generation


def faithfulness_check(summary_sentence: str, cluster: InterestCluster) -> bool:
    """A sentence is faithful iff it quotes at least one cluster top term
    (case-insensitive, whitespace-normalized substring)."""
    haystack = normalize_text(summary_sentence)
    return any(normalize_text(term) in haystack for term in cluster.top_terms)


__all__ = [
    "CONTRASTIVE_THRESHOLD",
    "DISLIKED_PLACEHOLDER",
    "ClockSkew",
    "DimensionMismatch",
    "EmptyRecentSet",
    "FACET_ORDER",
    "GenerationRecord",
    "HttpSummaryProvider",
    "MockSummaryProvider",
    "NoLikedClusters",
    "PromptLibrary",
    "ProviderFailure",
    "RegenerationPolicy",
    "SummaryProvider",
    "contrastive_filter",
    "facet_table",
    "faithfulness_check",
    "generate_longterm",
    "generate_recent",
    "prompt_hash",
    "render_longterm_prompt",
    "render_recent_prompt",
    "should_regenerate",
]
