"""User edit recording and classification.

Edits are compared to the text they replaced with embedding cosine
similarity and bucketed into three classes: retained (>= 0.95), reworded
([0.60, 0.95)), and pruned (< 0.60). Bands are half-open with the upper band
winning, so every similarity in [-1, 1] maps to exactly one class.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum

from .domain import Section, format_instant, parse_instant
from .semantic import EmbeddingProvider, cosine

RETAINED_MIN = 0.95
REWORDED_MIN = 0.60


class EditClass(str, Enum):
    RETAINED = "retained"
    REWORDED = "reworded"
    PRUNED = "pruned"


def classify_similarity(similarity: float) -> EditClass:
    if similarity >= RETAINED_MIN:
        return EditClass.RETAINED
    if similarity >= REWORDED_MIN:
        return EditClass.REWORDED
    return EditClass.PRUNED


# Good enough for short machine-generated summaries; abbreviations with
# trailing periods will over-split.
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    parts = _SENTENCE_BREAK.split(text.strip())
    return [p.strip() for p in parts if p.strip()]


def classify(
    before: str, after: str, provider: EmbeddingProvider
) -> tuple[EditClass, float]:
    """Classify a whole-section edit; deleting everything counts as pruned."""
    if not before.strip():
        raise ValueError("before-text must be non-empty")
    if not after.strip():
        return EditClass.PRUNED, 0.0
    vec_before, vec_after = provider.embed([before, after])
    similarity = cosine(vec_before, vec_after)
    return classify_similarity(similarity), similarity


@dataclass(frozen=True)
class SentenceClass:
    before_sentence: str
    matched_after_sentence: str | None
    edit_class: EditClass
    similarity: float

    def to_json(self) -> dict:
        return {
            "before": self.before_sentence,
            "after": self.matched_after_sentence,
            "class": self.edit_class.value,
            "similarity": self.similarity,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SentenceClass":
        return cls(
            before_sentence=data["before"],
            matched_after_sentence=data.get("after"),
            edit_class=EditClass(data["class"]),
            similarity=float(data["similarity"]),
        )


def classify_sentences(
    before: str, after: str, provider: EmbeddingProvider
) -> list[SentenceClass]:
    """Greedy max-cosine matching of before-sentences to after-sentences.

    Pairs are claimed in descending similarity order, each after-sentence used
    at most once; unmatched before-sentences are pruned. Verbatim-equal
    sentences always match regardless of ordering, so shuffling sentence order
    without changing text yields all-retained.
    """
    before_sentences = split_sentences(before)
    if not before_sentences:
        raise ValueError("before-text must contain at least one sentence")
    after_sentences = split_sentences(after)

    results: dict[int, SentenceClass] = {}
    if after_sentences:
        vectors = provider.embed(before_sentences + after_sentences)
        before_vecs = vectors[: len(before_sentences)]
        after_vecs = vectors[len(before_sentences):]
        pairs = []
        for i, bv in enumerate(before_vecs):
            for j, av in enumerate(after_vecs):
                pairs.append((-cosine(bv, av), i, j))
        pairs.sort()
        used_before: set[int] = set()
        used_after: set[int] = set()
        for neg_sim, i, j in pairs:
            if i in used_before or j in used_after:
                continue
            used_before.add(i)
            used_after.add(j)
            similarity = -neg_sim
            results[i] = SentenceClass(
                before_sentence=before_sentences[i],
                matched_after_sentence=after_sentences[j],
                edit_class=classify_similarity(similarity),
                similarity=similarity,
            )

    ordered = []
    for i, sentence in enumerate(before_sentences):
        if i in results:
            ordered.append(results[i])
        else:
            ordered.append(
                SentenceClass(
                    before_sentence=sentence,
                    matched_after_sentence=None,
                    edit_class=EditClass.PRUNED,
                    similarity=0.0,
                )
            )
    return ordered


@dataclass(frozen=True)
class EditRecord:
    """One saved edit; records are append-only and never mutated."""

    user_id: str
    section: Section
    base_version: int
    before_text: str
    after_text: str
    timestamp: datetime
    summary_class: EditClass
    summary_similarity: float
    sentence_classes: tuple[SentenceClass, ...]

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "section": self.section.value,
            "base_version": self.base_version,
            "before_text": self.before_text,
            "after_text": self.after_text,
            "timestamp": format_instant(self.timestamp),
            "summary_class": self.summary_class.value,
            "summary_similarity": self.summary_similarity,
            "sentence_classes": [s.to_json() for s in self.sentence_classes],
        }

    @classmethod
    def from_json(cls, data: dict) -> "EditRecord":
        return cls(
            user_id=data["user_id"],
            section=Section(data["section"]),
            base_version=int(data["base_version"]),
            before_text=data["before_text"],
            after_text=data["after_text"],
            timestamp=parse_instant(data["timestamp"]),
            summary_class=EditClass(data["summary_class"]),
            summary_similarity=float(data["summary_similarity"]),
            sentence_classes=tuple(
                SentenceClass.from_json(s) for s in data.get("sentence_classes", ())
            ),
        )


def build_edit_record(
    user_id: str,
    section: Section,
    base_version: int,
    before: str,
    after: str,
    timestamp: datetime,
    provider: EmbeddingProvider,
) -> EditRecord:
    summary_class, similarity = classify(before, after, provider)
    return EditRecord(
        user_id=user_id,
        section=section,
        base_version=base_version,
        before_text=before,
        after_text=after,
        timestamp=timestamp,
        summary_class=summary_class,
        summary_similarity=similarity,
        sentence_classes=tuple(classify_sentences(before, after, provider)),
    )


def week_index(timestamp: datetime, experiment_start: datetime) -> int:
    """1-based seven-day bucket offset from the experiment start."""
    if timestamp < experiment_start:
        raise ValueError("edit precedes experiment start")
    return int((timestamp - experiment_start) // timedelta(days=7)) + 1


def weekly_edit_series(
    edits: list[EditRecord], experiment_start: datetime
) -> list[tuple[int, str, str, int]]:
    """Counts of edits per (week, section, summary class), sorted."""
    counts: dict[tuple[int, str, str], int] = {}
    for edit in edits:
        key = (
            week_index(edit.timestamp, experiment_start),
            edit.section.value,
            edit.summary_class.value,
        )
        counts[key] = counts.get(key, 0) + 1
    return [(w, s, c, n) for (w, s, c), n in sorted(counts.items())]
