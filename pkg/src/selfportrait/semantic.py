"""Embedding providers, cosine similarity, and tag-topic clustering.

The clustering is a deterministic stand-in for a heavyweight topic model:
average-linkage agglomerative clustering over cosine distance, capped at a
small number of interest groups per user.
"""
from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .domain import EmbeddingVector

DEFAULT_MAX_CLUSTERS = 5
# Merges below 5 clusters continue only while this linkage distance holds.
LINKAGE_CUTOFF = 0.6


class SemanticError(Exception):
    pass


class DimensionMismatch(SemanticError):
    pass


class ZeroVector(SemanticError):
    pass


class EmptyInput(SemanticError):
    pass


class ProviderFailure(SemanticError):
    """Raised when an embedding or summary provider call fails."""


class EmbeddingProvider(Protocol):
    """Deterministic per instance: identical text must yield identical vectors."""

    dimension: int

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Standard cosine similarity in [-1, 1]; symmetric in its arguments."""
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"dimensions differ: {a.dimension} vs {b.dimension}")
    va = np.asarray(a.values)
    vb = np.asarray(b.values)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for all-zero vectors")
    value = float(np.dot(va, vb) / (na * nb))
    return max(-1.0, min(1.0, value))


def normalize_text(text: str) -> str:
    """Lowercase and collapse whitespace; the collision key for embeddings."""
    return " ".join(text.lower().split())


_EDGE_PUNCT = re.compile(r"^\W+|\W+$")


def _tokens(text: str) -> list[str]:
    toks = []
    for raw in normalize_text(text).split(" "):
        tok = _EDGE_PUNCT.sub("", raw)
        if tok:
            toks.append(tok)
    return toks


class MockEmbeddingProvider:
    """Offline deterministic embeddings from seeded token hashes.

    Each token maps to a fixed pseudo-random unit vector; a text embeds as the
    normalized sum of its token vectors. Identical normalized texts collide by
    construction, texts sharing words land close, and unrelated texts are
    near-orthogonal at moderate dimension.
    """

    def __init__(self, dimension: int = 64, seed: int = 0):
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        self.dimension = dimension
        self.seed = seed
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}\x1f{token}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            vec = rng.standard_normal(self.dimension)
            vec /= np.linalg.norm(vec)
            self._token_cache[token] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out = []
        for text in texts:
            toks = _tokens(text)
            if toks:
                total = np.sum([self._token_vector(t) for t in toks], axis=0)
                norm = float(np.linalg.norm(total))
            else:
                total, norm = None, 0.0
            if norm < 1e-12:
                # Degenerate token sum; fall back to hashing the whole text.
                digest = hashlib.sha256(
                    f"{self.seed}\x1e{normalize_text(text)}".encode()
                ).digest()
                rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
                total = rng.standard_normal(self.dimension)
                norm = float(np.linalg.norm(total))
            out.append(EmbeddingVector(values=tuple((total / norm).tolist())))
        return out


def mock_provider(dimension: int = 64, seed: int = 0) -> MockEmbeddingProvider:
    return MockEmbeddingProvider(dimension=dimension, seed=seed)


class HttpEmbeddingProvider:
    """Text-embedding client for an OpenAI-compatible /embeddings endpoint.

    Never exercised by the test suite; selected via runtime config only.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        dimension: int,
        api_key_env: str = "SELFPORTRAIT_API_KEY",
        timeout: float = 30.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dimension = dimension
        self.api_key_env = api_key_env
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        import httpx

        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = httpx.post(
                f"{self.base_url}/embeddings",
                json={"model": self.model, "input": list(texts)},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
        except Exception as exc:
            raise ProviderFailure(f"embedding request failed: {exc}") from exc
        vectors = sorted(payload["data"], key=lambda item: item["index"])
        return [EmbeddingVector(values=tuple(v["embedding"])) for v in vectors]


@dataclass(frozen=True)
class InterestCluster:
    """A group of semantically close tags with its centroid and label terms."""

    member_tags: tuple[tuple[str, str], ...]  # (tag text, source movie_id)
    centroid: EmbeddingVector
    top_terms: tuple[str, ...]
    polarity: str = "liked"
    cluster_id: str = ""

    def __post_init__(self) -> None:
        if not self.member_tags:
            raise EmptyInput("cluster must have members")
        member_texts = {text for text, _ in self.member_tags}
        if not set(self.top_terms) <= member_texts:
            raise SemanticError("top_terms must be member tag texts")


def _pairwise_cosine_distance(points: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    unit = points / norms
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    return 1.0 - sims


def cluster_tags(
    tags: Sequence[tuple[str, str]],
    provider: EmbeddingProvider,
    max_clusters: int = DEFAULT_MAX_CLUSTERS,
    polarity: str = "liked",
) -> list[InterestCluster]:
    """Partition (tag text, movie_id) pairs into at most ``max_clusters`` groups.

    Identical normalized texts are collapsed into weighted points first; the
    merge loop is unweighted-average linkage (UPGMA) over cosine distance.
    Merging is unconditional while more than ``max_clusters`` groups remain,
    then continues only while the next linkage distance stays within
    LINKAGE_CUTOFF. Output is ordered by descending member count.
    """
    if not tags:
        raise EmptyInput("no tags to cluster")
    if max_clusters < 1:
        raise ValueError("max_clusters must be >= 1")

    unique_keys: list[str] = []
    members_by_key: dict[str, list[tuple[str, str]]] = {}
    text_by_key: dict[str, str] = {}
    for text, movie_id in tags:
        key = normalize_text(text)
        if key not in members_by_key:
            unique_keys.append(key)
            members_by_key[key] = []
            text_by_key[key] = text
        members_by_key[key].append((text, movie_id))

    vectors = provider.embed([text_by_key[k] for k in unique_keys])
    dim = vectors[0].dimension
    if any(v.dimension != dim for v in vectors):
        raise DimensionMismatch("provider returned mixed dimensions")
    points = np.asarray([v.values for v in vectors], dtype=float)

    # Cluster state over unique points; sizes count original tag pairs so the
    # UPGMA average weights duplicates exactly as if never collapsed.
    clusters: list[list[int]] = [[i] for i in range(len(unique_keys))]
    sizes = [len(members_by_key[k]) for k in unique_keys]
    dist = _pairwise_cosine_distance(points)

    def next_merge() -> tuple[float, int, int]:
        best = (float("inf"), -1, -1)
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                d = dist[i, j]
                if d < best[0] - 1e-15:
                    best = (d, i, j)
        return best

    while len(clusters) > 1:
        d, i, j = next_merge()
        if len(clusters) <= max_clusters and d > LINKAGE_CUTOFF:
            break
        # Lance-Williams update for average linkage.
        ni, nj = sizes[i], sizes[j]
        merged_row = (ni * dist[i, :] + nj * dist[j, :]) / (ni + nj)
        dist[i, :] = merged_row
        dist[:, i] = merged_row
        dist[i, i] = 0.0
        dist = np.delete(np.delete(dist, j, axis=0), j, axis=1)
        clusters[i] = clusters[i] + clusters[j]
        sizes[i] = ni + nj
        del clusters[j]
        del sizes[j]

    order = sorted(
        range(len(clusters)), key=lambda c: (-sizes[c], min(clusters[c]))
    )
    out: list[InterestCluster] = []
    for rank, c in enumerate(order):
        member_pairs: list[tuple[str, str]] = []
        weighted = np.zeros(dim)
        count = 0
        for point_idx in sorted(clusters[c]):
            key = unique_keys[point_idx]
            pairs = members_by_key[key]
            member_pairs.extend(pairs)
            weighted += points[point_idx] * len(pairs)
            count += len(pairs)
        centroid = EmbeddingVector(values=tuple((weighted / count).tolist()))
        point_idxs = sorted(clusters[c])
        scored = []
        for point_idx in point_idxs:
            sim = cosine(vectors[point_idx], centroid)
            scored.append((-sim, unique_keys[point_idx], text_by_key[unique_keys[point_idx]]))
        scored.sort()
        top_terms = tuple(text for _, _, text in scored[:5])
        out.append(
            InterestCluster(
                member_tags=tuple(member_pairs),
                centroid=centroid,
                top_terms=top_terms,
                polarity=polarity,
                cluster_id=f"{polarity}-{rank}",
            )
        )
    return out
