"""Runtime configuration from a TOML or JSON file plus environment secrets.

Secrets never live in the file itself: provider API keys are named by the
environment variable that holds them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from .semantic import HttpEmbeddingProvider, MockEmbeddingProvider
from .summarize import HttpSummaryProvider, MockSummaryProvider, RegenerationPolicy

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib


@dataclass
class ProviderConfig:
    kind: str = "mock"  # mock | http
    dimension: int = 64
    seed: int = 0
    base_url: str = ""
    model: str = ""
    api_key_env: str = "SELFPORTRAIT_API_KEY"
    timeout: float = 60.0
    retries: int = 2


@dataclass
class AppConfig:
    data_dir: str = "data"
    embedding: ProviderConfig = field(default_factory=ProviderConfig)
    summary: ProviderConfig = field(default_factory=ProviderConfig)
    regeneration_fraction: float = 0.10
    regeneration_absolute: int = 10
    regeneration_cadence_hours: float = 24.0
    session_gap_minutes: float = 30.0
    min_ratings: int = 20
    api_token: str | None = None
    prompt_dir: str | None = None

    @property
    def policy(self) -> RegenerationPolicy:
        return RegenerationPolicy(
            fraction_threshold=self.regeneration_fraction,
            absolute_threshold=self.regeneration_absolute,
            cadence=timedelta(hours=self.regeneration_cadence_hours),
        )

    @property
    def session_gap(self) -> timedelta:
        return timedelta(minutes=self.session_gap_minutes)

    def embedding_provider(self):
        if self.embedding.kind == "http":
            return HttpEmbeddingProvider(
                base_url=self.embedding.base_url,
                model=self.embedding.model,
                dimension=self.embedding.dimension,
                api_key_env=self.embedding.api_key_env,
                timeout=self.embedding.timeout,
            )
        return MockEmbeddingProvider(
            dimension=self.embedding.dimension, seed=self.embedding.seed
        )

    def summary_provider(self):
        if self.summary.kind == "http":
            return HttpSummaryProvider(
                base_url=self.summary.base_url,
                model=self.summary.model,
                api_key_env=self.summary.api_key_env,
                timeout=self.summary.timeout,
                retries=self.summary.retries,
            )
        return MockSummaryProvider()


def _provider_from(data: dict, defaults: ProviderConfig) -> ProviderConfig:
    merged = {**defaults.__dict__, **data}
    return ProviderConfig(**merged)


def load_config(path: str | Path | None = None) -> AppConfig:
    if path is None:
        return AppConfig()
    path = Path(path)
    if path.suffix == ".toml":
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        data = json.loads(path.read_text(encoding="utf-8"))
    config = AppConfig()
    for key in (
        "data_dir",
        "regeneration_fraction",
        "regeneration_absolute",
        "regeneration_cadence_hours",
        "session_gap_minutes",
        "min_ratings",
        "api_token",
        "prompt_dir",
    ):
        if key in data:
            setattr(config, key, data[key])
    if "embedding" in data:
        config.embedding = _provider_from(data["embedding"], ProviderConfig())
    if "summary" in data:
        config.summary = _provider_from(data["summary"], ProviderConfig())
    return config
