"""HTTP service for portraits, edits, regeneration, treemaps, and analysis.

All writes for one user funnel through that user's lock; reads serve
immutable snapshots, so concurrent readers never block. Endpoints live under
/api/v1 and speak JSON (the analysis report also renders CSV).
"""
from __future__ import annotations

import threading
from datetime import datetime, timezone
from typing import Callable

import numpy as np
from fastapi import Depends, FastAPI, HTTPException, Query, Request, Response
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .analysis import InsufficientData, movie_tag_embeddings, run_analysis
from .config import AppConfig
from .domain import Author, Catalog, Portrait, RatingEvent, Section, format_instant, parse_instant
from .edits import build_edit_record
from .metrics import InteractionEvent
from .pipeline import generate_portrait
from .semantic import ProviderFailure
from .store import Store
from .summarize import DISLIKED_PLACEHOLDER, should_regenerate

TREEMAP_CATEGORIES = (
    "genre",
    "actor",
    "director",
    "language",
    "popularity",
    "release_year",
)


class EditBody(BaseModel):
    text: str
    base_version: int


class EventBody(BaseModel):
    kind: str
    timestamp: str
    movie_id: str | None = None
    score: float | None = None


class AppState:
    """Mutable service wiring shared by all request handlers."""

    def __init__(
        self,
        store: Store,
        catalog: Catalog,
        config: AppConfig,
        clock: Callable[[], datetime] | None = None,
    ):
        self.store = store
        self.catalog = catalog
        self.config = config
        self.embedder = config.embedding_provider()
        self.summarizer = config.summary_provider()
        self.policy = config.policy
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self._ils_embeddings = None
        self._pop_thresholds = None

    def ils_embeddings(self):
        if self._ils_embeddings is None:
            self._ils_embeddings = movie_tag_embeddings(self.catalog, self.embedder)
        return self._ils_embeddings

    def popularity_thresholds(self) -> tuple[float, float, float]:
        if self._pop_thresholds is None:
            values = sorted(m.popularity for m in self.catalog.movies.values())
            if values:
                q1, q2, q3 = np.percentile(values, [25, 50, 75])
            else:
                q1 = q2 = q3 = 0.0
            self._pop_thresholds = (float(q1), float(q2), float(q3))
        return self._pop_thresholds

    def known_user(self, user_id: str) -> bool:
        if self.store.latest_portrait(user_id) is not None:
            return True
        return any(e.user_id == user_id for e in self.store.events())

    def user_ratings(self, user_id: str) -> list[RatingEvent]:
        ratings = [
            RatingEvent(
                user_id=e.user_id,
                movie_id=e.movie_id,
                score=e.score,
                timestamp=e.timestamp,
            )
            for e in self.store.events(user_id)
            if e.kind == "rating" and e.movie_id is not None and e.score is not None
        ]
        return sorted(ratings, key=lambda r: (r.timestamp, r.movie_id))

    def user_context(self, user_id: str) -> str | None:
        """Current text of the sections the user authored, for prompt reuse."""
        portrait = self.store.latest_portrait(user_id)
        if portrait is None:
            return None
        authors = self.store.section_authors(user_id)
        blocks = [
            f"{section.value}: {portrait.section_text(section)}"
            for section in Section
            if authors[section] == Author.USER
        ]
        return "\n".join(blocks) if blocks else None

    def regenerate(self, user_id: str, force: bool) -> Portrait | None:
        """Run the pipeline if due; None means the threshold gate said no."""
        with self.store.user_lock(user_id):
            now = self.clock()
            current = self.store.latest_portrait(user_id)
            count = self.store.rating_count(user_id)
            record = self.store.latest_generation(user_id)
            if current is not None and record is not None and not force:
                due = should_regenerate(
                    record,
                    max(count, record.ratings_count_at_generation),
                    self.policy,
                    now=now,
                    last_check=record.generated_at,
                )
                if not due:
                    return None
            ratings = self.user_ratings(user_id)
            if not ratings:
                raise HTTPException(409, detail="user has no ratings to summarize")
            context = self.user_context(user_id)
            outcome = generate_portrait(
                user_id,
                ratings,
                self.catalog,
                self.embedder,
                self.summarizer,
                reference_date=now,
                version=(current.version + 1) if current else 1,
                user_context=context,
                author=Author.MERGED if context else Author.AI,
            )
            self.store.append_portrait(outcome.portrait)
            self.store.append_generation(outcome.record)
            return outcome.portrait


def portrait_payload(state: AppState, portrait: Portrait) -> dict:
    authors = state.store.section_authors(portrait.user_id)
    record = state.store.latest_generation(portrait.user_id)
    return {
        "user_id": portrait.user_id,
        "version": portrait.version,
        "generated_at": format_instant(portrait.generated_at),
        "author": portrait.author.value,
        "sections": {
            section.value: {
                "text": portrait.section_text(section),
                "author": authors[section].value,
            }
            for section in Section
        },
        "last_generation_at": (
            format_instant(record.generated_at) if record else None
        ),
    }


def _bucket_year(year: int | None) -> str:
    if year is None:
        return "(unknown)"
    return f"{(year // 10) * 10}s"


def _bucket_popularity(value: float, thresholds: tuple[float, float, float]) -> str:
    q1, q2, q3 = thresholds
    if value <= q1:
        return "bottom 25%"
    if value <= q2:
        return "25-50%"
    if value <= q3:
        return "50-75%"
    return "top 25%"


def treemap_slice(state: AppState, user_id: str, category: str) -> dict:
    """Facet counts over the user's rated movies; children are the movies."""
    rated_ids = sorted(
        {
            e.movie_id
            for e in state.store.events(user_id)
            if e.kind == "rating" and e.movie_id in state.catalog.movies
        }
    )
    cells: dict[str, list[str]] = {}
    for movie_id in rated_ids:
        movie = state.catalog.movies[movie_id]
        if category == "genre":
            labels = list(movie.genres)
        elif category == "actor":
            labels = list(movie.actors)
        elif category == "director":
            labels = list(movie.directors)
        elif category == "language":
            labels = [movie.language]
        elif category == "release_year":
            labels = [_bucket_year(movie.release_year)]
        else:
            labels = [
                _bucket_popularity(movie.popularity, state.popularity_thresholds())
            ]
        for label in labels:
            cells.setdefault(label, []).append(movie.title)
    ordered = sorted(cells.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    return {
        "category": category,
        "cells": [
            {
                "label": label,
                "count": len(titles),
                "children": [
                    {"label": title, "count": 1, "children": []}
                    for title in sorted(titles)
                ],
            }
            for label, titles in ordered
        ],
    }


def _parse_window(raw: str, name: str) -> tuple[datetime, datetime]:
    try:
        start_text, _, end_text = raw.partition("/")
        start = parse_instant(start_text)
        end = parse_instant(end_text)
    except Exception:
        raise HTTPException(400, detail=f"bad {name} window; use START/END ISO-8601")
    if end <= start:
        raise HTTPException(400, detail=f"{name} window must be non-empty")
    return start, end


def create_app(
    store: Store,
    catalog: Catalog,
    config: AppConfig | None = None,
    clock: Callable[[], datetime] | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    config = config or AppConfig()
    state = AppState(store=store, catalog=catalog, config=config, clock=clock)
    app = FastAPI(title="selfportrait", version="0.1.0")
    app.state.portrait_state = state

    def check_token(request: Request) -> None:
        if config.api_token:
            header = request.headers.get("authorization", "")
            if header != f"Bearer {config.api_token}":
                raise HTTPException(401, detail="missing or bad token")

    guarded = [Depends(check_token)]

    @app.get("/api/v1/users/{user_id}/portrait", dependencies=guarded)
    def get_portrait(user_id: str):
        if not state.known_user(user_id):
            raise HTTPException(404, detail=f"unknown user {user_id}")
        portrait = state.store.latest_portrait(user_id)
        if portrait is None:
            raise HTTPException(409, detail="portrait not yet generated")
        return portrait_payload(state, portrait)

    @app.put("/api/v1/users/{user_id}/portrait/{section}", dependencies=guarded)
    def put_section(user_id: str, section: Section, body: EditBody):
        with state.store.user_lock(user_id):
            current = state.store.latest_portrait(user_id)
            if current is None:
                status = 404 if not state.known_user(user_id) else 409
                raise HTTPException(status, detail="no portrait to edit")
            if body.base_version != current.version:
                raise HTTPException(
                    409,
                    detail={
                        "error": "stale_version",
                        "current_version": current.version,
                    },
                )
            emptied = not body.text.strip()
            if emptied and section in (Section.RECENT, Section.LIKED):
                raise HTTPException(422, detail=f"{section.value} cannot be empty")
            now = state.clock()
            record = build_edit_record(
                user_id=user_id,
                section=section,
                base_version=current.version,
                before=current.section_text(section),
                after=body.text,
                timestamp=now,
                provider=state.embedder,
            )
            stored_text = DISLIKED_PLACEHOLDER if emptied else body.text
            updated = current.with_section(
                section, stored_text, author=Author.USER, generated_at=now
            )
            state.store.append_edit(record)
            state.store.append_portrait(updated)
        return {
            "portrait": portrait_payload(state, updated),
            "edit": record.to_json(),
        }

    @app.post(
        "/api/v1/users/{user_id}/regenerate",
        dependencies=guarded,
        status_code=200,
    )
    def post_regenerate(user_id: str, force: bool = False):
        if not state.known_user(user_id):
            raise HTTPException(404, detail=f"unknown user {user_id}")
        try:
            portrait = state.regenerate(user_id, force=force)
        except ProviderFailure as exc:
            raise HTTPException(502, detail=f"provider failure: {exc}")
        if portrait is None:
            return Response(status_code=204)
        return portrait_payload(state, portrait)

    @app.post("/api/v1/users/{user_id}/events", dependencies=guarded, status_code=201)
    def post_event(user_id: str, body: EventBody):
        try:
            event = InteractionEvent(
                user_id=user_id,
                kind=body.kind,
                timestamp=parse_instant(body.timestamp),
                movie_id=body.movie_id,
                score=body.score,
            )
        except Exception as exc:
            raise HTTPException(422, detail=str(exc))
        with state.store.user_lock(user_id):
            state.store.append_event(event)
        return {"stored": True}

    @app.get("/api/v1/users/{user_id}/treemap", dependencies=guarded)
    def get_treemap(user_id: str, category: str = Query(...)):
        if category not in TREEMAP_CATEGORIES:
            raise HTTPException(
                400,
                detail=f"bad category {category!r}; one of {TREEMAP_CATEGORIES}",
            )
        if not state.known_user(user_id):
            raise HTTPException(404, detail=f"unknown user {user_id}")
        return treemap_slice(state, user_id, category)

    @app.get("/api/v1/analysis/report", dependencies=guarded)
    def get_report(
        window: str = Query(...),
        baseline: str | None = None,
        format: str = "json",
    ):
        window_range = _parse_window(window, "window")
        baseline_range = (
            _parse_window(baseline, "baseline") if baseline is not None else None
        )
        events = state.store.events()
        user_ids = sorted({e.user_id for e in events})
        try:
            bundle = run_analysis(
                events,
                state.store.edits(),
                window_range,
                baseline_range,
                user_ids,
                embeddings=state.ils_embeddings(),
                session_gap=state.config.session_gap,
            )
        except InsufficientData as exc:
            raise HTTPException(409, detail=str(exc))
        if format == "csv":
            return PlainTextResponse(bundle["report_csv"], media_type="text/csv")
        return {
            "p_column": bundle["p_column"],
            "results": [r.to_json() for r in bundle["results"]],
            "report_csv": bundle["report_csv"],
            "groups": {a.user_id: a.group.value for a in bundle["groups"]},
        }

    @app.get("/api/v1/healthz")
    def healthz():
        return {"ok": True, "users": len(state.store.portrait_users())}

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webui")

    return app


def regeneration_sweep(state: AppState) -> list[str]:
    """Evaluate every known user once; returns ids that regenerated."""
    regenerated = []
    users = sorted(
        {e.user_id for e in state.store.events()} | set(state.store.portrait_users())
    )
    for user_id in users:
        if state.store.latest_portrait(user_id) is None:
            continue
        try:
            if state.regenerate(user_id, force=False) is not None:
                regenerated.append(user_id)
        except (HTTPException, ProviderFailure):
            continue
    return regenerated


def start_sweep_thread(app: FastAPI, interval_seconds: float = 3600.0):
    state: AppState = app.state.portrait_state
    stop = threading.Event()

    def loop():
        while not stop.wait(interval_seconds):
            regeneration_sweep(state)

    thread = threading.Thread(target=loop, daemon=True, name="regen-sweep")
    thread.start()
    return stop
