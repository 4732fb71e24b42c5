"""Batch entry points: ingest CSVs, generate portraits, simulate activity,
analyze logs, and serve the HTTP API.

Exit codes: 0 success, 2 malformed input, 3 degenerate analysis groups or
missing analysis windows.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import timedelta
from pathlib import Path

import yaml

from . import analysis as analysis_mod
from .config import AppConfig, load_config
from .domain import Author, Catalog, MovieRecord, RatingEvent, Section, TaggedMovie, parse_instant
from .edits import build_edit_record
from .ingest import (
    IngestError,
    default_reference_date,
    group_by_user,
    load_catalog,
    load_ratings,
    quartile_gap_report,
)
from .metrics import InteractionEvent
from .pipeline import generate_portrait
from .semantic import MockEmbeddingProvider
from .stats import GroupAssignment, Group
from .store import Store
from .summarize import MockSummaryProvider, should_regenerate

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_DEGENERATE = 3


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _json_dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


# -- ingest -------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace, config: AppConfig) -> int:
    out_dir = Path(args.out)
    try:
        catalog = load_catalog(args.movies, args.tags)
        ratings, duplicates = load_ratings(args.ratings)
    except IngestError as exc:
        return _fail(EXIT_MALFORMED, str(exc))
    counts: dict[str, int] = {}
    for event in ratings:
        counts[event.movie_id] = counts.get(event.movie_id, 0) + 1
    catalog = catalog.with_popularity(counts)

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "catalog.json").write_text(
        _json_dumps(catalog.to_json()), encoding="utf-8"
    )
    with (out_dir / "events.jsonl").open("w", encoding="utf-8") as handle:
        for event in ratings:
            record = InteractionEvent(
                user_id=event.user_id,
                kind="rating",
                timestamp=event.timestamp,
                movie_id=event.movie_id,
                score=event.score,
            )
            handle.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
    users = {r.user_id for r in ratings}
    print(
        f"ingested movies={len(catalog.movies)} tagged={len(catalog.tags)} "
        f"ratings={len(ratings)} users={len(users)} duplicate_rows={duplicates}"
    )
    return EXIT_OK


# -- generate -----------------------------------------------------------------


def load_data_dir(data_dir: Path) -> tuple[Catalog, list[RatingEvent]]:
    catalog_path = data_dir / "catalog.json"
    events_path = data_dir / "events.jsonl"
    if not catalog_path.exists() or not events_path.exists():
        raise IngestError(f"{data_dir} missing catalog.json or events.jsonl; run ingest first")
    catalog = Catalog.from_json(json.loads(catalog_path.read_text(encoding="utf-8")))
    ratings = []
    with events_path.open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            event = InteractionEvent.from_json(json.loads(line))
            if event.kind == "rating":
                ratings.append(
                    RatingEvent(
                        user_id=event.user_id,
                        movie_id=event.movie_id,
                        score=event.score,
                        timestamp=event.timestamp,
                    )
                )
    return catalog, ratings


def cmd_generate(args: argparse.Namespace, config: AppConfig) -> int:
    data_dir = Path(args.data_dir)
    try:
        catalog, ratings = load_data_dir(data_dir)
    except IngestError as exc:
        return _fail(EXIT_MALFORMED, str(exc))
    by_user = group_by_user(ratings)
    if args.users:
        wanted = set(args.users.split(","))
        by_user = {u: r for u, r in by_user.items() if u in wanted}
    reference = (
        parse_instant(args.reference_date)
        if args.reference_date
        else default_reference_date(ratings)
    )
    min_ratings = args.min_ratings if args.min_ratings is not None else config.min_ratings

    eligible = []
    for user_id in sorted(by_user):
        if len(by_user[user_id]) < min_ratings:
            print(f"skip {user_id}: {len(by_user[user_id])} ratings < {min_ratings}")
            continue
        eligible.append(user_id)

    def build(user_id: str):
        # Fresh providers per task keep workers independent and seeded alike.
        embedder = MockEmbeddingProvider(
            dimension=config.embedding.dimension, seed=args.seed
        )
        summarizer = MockSummaryProvider()
        if args.provider == "http":
            embedder = config.embedding_provider()
            summarizer = config.summary_provider()
        return generate_portrait(
            user_id,
            by_user[user_id],
            catalog,
            embedder,
            summarizer,
            reference_date=reference,
        )

    outcomes = {}
    failures = []
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = {user_id: pool.submit(build, user_id) for user_id in eligible}
        for user_id, future in futures.items():
            try:
                outcomes[user_id] = future.result()
            except Exception as exc:  # provider failures skip the user only
                failures.append((user_id, str(exc)))
                print(f"failed {user_id}: {exc}", file=sys.stderr)

    portraits_dir = data_dir / "portraits"
    portraits_dir.mkdir(parents=True, exist_ok=True)
    quartiles = {}
    with (data_dir / "portraits.jsonl").open("w", encoding="utf-8") as chain_log, (
        data_dir / "generations.jsonl"
    ).open("w", encoding="utf-8") as gen_log:
        for user_id in sorted(outcomes):
            outcome = outcomes[user_id]
            (portraits_dir / f"{user_id}.json").write_text(
                _json_dumps(outcome.portrait.to_json()), encoding="utf-8"
            )
            chain_log.write(
                json.dumps(outcome.portrait.to_json(), sort_keys=True) + "\n"
            )
            gen_log.write(json.dumps(outcome.record.to_json(), sort_keys=True) + "\n")
            quartiles[user_id] = outcome.quartiles
    (data_dir / "cutoffs.csv").write_text(
        quartile_gap_report(quartiles), encoding="utf-8"
    )
    print(
        f"generated {len(outcomes)} portraits "
        f"(skipped {len(by_user) - len(eligible)}, failed {len(failures)})"
    )
    return EXIT_OK


# -- simulate -----------------------------------------------------------------


def _load_scenario(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        return yaml.safe_load(text) or {}
    return json.loads(text)


def _scenario_catalog(scenario: dict) -> Catalog:
    movies: dict[str, MovieRecord] = {}
    tags: dict[str, TaggedMovie] = {}
    for spec in scenario.get("movies", []):
        movie_id = str(spec["movie_id"])
        movies[movie_id] = MovieRecord(
            movie_id=movie_id,
            title=spec.get("title", f"Movie {movie_id}"),
            genres=tuple(spec.get("genres", ("Drama",))),
            actors=tuple(spec.get("actors", ())),
            directors=tuple(spec.get("directors", ())),
            language=spec.get("language", "English"),
            release_year=spec.get("release_year", 2000),
        )
        tag_pairs = tuple(
            (str(t), float(r)) for t, r in spec.get("tags", [[f"theme {movie_id}", 1.0]])
        )
        tags[movie_id] = TaggedMovie(movie_id=movie_id, top_tags=tag_pairs)

    def ensure(movie_id: str):
        if movie_id not in movies:
            movies[movie_id] = MovieRecord(
                movie_id=movie_id,
                title=f"Movie {movie_id}",
                genres=("Drama",),
                language="English",
                release_year=2000,
            )
            tags[movie_id] = TaggedMovie(
                movie_id=movie_id, top_tags=((f"theme {movie_id}", 1.0),)
            )

    for user in scenario.get("users", []):
        for rating in user.get("base_ratings", []):
            ensure(str(rating["movie_id"]))
        for view in user.get("base_views", []):
            ensure(str(view["movie_id"]))
        for day in user.get("days", []):
            for rating in day.get("ratings", []):
                ensure(str(rating["movie_id"]))
            for movie_id in day.get("views", []):
                ensure(str(movie_id))
    return Catalog(movies=movies, tags=tags)


def cmd_simulate(args: argparse.Namespace, config: AppConfig) -> int:
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        return _fail(EXIT_MALFORMED, f"scenario not found: {scenario_path}")
    try:
        scenario = _load_scenario(scenario_path)
        users = scenario.get("users", [])
        if not isinstance(users, list):
            raise ValueError("'users' must be a list")
        reference = parse_instant(scenario.get("reference_date", "2025-03-29T00:00:00Z"))
        catalog = _scenario_catalog(scenario)
    except Exception as exc:
        return _fail(EXIT_MALFORMED, f"bad scenario: {exc}")

    out_dir = Path(args.out)
    store = Store(out_dir)
    (out_dir / "catalog.json").write_text(
        _json_dumps(catalog.to_json()), encoding="utf-8"
    )
    embedder = MockEmbeddingProvider(
        dimension=config.embedding.dimension, seed=args.seed
    )
    summarizer = MockSummaryProvider()
    policy = config.policy

    # Day 0: base histories land in the event log and seed each portrait.
    for user in users:
        user_id = str(user["user_id"])
        for idx, rating in enumerate(user.get("base_ratings", [])):
            days_ago = float(rating.get("days_ago", 30 + idx))
            store.append_event(
                InteractionEvent(
                    user_id=user_id,
                    kind="rating",
                    timestamp=reference - timedelta(days=days_ago),
                    movie_id=str(rating["movie_id"]),
                    score=float(rating.get("score", 4.0)),
                )
            )
        for idx, view in enumerate(user.get("base_views", [])):
            days_ago = float(view.get("days_ago", 30 + idx))
            store.append_event(
                InteractionEvent(
                    user_id=user_id,
                    kind="movie_view",
                    timestamp=reference - timedelta(days=days_ago, minutes=30),
                    movie_id=str(view["movie_id"]),
                )
            )
    for user in users:
        user_id = str(user["user_id"])
        ratings = [
            RatingEvent(e.user_id, e.movie_id, e.score, e.timestamp)
            for e in store.events(user_id)
            if e.kind == "rating"
        ]
        if not ratings:
            continue
        outcome = generate_portrait(
            user_id, ratings, catalog, embedder, summarizer,
            reference_date=reference, version=1,
        )
        store.append_portrait(outcome.portrait)
        store.append_generation(outcome.record)

    total_days = max(
        (day.get("day", 0) for user in users for day in user.get("days", [])),
        default=0,
    )
    for day_number in range(1, int(total_days) + 1):
        day_start = reference + timedelta(days=day_number)
        for user in users:
            user_id = str(user["user_id"])
            day_spec = next(
                (d for d in user.get("days", []) if d.get("day") == day_number), None
            )
            if day_spec is None:
                continue
            minute = 0
            for movie_id in day_spec.get("views", []):
                store.append_event(
                    InteractionEvent(
                        user_id=user_id,
                        kind="movie_view",
                        timestamp=day_start + timedelta(minutes=minute),
                        movie_id=str(movie_id),
                    )
                )
                minute += 1
            for rating in day_spec.get("ratings", []):
                store.append_event(
                    InteractionEvent(
                        user_id=user_id,
                        kind="rating",
                        timestamp=day_start + timedelta(minutes=minute),
                        movie_id=str(rating["movie_id"]),
                        score=float(rating.get("score", 4.0)),
                    )
                )
                minute += 1
            for edit in day_spec.get("edits", []):
                current = store.latest_portrait(user_id)
                if current is None:
                    continue
                section = Section(edit["section"])
                record = build_edit_record(
                    user_id=user_id,
                    section=section,
                    base_version=current.version,
                    before=current.section_text(section),
                    after=edit.get("text", ""),
                    timestamp=day_start + timedelta(minutes=minute),
                    provider=embedder,
                )
                store.append_edit(record)
                store.append_portrait(
                    current.with_section(
                        section,
                        edit.get("text", ""),
                        author=Author.USER,
                        generated_at=day_start + timedelta(minutes=minute),
                    )
                )
                minute += 1

        # End-of-day sweep: the daily cadence gate sees one virtual day.
        day_end = day_start + timedelta(hours=23)
        for user in users:
            user_id = str(user["user_id"])
            record = store.latest_generation(user_id)
            current = store.latest_portrait(user_id)
            if record is None or current is None:
                continue
            count = store.rating_count(user_id)
            if not should_regenerate(
                record, count, policy, now=day_end, last_check=record.generated_at
            ):
                continue
            ratings = [
                RatingEvent(e.user_id, e.movie_id, e.score, e.timestamp)
                for e in store.events(user_id)
                if e.kind == "rating"
            ]
            outcome = generate_portrait(
                user_id,
                ratings,
                catalog,
                embedder,
                summarizer,
                reference_date=day_end,
                version=current.version + 1,
            )
            store.append_portrait(outcome.portrait)
            store.append_generation(outcome.record)

    regen_count = sum(
        1 for r in store.generations() if r.portrait_version > 1
    )
    print(
        f"simulated days={total_days} users={len(users)} "
        f"events={len(store.events())} edits={len(store.edits())} "
        f"regenerations={regen_count}"
    )
    return EXIT_OK


# -- analyze ------------------------------------------------------------------


def _load_groups_csv(path: Path) -> list[GroupAssignment]:
    assignments = []
    with path.open(newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            assignments.append(
                GroupAssignment(user_id=row["user_id"], group=Group(row["group"]))
            )
    return assignments


def cmd_analyze(args: argparse.Namespace, config: AppConfig) -> int:
    data_dir = Path(args.data_dir)
    if not (data_dir / "events.jsonl").exists():
        return _fail(EXIT_MALFORMED, f"no events.jsonl under {data_dir}")
    if not args.baseline:
        return _fail(EXIT_DEGENERATE, "a baseline window is required for ANCOVA")
    try:
        window = _window_arg(args.window)
        baseline = _window_arg(args.baseline)
    except ValueError as exc:
        return _fail(EXIT_MALFORMED, str(exc))

    store = Store(data_dir)
    events = store.events()
    user_ids = sorted({e.user_id for e in events})
    embeddings = None
    catalog_path = data_dir / "catalog.json"
    if catalog_path.exists():
        catalog = Catalog.from_json(
            json.loads(catalog_path.read_text(encoding="utf-8"))
        )
        embedder = MockEmbeddingProvider(
            dimension=config.embedding.dimension, seed=args.seed
        )
        embeddings = analysis_mod.movie_tag_embeddings(catalog, embedder)
    groups = _load_groups_csv(Path(args.groups)) if args.groups else None

    try:
        bundle = analysis_mod.run_analysis(
            events,
            store.edits(),
            window,
            baseline,
            user_ids,
            embeddings=embeddings,
            groups=groups,
            session_gap=config.session_gap,
        )
        anova_bundle = analysis_mod.run_analysis(
            events,
            store.edits(),
            baseline,
            None,
            user_ids,
            embeddings=embeddings,
            groups=groups,
            session_gap=config.session_gap,
        )
    except analysis_mod.InsufficientData as exc:
        return _fail(EXIT_DEGENERATE, str(exc))

    out_dir = Path(args.out) if args.out else data_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.csv").write_text(bundle["experiment_csv"], encoding="utf-8")
    (out_dir / "metrics_baseline.csv").write_text(
        bundle["baseline_csv"], encoding="utf-8"
    )
    (out_dir / "report_ancova.csv").write_text(bundle["report_csv"], encoding="utf-8")
    (out_dir / "report_anova_baseline.csv").write_text(
        anova_bundle["report_csv"], encoding="utf-8"
    )
    sys.stdout.write(bundle["report_csv"])
    return EXIT_OK


def _window_arg(raw: str):
    start_text, sep, end_text = raw.partition("/")
    if not sep:
        raise ValueError(f"window {raw!r} must be START/END")
    start = parse_instant(start_text)
    end = parse_instant(end_text)
    if end <= start:
        raise ValueError(f"window {raw!r} is empty")
    return (start, end)


# -- serve --------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace, config: AppConfig) -> int:
    import uvicorn

    from .server import create_app, start_sweep_thread

    data_dir = Path(args.data_dir)
    catalog_path = data_dir / "catalog.json"
    if not catalog_path.exists():
        return _fail(EXIT_MALFORMED, f"no catalog.json under {data_dir}; run ingest")
    catalog = Catalog.from_json(json.loads(catalog_path.read_text(encoding="utf-8")))
    store = Store(data_dir)
    static_dir = args.static_dir if args.static_dir and Path(args.static_dir).is_dir() else None
    app = create_app(store, catalog, config, static_dir=static_dir)
    if args.sweep_interval > 0:
        start_sweep_thread(app, interval_seconds=args.sweep_interval)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfportrait",
        description="Editable interest-profile pipeline and analytics",
    )
    parser.add_argument("--config", default=None, help="TOML or JSON config file")
    parser.add_argument("--seed", type=int, default=0, help="mock provider seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")
    commands = parser.add_subparsers(dest="command", required=True)

    p_ingest = commands.add_parser("ingest", help="load CSVs into a data dir")
    p_ingest.add_argument("--movies", required=True)
    p_ingest.add_argument("--ratings", required=True)
    p_ingest.add_argument("--tags", required=True)
    p_ingest.add_argument("--out", required=True)
    p_ingest.set_defaults(func=cmd_ingest)

    p_generate = commands.add_parser("generate", help="build portraits for users")
    p_generate.add_argument("--data-dir", required=True)
    p_generate.add_argument("--users", default="", help="comma list; default all")
    p_generate.add_argument("--provider", choices=("mock", "http"), default="mock")
    p_generate.add_argument("--min-ratings", type=int, default=None)
    p_generate.add_argument("--reference-date", default=None)
    p_generate.set_defaults(func=cmd_generate)

    p_simulate = commands.add_parser("simulate", help="run a scripted scenario")
    p_simulate.add_argument("--scenario", required=True)
    p_simulate.add_argument("--out", required=True)
    p_simulate.set_defaults(func=cmd_simulate)

    p_analyze = commands.add_parser("analyze", help="metrics + ANCOVA report")
    p_analyze.add_argument("--data-dir", required=True)
    p_analyze.add_argument("--window", required=True, help="START/END ISO-8601")
    p_analyze.add_argument("--baseline", default=None, help="START/END ISO-8601")
    p_analyze.add_argument("--groups", default=None, help="optional groups CSV")
    p_analyze.add_argument("--out", default=None)
    p_analyze.set_defaults(func=cmd_analyze)

    p_serve = commands.add_parser("serve", help="run the HTTP API")
    p_serve.add_argument("--data-dir", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--sweep-interval", type=float, default=3600.0)
    p_serve.add_argument("--static-dir", default=None, help="serve a UI bundle at /")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args.config)
    return args.func(args, config)


if __name__ == "__main__":
    sys.exit(main())
