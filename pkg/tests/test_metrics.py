from __future__ import annotations

import itertools
import random
from datetime import timedelta

import numpy as np
import pytest

from selfportrait.metrics import (
    InteractionEvent,
    MissingEmbedding,
    TooFewItems,
    UserMetrics,
    compute_ils,
    compute_user_metrics,
    derive_sessions,
    metrics_csv,
)
from tests.conftest import T0, unit_vector


def event(kind="rating", minutes=0, movie="m1", score=4.0, user="u1"):
    if kind not in ("rating", "movie_view"):
        movie, score = None, None
    elif kind == "movie_view":
        score = None
    return InteractionEvent(
        user_id=user,
        kind=kind,
        timestamp=T0 + timedelta(minutes=minutes),
        movie_id=movie,
        score=score,
    )


WINDOW = (T0 - timedelta(days=1), T0 + timedelta(days=56))


class TestComputeIls:
    def test_identical_pair_is_one(self):
        emb = {"a": unit_vector([1, 0]), "b": unit_vector([1, 0])}
        assert compute_ils(["a", "b"], emb) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_pair_is_zero(self):
        emb = {"a": unit_vector([1, 0]), "b": unit_vector([0, 1])}
        assert compute_ils(["a", "b"], emb) == pytest.approx(0.0, abs=1e-12)

    def test_matches_brute_force_double_loop(self):
        rng = np.random.default_rng(21)
        ids = [f"m{i}" for i in range(5)]
        emb = {m: unit_vector(rng.standard_normal(8)) for m in ids}
        value = compute_ils(ids, emb)
        total = 0.0
        for i, j in itertools.combinations(range(5), 2):
            a = np.asarray(emb[ids[i]].values)
            b = np.asarray(emb[ids[j]].values)
            total += max(0.0, float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b))))
        assert value == pytest.approx(total / 10, abs=1e-12)

    def test_too_few_items(self):
        with pytest.raises(TooFewItems):
            compute_ils(["a"], {"a": unit_vector([1, 0])})

    def test_missing_embedding(self):
        with pytest.raises(MissingEmbedding):
            compute_ils(["a", "b"], {"a": unit_vector([1, 0])})

    def test_permutation_invariant_and_bounded(self):
        rng = np.random.default_rng(3)
        ids = [f"m{i}" for i in range(12)]
        emb = {m: unit_vector(rng.standard_normal(6)) for m in ids}
        value = compute_ils(ids, emb)
        shuffled = ids[:]
        random.Random(5).shuffle(shuffled)
        assert compute_ils(shuffled, emb) == pytest.approx(value, abs=1e-12)
        assert 0.0 <= value <= 1.0

    def test_duplicate_never_decreases(self):
        # repeating a movie id collapses, so the value is exactly unchanged
        rng = np.random.default_rng(9)
        for _ in range(50):
            ids = [f"m{i}" for i in range(rng.integers(2, 8))]
            emb = {m: unit_vector(rng.standard_normal(5)) for m in ids}
            base = compute_ils(ids, emb)
            assert compute_ils(ids + [ids[0]], emb) >= base
            assert compute_ils(ids + [ids[0]], emb) == pytest.approx(base, abs=0)


class TestDeriveSessions:
    def test_single_event(self):
        sessions = derive_sessions([event(minutes=0)])
        assert len(sessions) == 1
        assert sessions[0][0] == sessions[0][1]

    def test_gap_rule_hand_simulated(self):
        events = [event(minutes=0), event(minutes=10), event(minutes=130)]
        sessions = derive_sessions(events)
        assert len(sessions) == 2
        total = sum((e - s).total_seconds() for s, e in sessions)
        assert total == 600.0

    def test_empty(self):
        assert derive_sessions([]) == []

    def test_infinite_gap_one_session(self):
        events = [event(minutes=m) for m in (0, 100, 5000)]
        assert len(derive_sessions(events, gap=timedelta(days=999))) == 1

    def test_zero_gap_splits_everything(self):
        events = [event(minutes=m) for m in (0, 1, 2)]
        assert len(derive_sessions(events, gap=timedelta(0))) == 3

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            derive_sessions([event(minutes=5), event(minutes=0)])


class TestComputeUserMetrics:
    def test_no_events_all_absent(self):
        metrics = compute_user_metrics([], WINDOW, {})
        assert metrics.movie_view_count == 0
        assert metrics.rating_count == 0
        assert metrics.login_count == 0
        assert metrics.avg_rating is None
        assert metrics.rated_movie_div is None

    def test_same_score_is_not_a_rerate(self):
        events = [event(movie="m1", score=4.0)]
        metrics = compute_user_metrics(events, WINDOW, {"m1": 4.0})
        assert metrics.rerate_total == 0

    def test_different_score_is_a_rerate(self):
        events = [event(movie="m1", score=3.0)]
        metrics = compute_user_metrics(events, WINDOW, {"m1": 4.5})
        assert metrics.rerate_total == 1

    def test_window_restriction(self):
        events = [
            event(movie="m1", score=4.0, minutes=0),
            event(movie="m2", score=4.0, minutes=60 * 24 * 90),  # past window end
        ]
        metrics = compute_user_metrics(events, WINDOW, {})
        assert metrics.rating_count == 1

    def test_unique_views_flag(self):
        events = [
            event(kind="movie_view", movie="m1", minutes=0),
            event(kind="movie_view", movie="m1", minutes=1),
        ]
        assert compute_user_metrics(events, WINDOW, {}).movie_view_count == 2
        assert (
            compute_user_metrics(events, WINDOW, {}, unique_views=True).movie_view_count
            == 1
        )

    def test_matches_naive_reference_on_random_logs(self):
        rng = random.Random(77)
        movies = [f"m{i}" for i in range(12)]
        for _ in range(1000):
            events = []
            minute = 0
            for _ in range(rng.randint(0, 40)):
                minute += rng.randint(1, 90)
                kind = rng.choice(["rating", "movie_view", "page_event", "login"])
                movie = rng.choice(movies) if kind in ("rating", "movie_view") else None
                score = rng.choice([0.5, 2.0, 3.5, 5.0]) if kind == "rating" else None
                events.append(event(kind=kind, minutes=minute, movie=movie, score=score))
            prior = {m: rng.choice([1.0, 3.5]) for m in movies if rng.random() < 0.3}
            got = compute_user_metrics(events, WINDOW, prior)

            # naive single-pass reference
            start, end = WINDOW
            inw = [e for e in events if start <= e.timestamp < end]
            views = sum(1 for e in inw if e.kind == "movie_view")
            rats = [e for e in inw if e.kind == "rating"]
            sessions = 0
            last_ts = None
            total = timedelta(0)
            sess_start = None
            for e in inw:
                if last_ts is None or (e.timestamp - last_ts) > timedelta(minutes=30):
                    if sess_start is not None:
                        total += last_ts - sess_start
                    sessions += 1
                    sess_start = e.timestamp
                last_ts = e.timestamp
            if sess_start is not None:
                total += last_ts - sess_start
            rerates = sum(
                1 for e in rats if e.movie_id in prior and e.score != prior[e.movie_id]
            )
            assert got.movie_view_count == views
            assert got.rating_count == len(rats)
            assert got.login_count == sessions
            assert got.session_length_hours == pytest.approx(
                total.total_seconds() / 3600, abs=1e-12
            )
            assert got.rerate_total == rerates
            if rats:
                assert got.avg_rating == pytest.approx(
                    sum(e.score for e in rats) / len(rats), abs=1e-12
                )
            else:
                assert got.avg_rating is None


def test_metrics_csv_header_matches_table_names():
    rows = [
        UserMetrics(
            user_id="u1",
            movie_view_count=3,
            rating_count=2,
            login_count=1,
            session_length_hours=0.5,
            rated_movie_div=None,
            viewed_movie_div=0.25,
            rerate_total=0,
            avg_rating=4.25,
        )
    ]
    text = metrics_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == (
        "user_id,movie_view_count,rating_count,login_count,session_length,"
        "rated_movie_div,viewed_movie_div,rerate_total,avg_rating"
    )
    assert lines[1] == "u1,3,2,1,0.5,,0.25,0,4.25"


def test_interaction_event_round_trip():
    e = event(movie="m1", score=4.5)
    assert InteractionEvent.from_json(e.to_json()) == e
