"""Append-only persistence for portraits, edits, events, and generations.

Each log is a JSON-lines file; replaying the logs reconstructs the exact
in-memory state, so a crash loses at most a partially written trailing line.
Writes for one user are serialized by a per-user lock; reads work on
immutable snapshots.
"""
from __future__ import annotations

import json
import threading
from collections import defaultdict
from pathlib import Path

from .domain import Author, Portrait, Section
from .edits import EditRecord
from .metrics import InteractionEvent
from .summarize import GenerationRecord


class StoreError(Exception):
    pass


class StaleVersion(StoreError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"base_version {got} is stale; current is {expected}")
        self.expected = expected
        self.got = got


class VersionGap(StoreError):
    pass


PORTRAITS_LOG = "portraits.jsonl"
EDITS_LOG = "edits.jsonl"
EVENTS_LOG = "events.jsonl"
GENERATIONS_LOG = "generations.jsonl"
SNAPSHOT_FILE = "snapshot.json"


class Store:
    """Log-backed state with single-writer-per-user discipline."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._portraits: dict[str, list[Portrait]] = defaultdict(list)
        self._edits: list[EditRecord] = []
        self._events: list[InteractionEvent] = []
        self._generations: dict[str, list[GenerationRecord]] = defaultdict(list)
        self._user_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()
        self._append_guard = threading.Lock()
        self._load()

    # -- loading ------------------------------------------------------------

    def _read_lines(self, name: str) -> list[dict]:
        path = self.data_dir / name
        if not path.exists():
            return []
        rows = []
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return rows

    def _load(self) -> None:
        for row in self._read_lines(PORTRAITS_LOG):
            portrait = Portrait.from_json(row)
            chain = self._portraits[portrait.user_id]
            expected = chain[-1].version + 1 if chain else 1
            if portrait.version != expected:
                raise VersionGap(
                    f"{portrait.user_id}: replay found version {portrait.version}, "
                    f"expected {expected}"
                )
            chain.append(portrait)
        self._edits = [EditRecord.from_json(r) for r in self._read_lines(EDITS_LOG)]
        self._events = [
            InteractionEvent.from_json(r) for r in self._read_lines(EVENTS_LOG)
        ]
        for row in self._read_lines(GENERATIONS_LOG):
            record = GenerationRecord.from_json(row)
            self._generations[record.user_id].append(record)

    # -- locking ------------------------------------------------------------

    def user_lock(self, user_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._user_locks[user_id]

    # -- appends ------------------------------------------------------------

    def _append_line(self, name: str, payload: dict) -> None:
        line = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        with self._append_guard:
            with (self.data_dir / name).open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()

    def append_portrait(self, portrait: Portrait) -> None:
        chain = self._portraits[portrait.user_id]
        expected = chain[-1].version + 1 if chain else 1
        if portrait.version != expected:
            raise VersionGap(
                f"{portrait.user_id}: version {portrait.version}, expected {expected}"
            )
        self._append_line(PORTRAITS_LOG, portrait.to_json())
        chain.append(portrait)

    def append_edit(self, record: EditRecord) -> None:
        self._append_line(EDITS_LOG, record.to_json())
        self._edits.append(record)

    def append_event(self, event: InteractionEvent) -> None:
        self._append_line(EVENTS_LOG, event.to_json())
        self._events.append(event)

    def append_generation(self, record: GenerationRecord) -> None:
        self._append_line(GENERATIONS_LOG, record.to_json())
        self._generations[record.user_id].append(record)

    # -- queries ------------------------------------------------------------

    def latest_portrait(self, user_id: str) -> Portrait | None:
        chain = self._portraits.get(user_id)
        return chain[-1] if chain else None

    def portrait_chain(self, user_id: str) -> list[Portrait]:
        return list(self._portraits.get(user_id, ()))

    def portrait_users(self) -> list[str]:
        return sorted(self._portraits)

    def edits(self, user_id: str | None = None) -> list[EditRecord]:
        if user_id is None:
            return list(self._edits)
        return [e for e in self._edits if e.user_id == user_id]

    def edit_counts(self) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for edit in self._edits:
            counts[edit.user_id] += 1
        return dict(counts)

    def events(self, user_id: str | None = None) -> list[InteractionEvent]:
        if user_id is None:
            return list(self._events)
        return [e for e in self._events if e.user_id == user_id]

    def latest_generation(self, user_id: str) -> GenerationRecord | None:
        records = self._generations.get(user_id)
        return records[-1] if records else None

    def generations(self, user_id: str | None = None) -> list[GenerationRecord]:
        if user_id is None:
            return [r for recs in self._generations.values() for r in recs]
        return list(self._generations.get(user_id, ()))

    def rating_count(self, user_id: str) -> int:
        return sum(
            1 for e in self._events if e.user_id == user_id and e.kind == "rating"
        )

    def section_authors(self, user_id: str) -> dict[Section, Author]:
        """Provenance per section: who last changed its text."""
        chain = self._portraits.get(user_id, [])
        authors: dict[Section, Author] = {}
        for section in Section:
            author = Author.AI
            previous: str | None = None
            for portrait in chain:
                text = portrait.section_text(section)
                if previous is None or text != previous:
                    author = (
                        Author.USER if portrait.author == Author.USER else Author.AI
                    )
                previous = text
            authors[section] = author
        return authors

    # -- snapshots ----------------------------------------------------------

    def snapshot(self) -> Path:
        """Point-in-time state dump for inspection and diffing.

        Logs stay the source of truth on load; the snapshot is informational.
        """
        state = {
            "portraits": {
                user: chain[-1].to_json()
                for user, chain in self._portraits.items()
                if chain
            },
            "edit_count": len(self._edits),
            "event_count": len(self._events),
            "generation_count": sum(len(v) for v in self._generations.values()),
        }
        path = self.data_dir / SNAPSHOT_FILE
        path.write_text(
            json.dumps(state, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        return path
