"""Append-only JSON-lines event store, catalogue and user registry files, snapshots.

A store is a directory::

    events.jsonl     one envelope per line, append only
    catalogue.jsonl  one product per line: product_id, title, referral_url
    users.txt        one registered user id per line
    snapshot.json    optional materialized matrix as of a log position

Envelopes are flat JSON objects: ``type`` and ``version`` next to the
payload fields, e.g.::

    {"type":"swipe","version":1,"event_id":"e1","user_id":"u1","product_id":"p1","direction":"raid","timestamp_ms":1700000000000}

A nested ``{"type":..,"version":..,"payload":{..}}`` form is accepted on input.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .dedup import ProductClusterMap, ProductRecord
from .errors import CorruptLineError, StorageError, StoreMissingError, ValidationError
from .model import (
    Direction,
    Event,
    ImpressionEvent,
    InteractionMatrix,
    ReferralClickEvent,
    SessionEvent,
    Source,
    SwipeEvent,
    reduce_swipes,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EVENTS_FILE = "events.jsonl"
CATALOGUE_FILE = "catalogue.jsonl"
USERS_FILE = "users.txt"
SNAPSHOT_FILE = "snapshot.json"
SNAPSHOT_FORMAT = "swipecf.snapshot"

_TYPES = {
    "swipe": SwipeEvent,
    "impression": ImpressionEvent,
    "referral_click": ReferralClickEvent,
    "session": SessionEvent,
}
_TYPE_NAMES = {cls: name for name, cls in _TYPES.items()}

_FIELDS = {
    "swipe": {"event_id", "user_id", "product_id", "direction", "timestamp_ms", "variant"},
    "impression": {"event_id", "user_id", "product_id", "source", "similarity_score", "timestamp_ms", "variant"},
    "referral_click": {"event_id", "user_id", "product_id", "timestamp_ms", "variant"},
    "session": {"event_id", "user_id", "session_start_ms", "session_end_ms", "variant"},
}
_REQUIRED = {t: f - {"variant", "similarity_score"} for t, f in _FIELDS.items()}


def encode(event: Event) -> dict:
    """Event -> envelope dict. Optional fields that are None are omitted."""
    kind = _TYPE_NAMES.get(type(event))
    if kind is None:
        raise ValidationError(f"not an event: {type(event).__name__}")
    d = {"type": kind, "version": SCHEMA_VERSION, "event_id": event.event_id, "user_id": event.user_id}
    if kind == "session":
        d["session_start_ms"] = event.session_start
        d["session_end_ms"] = event.session_end
    else:
        d["product_id"] = event.product_id
        if kind == "swipe":
            d["direction"] = event.direction.value
        elif kind == "impression":
            d["source"] = event.source.value
            if event.similarity_score is not None:
                d["similarity_score"] = event.similarity_score
        d["timestamp_ms"] = event.timestamp
    if event.variant is not None:
        d["variant"] = event.variant
    return d


def decode(envelope) -> Event:
    """Envelope dict -> typed event, raising ValidationError on any defect."""
    if not isinstance(envelope, dict):
        raise ValidationError("envelope must be a JSON object")
    kind = envelope.get("type")
    version = envelope.get("version")
    if "payload" in envelope:
        payload = envelope["payload"]
        if not isinstance(payload, dict) or set(envelope) != {"type", "version", "payload"}:
            raise ValidationError("nested envelope must hold exactly type, version and an object payload")
    else:
        payload = {k: v for k, v in envelope.items() if k not in ("type", "version")}
    event_id = payload.get("event_id") if isinstance(payload.get("event_id"), str) else None
    if kind not in _TYPES:
        raise ValidationError(f"unknown event type {kind!r}", event_id)
    if version != SCHEMA_VERSION or isinstance(version, bool):
        raise ValidationError(f"unsupported schema version {version!r}", event_id)
    extra = set(payload) - _FIELDS[kind]
    if extra:
        raise ValidationError(f"unexpected fields {sorted(extra)} for {kind}", event_id)
    missing = _REQUIRED[kind] - set(payload)
    if missing:
        raise ValidationError(f"missing fields {sorted(missing)} for {kind}", event_id)
    variant = payload.get("variant")
    if variant is not None and not isinstance(variant, str):
        raise ValidationError("variant must be a string", event_id)
    try:
        if kind == "swipe":
            return SwipeEvent(
                payload["event_id"], payload["user_id"], payload["product_id"],
                Direction(payload["direction"]), payload["timestamp_ms"], variant,
            )
        if kind == "impression":
            return ImpressionEvent(
                payload["event_id"], payload["user_id"], payload["product_id"],
                Source(payload["source"]), payload["timestamp_ms"], payload.get("similarity_score"), variant,
            )
        if kind == "referral_click":
            return ReferralClickEvent(
                payload["event_id"], payload["user_id"], payload["product_id"], payload["timestamp_ms"], variant
            )
        return SessionEvent(
            payload["event_id"], payload["user_id"], payload["session_start_ms"], payload["session_end_ms"], variant
        )
    except ValueError as exc:
        # covers bad enum values; ValidationError is a ValueError too
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc), event_id) from exc


def dumps(event: Event) -> str:
    return json.dumps(encode(event), ensure_ascii=False, separators=(",", ":"))


def read_events_file(path) -> tuple[list[Event], list[tuple[int, str]]]:
    """Parse a JSON-lines event file. Returns (events, [(lineno, reason), ...])."""
    events, rejected = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                events.append(decode(json.loads(line)))
            except json.JSONDecodeError as exc:
                rejected.append((lineno, f"malformed JSON: {exc.msg}"))
            except ValidationError as exc:
                rejected.append((lineno, str(exc)))
    return events, rejected


@dataclass(frozen=True)
class Snapshot:
    as_of: int
    position: int
    matrix: InteractionMatrix
    cluster_map: Optional[ProductClusterMap] = None


def _same_clusters(a: Optional[ProductClusterMap], b: Optional[ProductClusterMap]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return dict(a) == dict(b)


class EventStore:
    """Directory-backed event store with a single serialized writer.

    Positions are 1-based line numbers in ``events.jsonl`` and strictly
    increase with each append.
    """

    def __init__(self, root, *, create: bool = False, fsync: bool = False):
        self.root = Path(root)
        if not self.root.is_dir():
            if not create:
                raise StoreMissingError(f"no event store at {self.root}")
            self.root.mkdir(parents=True, exist_ok=True)
        self.path = self.root / EVENTS_FILE
        if create:
            self.path.touch(exist_ok=True)
        self.fsync = fsync
        self._lock = threading.Lock()
        self._position: Optional[int] = None
        self._ids: Optional[set[str]] = None
        self.corrupt_lines: list[tuple[int, str]] = []

    # -- writing --

    def _load_index(self) -> None:
        ids, n = set(), 0
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for n, line in enumerate(fh, 1):
                    try:
                        eid = json.loads(line).get("event_id")
                    except (json.JSONDecodeError, AttributeError):
                        continue
                    if isinstance(eid, str):
                        ids.add(eid)
        self._ids, self._position = ids, n

    def _torn_tail(self) -> bool:
        try:
            with open(self.path, "rb") as fh:
                fh.seek(0, os.SEEK_END)
                if fh.tell() == 0:
                    return False
                fh.seek(-1, os.SEEK_END)
                return fh.read(1) != b"\n"
        except FileNotFoundError:
            return False

    @property
    def position(self) -> int:
        with self._lock:
            if self._position is None:
                self._load_index()
            return self._position

    def append(self, item) -> int:
        """Validate and append one event or envelope dict; returns its position."""
        return self.append_many([item], strict=True)[0][0]

    def append_many(self, items: Iterable, *, strict: bool = False) -> tuple[list[int], list[tuple[int, str]]]:
        """Append a batch under one lock and one write.

        Returns (positions of accepted items, [(item_index, reason)] of
        rejected ones). With ``strict`` the first rejection raises and
        nothing is written.
        """
        with self._lock:
            if self._ids is None:
                self._load_index()
            lines, rejected, batch_ids = [], [], set()
            for i, item in enumerate(items):
                try:
                    ev = item if _TYPE_NAMES.get(type(item)) else decode(item)
                    if ev.event_id in self._ids or ev.event_id in batch_ids:
                        raise ValidationError("duplicate event_id", ev.event_id)
                except ValidationError as exc:
                    if strict:
                        raise
                    rejected.append((i, str(exc)))
                    continue
                batch_ids.add(ev.event_id)
                lines.append(dumps(ev) + "\n")
            n_new = len(lines)
            if lines:
                # terminate a partially written last line so it stays one corrupt line
                prefix = "\n" if self._torn_tail() else ""
                try:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(prefix + "".join(lines))
                        fh.flush()
                        if self.fsync:
                            os.fsync(fh.fileno())
                except OSError as exc:
                    # the index is rebuilt from disk on next use
                    self._ids = self._position = None
                    raise StorageError(f"append to {self.path} failed: {exc}") from exc
            start = self._position
            self._position += n_new
            self._ids |= batch_ids
            return list(range(start + 1, start + 1 + n_new)), rejected

    # -- reading --

    def replay_with_positions(
        self,
        *,
        types: Optional[Iterable[str]] = None,
        user: Optional[str] = None,
        start: Optional[int] = None,
        end: Optional[int] = None,
        variant: Optional[str] = None,
        after: int = 0,
        until: Optional[int] = None,
        strict: bool = False,
    ) -> Iterator[tuple[int, Event]]:
        """Yield ``(position, event)`` matching every given filter, in position order.

        The time range is half-open ``[start, end)``; ``after`` and ``until``
        bound positions. Corrupt lines raise
        CorruptLineError in strict mode; otherwise they are logged, recorded
        in ``corrupt_lines`` and skipped.
        """
        type_classes = None if types is None else tuple(_TYPES[t] for t in types)
        self.corrupt_lines = []
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if lineno <= after:
                    continue
                if until is not None and lineno > until:
                    break
                try:
                    ev = decode(json.loads(line))
                except (json.JSONDecodeError, ValidationError) as exc:
                    if strict:
                        raise CorruptLineError(str(exc), lineno) from exc
                    log.warning("%s: skipping corrupt line %d: %s", self.path, lineno, exc)
                    self.corrupt_lines.append((lineno, str(exc)))
                    continue
                if type_classes is not None and not isinstance(ev, type_classes):
                    continue
                if user is not None and ev.user_id != user:
                    continue
                if variant is not None and ev.variant != variant:
                    continue
                ts = ev.timestamp
                if (start is not None and ts < start) or (end is not None and ts >= end):
                    continue
                yield lineno, ev

    def replay(self, **filters) -> list[Event]:
        return [ev for _, ev in self.replay_with_positions(**filters)]

    # -- catalogue and registry --

    def write_catalogue(self, products: Iterable[ProductRecord]) -> None:
        with open(self.root / CATALOGUE_FILE, "w", encoding="utf-8") as fh:
            for p in products:
                d = {"product_id": p.product_id, "title": p.title}
                if p.referral_url is not None:
                    d["referral_url"] = p.referral_url
                fh.write(json.dumps(d, ensure_ascii=False, separators=(",", ":")) + "\n")

    def read_catalogue(self) -> Optional[list[ProductRecord]]:
        path = self.root / CATALOGUE_FILE
        return read_catalogue_file(path) if path.exists() else None

    def write_users(self, user_ids: Iterable[str]) -> None:
        (self.root / USERS_FILE).write_text("".join(f"{u}\n" for u in user_ids), encoding="utf-8")

    def read_users(self) -> Optional[list[str]]:
        path = self.root / USERS_FILE
        if not path.exists():
            return None
        return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]

    # -- snapshots --

    def write_snapshot(self, cluster_map: Optional[ProductClusterMap] = None) -> Snapshot:
        """Materialize the swipe matrix as of the current end of the log."""
        position = self.position
        swipes = [ev for _, ev in self.replay_with_positions(types=["swipe"], until=position)]
        cells = reduce_swipes(swipes, cluster_map)
        matrix = InteractionMatrix.from_cells(cells)
        snap = Snapshot(as_of=matrix.as_of, position=position, matrix=matrix, cluster_map=cluster_map)
        doc = {
            "format": SNAPSHOT_FORMAT,
            "version": SCHEMA_VERSION,
            "as_of": snap.as_of,
            "position": position,
            "cells": [[u, p, ts, eid, d.value] for (u, p), (ts, eid, d) in sorted(cells.items())],
            "cluster_map": None if cluster_map is None else dict(sorted(cluster_map.items())),
            "threshold": None if cluster_map is None else cluster_map.threshold,
        }
        tmp = self.root / (SNAPSHOT_FILE + ".tmp")
        tmp.write_text(json.dumps(doc, separators=(",", ":")), encoding="utf-8")
        os.replace(tmp, self.root / SNAPSHOT_FILE)
        return snap

    def read_snapshot(self) -> Optional[Snapshot]:
        path = self.root / SNAPSHOT_FILE
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("format") != SNAPSHOT_FORMAT or doc.get("version") != SCHEMA_VERSION:
            raise ValidationError(f"{path} is not a version {SCHEMA_VERSION} snapshot")
        cells = {(u, p): (ts, eid, Direction(d)) for u, p, ts, eid, d in doc["cells"]}
        cmap = doc.get("cluster_map")
        cluster_map = None if cmap is None else ProductClusterMap(cmap, doc["threshold"])
        return Snapshot(doc["as_of"], doc["position"], InteractionMatrix.from_cells(cells), cluster_map)

    def load_matrix(self, cluster_map: Optional[ProductClusterMap] = None) -> InteractionMatrix:
        """Matrix over the whole log: snapshot plus tail when the snapshot fits, else a full rebuild."""
        snap = self.read_snapshot()
        if snap is not None and _same_clusters(snap.cluster_map, cluster_map):
            tail = [ev for _, ev in self.replay_with_positions(types=["swipe"], after=snap.position)]
            if not tail:
                return snap.matrix
            return InteractionMatrix.from_cells(reduce_swipes(tail, cluster_map, snap.matrix.cells))
        return InteractionMatrix.from_cells(reduce_swipes(self.replay(types=["swipe"]), cluster_map))


def read_catalogue_file(path) -> list[ProductRecord]:
    """Products from JSON-lines, or from a tab/comma separated file with a header row."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines:
        return []
    if lines[0].lstrip().startswith("{"):
        out = []
        for n, line in enumerate(lines, 1):
            try:
                d = json.loads(line)
                out.append(ProductRecord(d["product_id"], d["title"], d.get("referral_url")))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}: bad catalogue line {n}: {exc}") from exc
        return out
    dialect = "excel-tab" if "\t" in lines[0] else "excel"
    rows = list(csv.DictReader(lines, dialect=dialect))
    try:
        return [ProductRecord(r["product_id"], r["title"], r.get("referral_url") or None) for r in rows]
    except KeyError as exc:
        raise ValidationError(f"{path}: catalogue needs product_id and title columns") from exc
