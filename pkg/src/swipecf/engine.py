"""The single engine behind both the CLI and the HTTP service."""
from __future__ import annotations

import datetime as dt
import gc
import threading
import time
from typing import Optional

from .dedup import ProductClusterMap
from .errors import UnknownUserError, ValidationError
from .evaluation import ALL_TIME, Window, evaluate
from .eventstore import EventStore
from .model import InteractionMatrix
from .recommender import DEFAULT_N, NoRecommendation, NoRecommendationReason, RecommendationOutcome, recommend


def parse_instant(text: str) -> int:
    """Epoch milliseconds from an integer string or an ISO-8601 date/datetime (naive means UTC)."""
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    try:
        value = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ValidationError(f"not an instant: {text!r}") from None
    if value.tzinfo is None:
        value = value.replace(tzinfo=dt.timezone.utc)
    return int(value.timestamp() * 1000)


def parse_window(text: Optional[str]) -> Window:
    """``FROM..TO`` with either side optional; TO is exclusive."""
    if not text:
        return ALL_TIME
    if ".." not in text:
        raise ValidationError(f"window must look like FROM..TO, got {text!r}")
    lo, hi = text.split("..", 1)
    return window_from(lo or None, hi or None)


def window_from(start: Optional[str], end: Optional[str]) -> Window:
    w = Window(parse_instant(start) if start else None, parse_instant(end) if end else None)
    if w.start is not None and w.end is not None and w.end < w.start:
        raise ValidationError("window end precedes its start")
    return w


def outcome_payload(outcome: RecommendationOutcome) -> dict:
    if isinstance(outcome, NoRecommendation):
        return {
            "target": outcome.target,
            "products": [],
            "similarity": None,
            "neighbor": None,
            "source": "fallback",
            "reason": outcome.reason.value,
        }
    return {
        "target": outcome.target,
        "products": list(outcome.queued),
        "similarity": outcome.similarity,
        "neighbor": outcome.neighbor,
        "source": "recommender",
        "reason": None,
    }


class Engine:
    """Holds an immutable matrix snapshot over a store and answers queries against it.

    The matrix is swapped atomically by :meth:`refresh`; a request that has
    already read ``self.matrix`` keeps using that snapshot. With
    ``refresh_seconds`` set, :meth:`maybe_refresh` rebuilds when the log has
    grown and the interval has elapsed.
    """

    def __init__(
        self,
        store: EventStore,
        clusters: Optional[ProductClusterMap] = None,
        refresh_seconds: Optional[float] = None,
    ):
        self.store = store
        self.clusters = clusters
        self.refresh_seconds = refresh_seconds
        self._lock = threading.Lock()
        self._built_at = 0.0
        self._built_position = -1
        self.matrix: InteractionMatrix = InteractionMatrix.from_cells({})
        self.refresh()

    def refresh(self) -> InteractionMatrix:
        with self._lock:
            position = self.store.position
            matrix = self.store.load_matrix(self.clusters)
            # the snapshot is long lived and acyclic; keep the cyclic collector
            # from rescanning its millions of tuples on every full pass
            gc.collect()
            gc.freeze()
            self._built_at = time.monotonic()
            self._built_position = position
            self.matrix = matrix
            return matrix

    def maybe_refresh(self) -> None:
        if self.refresh_seconds is None:
            return
        if time.monotonic() - self._built_at < self.refresh_seconds:
            return
        if self.store.position != self._built_position:
            self.refresh()

    def known_users(self) -> set[str]:
        return set(self.store.read_users() or ())

    def recommend(self, user_id: str, n: int = DEFAULT_N) -> RecommendationOutcome:
        """Users in the registry but absent from the matrix are cold, not unknown."""
        matrix = self.matrix
        if user_id not in matrix:
            if user_id in self.known_users():
                return NoRecommendation(user_id, NoRecommendationReason.COLD_USER)
            raise UnknownUserError(user_id)
        return recommend(matrix, user_id, n)

    def evaluate(self, window: Window = ALL_TIME, bucket_width: float = 0.05) -> dict:
        position = self.store.position
        events = self.store.replay(until=position)
        clusters = self.clusters
        canon = (lambda p: p) if clusters is None else clusters.canonical
        products = {canon(e.product_id) for e in events if hasattr(e, "product_id")}
        users = {e.user_id for e in events}
        catalogue = self.store.read_catalogue()
        if catalogue is not None:
            products |= {canon(p.product_id) for p in catalogue}
        users |= self.known_users()
        payload = evaluate(
            events,
            total_products=len(products),
            total_users=len(users),
            clusters=clusters,
            window=window,
            bucket_width=bucket_width,
        )
        payload["position"] = position
        return payload
