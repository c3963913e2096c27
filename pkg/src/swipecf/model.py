"""Event vocabulary and the sparse boolean user x product interaction matrix."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .errors import UnknownUserError, ValidationError


class Direction(str, enum.Enum):
    RAID = "raid"
    DISLIKE = "dislike"


class Source(str, enum.Enum):
    RECOMMENDER = "recommender"
    FALLBACK = "fallback"


def _require_id(value, name: str, event_id) -> None:
    if not isinstance(value, str) or not value:
        raise ValidationError(f"{name} must be a non-empty string", event_id)


def _require_ts(value, name: str, event_id) -> None:
    # bool is an int subclass but never a valid instant
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValidationError(f"{name} must be integer epoch milliseconds", event_id)


@dataclass(frozen=True, slots=True)
class SwipeEvent:
    event_id: str
    user_id: str
    product_id: str
    direction: Direction
    timestamp: int
    variant: Optional[str] = None

    def __post_init__(self):
        _require_id(self.event_id, "event_id", None)
        _require_id(self.user_id, "user_id", self.event_id)
        _require_id(self.product_id, "product_id", self.event_id)
        if not isinstance(self.direction, Direction):
            raise ValidationError(f"bad direction {self.direction!r}", self.event_id)
        _require_ts(self.timestamp, "timestamp", self.event_id)


@dataclass(frozen=True, slots=True)
class ImpressionEvent:
    event_id: str
    user_id: str
    product_id: str
    source: Source
    timestamp: int
    similarity_score: Optional[float] = None
    variant: Optional[str] = None

    def __post_init__(self):
        _require_id(self.event_id, "event_id", None)
        _require_id(self.user_id, "user_id", self.event_id)
        _require_id(self.product_id, "product_id", self.event_id)
        if not isinstance(self.source, Source):
            raise ValidationError(f"bad source {self.source!r}", self.event_id)
        _require_ts(self.timestamp, "timestamp", self.event_id)
        if self.source is Source.RECOMMENDER:
            s = self.similarity_score
            if s is None or isinstance(s, bool) or not isinstance(s, (int, float)) or not 0.0 <= s <= 1.0:
                raise ValidationError("recommender impression needs similarity_score in [0, 1]", self.event_id)
        elif self.similarity_score is not None:
            raise ValidationError("fallback impression must not carry a similarity_score", self.event_id)


@dataclass(frozen=True, slots=True)
class ReferralClickEvent:
    event_id: str
    user_id: str
    product_id: str
    timestamp: int
    variant: Optional[str] = None

    def __post_init__(self):
        _require_id(self.event_id, "event_id", None)
        _require_id(self.user_id, "user_id", self.event_id)
        _require_id(self.product_id, "product_id", self.event_id)
        _require_ts(self.timestamp, "timestamp", self.event_id)


@dataclass(frozen=True, slots=True)
class SessionEvent:
    event_id: str
    user_id: str
    session_start: int
    session_end: int
    variant: Optional[str] = None

    def __post_init__(self):
        _require_id(self.event_id, "event_id", None)
        _require_id(self.user_id, "user_id", self.event_id)
        _require_ts(self.session_start, "session_start", self.event_id)
        _require_ts(self.session_end, "session_end", self.event_id)
        if self.session_end < self.session_start:
            raise ValidationError("session_end precedes session_start", self.event_id)

    @property
    def timestamp(self) -> int:
        return self.session_start


Event = Union[SwipeEvent, ImpressionEvent, ReferralClickEvent, SessionEvent]


@dataclass(frozen=True, slots=True)
class RaidVector:
    """Sparse boolean vector: the set of product indices a user raided."""

    dim: int
    indices: frozenset

    def __len__(self) -> int:
        return len(self.indices)

    def to_dense(self) -> list[int]:
        out = [0] * self.dim
        for i in self.indices:
            out[i] = 1
        return out


# (timestamp, event_id, direction) of the swipe that currently owns a cell
Cell = tuple[int, str, Direction]


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Immutable user x product swipe matrix.

    Users and products are sorted by id. ``raids`` and ``dislikes`` hold
    ``(user_index, product_index)`` pairs and never intersect. Build one
    with :func:`build_matrix` or :meth:`from_cells`.
    """

    users: tuple[str, ...]
    products: tuple[str, ...]
    raids: frozenset
    dislikes: frozenset
    cells: Mapping[tuple[str, str], Cell] = field(repr=False)
    user_index: Mapping[str, int] = field(repr=False)
    product_index: Mapping[str, int] = field(repr=False)
    user_raids: tuple[frozenset, ...] = field(repr=False)
    user_swiped: tuple[frozenset, ...] = field(repr=False)
    # inverted index: product index -> user indices that raided it
    raiders: tuple[tuple[int, ...], ...] = field(repr=False)
    # latest swipe timestamp in the matrix, 0 when empty
    as_of: int = 0

    @classmethod
    def from_cells(cls, cells: Mapping[tuple[str, str], Cell]) -> "InteractionMatrix":
        users = tuple(sorted({u for u, _ in cells}))
        products = tuple(sorted({p for _, p in cells}))
        uix = {u: i for i, u in enumerate(users)}
        pix = {p: i for i, p in enumerate(products)}
        raids, dislikes = set(), set()
        per_user_raids: list[set] = [set() for _ in users]
        per_user_swiped: list[set] = [set() for _ in users]
        per_product: list[list[int]] = [[] for _ in products]
        for (u, p), (_, _, direction) in cells.items():
            ui, pi = uix[u], pix[p]
            per_user_swiped[ui].add(pi)
            if direction is Direction.RAID:
                raids.add((ui, pi))
                per_user_raids[ui].add(pi)
                per_product[pi].append(ui)
            else:
                dislikes.add((ui, pi))
        return cls(
            users=users,
            products=products,
            raids=frozenset(raids),
            dislikes=frozenset(dislikes),
            cells=dict(cells),
            user_index=uix,
            product_index=pix,
            user_raids=tuple(frozenset(s) for s in per_user_raids),
            user_swiped=tuple(frozenset(s) for s in per_user_swiped),
            raiders=tuple(tuple(sorted(us)) for us in per_product),
            as_of=max((c[0] for c in cells.values()), default=0),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionMatrix):
            return NotImplemented
        return (
            self.users == other.users
            and self.products == other.products
            and self.raids == other.raids
            and self.dislikes == other.dislikes
        )

    __hash__ = None

    def index_of(self, user_id: str) -> int:
        try:
            return self.user_index[user_id]
        except KeyError:
            raise UnknownUserError(user_id) from None

    def __contains__(self, user_id: str) -> bool:
        return user_id in self.user_index


def canonical(product_id: str, clusters: Optional[Mapping[str, str]]) -> str:
    if clusters is None:
        return product_id
    return clusters.get(product_id, product_id)


def reduce_swipes(
    events: Iterable[SwipeEvent],
    clusters: Optional[Mapping[str, str]] = None,
    cells: Optional[dict] = None,
) -> dict[tuple[str, str], Cell]:
    """Fold swipes into latest-wins cells; ties on timestamp go to the larger event_id."""
    cells = {} if cells is None else dict(cells)
    for ev in events:
        if not isinstance(ev, SwipeEvent):
            raise ValidationError(f"expected SwipeEvent, got {type(ev).__name__}", getattr(ev, "event_id", None))
        if not isinstance(ev.direction, Direction):
            raise ValidationError(f"bad direction {ev.direction!r}", ev.event_id)
        key = (ev.user_id, canonical(ev.product_id, clusters))
        new = (ev.timestamp, ev.event_id, ev.direction)
        old = cells.get(key)
        if old is None or (new[0], new[1]) > (old[0], old[1]):
            cells[key] = new
    return cells


def build_matrix(
    events: Iterable[SwipeEvent], clusters: Optional[Mapping[str, str]] = None
) -> InteractionMatrix:
    """Build the interaction matrix from swipe events.

    ``clusters`` maps product ids to canonical ids (see :mod:`swipecf.dedup`);
    products absent from it are their own canonical id.
    """
    return InteractionMatrix.from_cells(reduce_swipes(events, clusters))


def raid_vector(matrix: InteractionMatrix, user_id: str) -> RaidVector:
    return RaidVector(len(matrix.products), matrix.user_raids[matrix.index_of(user_id)])
