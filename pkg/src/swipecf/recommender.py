"""Single-neighbor collaborative filtering recommendations and the mixed feed."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .errors import ValidationError
from .model import InteractionMatrix, Source
from .similarity import score_all

DEFAULT_N = 5


class NoRecommendationReason(str, enum.Enum):
    COLD_USER = "ColdUser"
    NO_QUALIFIED_NEIGHBOR = "NoQualifiedNeighbor"
    NO_FRESH_PRODUCTS = "NoFreshProducts"


@dataclass(frozen=True, slots=True)
class RecommendationRecord:
    target: str
    neighbor: str
    similarity: float
    queued: tuple[str, ...]
    created_at: int


@dataclass(frozen=True, slots=True)
class NoRecommendation:
    target: str
    reason: NoRecommendationReason


RecommendationOutcome = Union[RecommendationRecord, NoRecommendation]


@dataclass(frozen=True, slots=True)
class FeedItem:
    product_id: str
    source: Source
    similarity: Optional[float] = None


def _fresh_products(matrix: InteractionMatrix, neighbor_ix: int, blocked: frozenset) -> list[str]:
    """Neighbor's raids the target has not seen, latest raid first."""
    neighbor = matrix.users[neighbor_ix]
    products = matrix.products
    fresh = [products[pi] for pi in matrix.user_raids[neighbor_ix] if pi not in blocked]
    cells = matrix.cells
    fresh.sort(key=lambda p: (-cells[(neighbor, p)][0], p))
    return fresh


def recommend(
    matrix: InteractionMatrix,
    target: str,
    n: int = DEFAULT_N,
    *,
    exclude: Iterable[str] = (),
    created_at: Optional[int] = None,
) -> RecommendationOutcome:
    """Queue up to ``n`` products raided by the target's most similar neighbor.

    Products the target already swiped in either direction, or listed in
    ``exclude``, are never queued. When the best neighbor has nothing fresh,
    the next-ranked one is used. ``created_at`` defaults to the matrix's
    latest swipe time so the outcome is a pure function of its inputs.
    """
    if not isinstance(n, int) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    ti = matrix.index_of(target)
    if not matrix.user_raids[ti]:
        return NoRecommendation(target, NoRecommendationReason.COLD_USER)
    ranked = score_all(matrix, target)
    if not ranked:
        return NoRecommendation(target, NoRecommendationReason.NO_QUALIFIED_NEIGHBOR)

    pix = matrix.product_index
    blocked = matrix.user_swiped[ti] | {pix[p] for p in exclude if p in pix}
    for neighbor in ranked:
        # score_all only returns users with overlap >= 1, so score > 0 here
        fresh = _fresh_products(matrix, matrix.user_index[neighbor.user_id], blocked)
        if fresh:
            return RecommendationRecord(
                target=target,
                neighbor=neighbor.user_id,
                similarity=neighbor.score,
                queued=tuple(fresh[:n]),
                created_at=matrix.as_of if created_at is None else created_at,
            )
    return NoRecommendation(target, NoRecommendationReason.NO_FRESH_PRODUCTS)


def feed(
    matrix: InteractionMatrix,
    target: str,
    n: int,
    fallback_pool: Iterable[str],
    *,
    exclude: Iterable[str] = (),
) -> list[FeedItem]:
    """Recommended products first, topped up from ``fallback_pool`` to ``n`` items.

    Users missing from the matrix are treated as cold. Fallback products the
    target has swiped or that are in ``exclude`` are skipped.
    """
    pool = list(fallback_pool)
    if not pool:
        raise ValidationError("fallback_pool must be non-empty")
    exclude = set(exclude)
    items: list[FeedItem] = []
    seen: set[str] = set()
    swiped: frozenset = frozenset()
    if target in matrix:
        ti = matrix.index_of(target)
        swiped = frozenset(matrix.products[pi] for pi in matrix.user_swiped[ti])
        outcome = recommend(matrix, target, n, exclude=exclude)
        if isinstance(outcome, RecommendationRecord):
            for p in outcome.queued:
                items.append(FeedItem(p, Source.RECOMMENDER, outcome.similarity))
                seen.add(p)
    for p in pool:
        if len(items) >= n:
            break
        if p in seen or p in swiped or p in exclude:
            continue
        items.append(FeedItem(p, Source.FALLBACK))
        seen.add(p)
    return items
