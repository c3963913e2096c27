"""Cosine similarity over raid vectors and K-nearest-neighbor search."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .errors import ValidationError
from .model import InteractionMatrix, RaidVector


@dataclass(frozen=True, slots=True)
class NeighborQuery:
    target: str
    k: int = 1
    # exclusive lower bound: a neighbor must score strictly above it
    min_similarity: float = 0.0

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k!r}")
        if not 0.0 <= self.min_similarity <= 1.0:
            raise ValidationError(f"min_similarity must lie in [0, 1], got {self.min_similarity!r}")


@dataclass(frozen=True, slots=True)
class RankedNeighbor:
    user_id: str
    score: float
    overlap: int


def _cosine(overlap: int, size_a: int, size_b: int) -> float:
    # every score in the package goes through this expression so the
    # indexed search and the pairwise function agree bit for bit
    if size_a == 0 or size_b == 0:
        return 0.0
    return overlap / math.sqrt(size_a * size_b)


def cosine_similarity(a: RaidVector, b: RaidVector) -> float:
    """Cosine of the angle between two boolean vectors.

    For 0/1 vectors the dot product is the size of the shared support and
    each norm is the square root of the support size. An all-zero vector
    has similarity 0 with everything.
    """
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} != {b.dim}")
    return _cosine(len(a.indices & b.indices), len(a.indices), len(b.indices))


def score_all(matrix: InteractionMatrix, target: str) -> list[RankedNeighbor]:
    """Every user sharing at least one raid with ``target``, fully ranked.

    Uses the product -> raiders index, so the work is bounded by the raid
    lists of co-raiding users rather than by the size of the user base.
    """
    ti = matrix.index_of(target)
    mine = matrix.user_raids[ti]
    if not mine:
        return []
    overlaps: Counter = Counter()
    for pi in mine:
        overlaps.update(matrix.raiders[pi])
    del overlaps[ti]
    size_t = len(mine)
    users, user_raids = matrix.users, matrix.user_raids
    sizes = {ui: len(user_raids[ui]) for ui in overlaps}
    # Rank on ov^2 / |u|, the squared cosine without the constant 1/|t|,
    # because equal cosines can differ in the last float bit. Two distinct
    # ratios a/b and c/d differ by at least 1/(bd), so the correctly rounded
    # float quotient orders them exactly while ov^2 * |u| stays below 2^52.
    if size_t * size_t * max(sizes.values(), default=1) < 2**52:
        key = lambda ui, ov: -(ov * ov / sizes[ui])
    else:
        key = lambda ui, ov: -Fraction(ov * ov, sizes[ui])
    order = sorted(overlaps.items(), key=lambda item: (key(*item), -item[1], users[item[0]]))
    return [RankedNeighbor(users[ui], _cosine(ov, size_t, sizes[ui]), ov) for ui, ov in order]


def nearest_neighbors(matrix: InteractionMatrix, query: NeighborQuery) -> list[RankedNeighbor]:
    """Top ``query.k`` neighbors scoring above ``query.min_similarity``.

    Ordered by score descending, then overlap descending, then user id.
    A target without raids gets an empty list.
    """
    out = []
    for n in score_all(matrix, query.target):
        if n.score <= query.min_similarity:
            continue
        out.append(n)
        if len(out) == query.k:
            break
    return out
