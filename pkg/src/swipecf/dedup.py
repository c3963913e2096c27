"""Near-duplicate product clustering by normalized title edit distance.

Color and size variants of one product usually share almost the whole
title. Clustering maps each variant to a canonical product id so their
swipes land in the same matrix column.
"""
from __future__ import annotations

import csv
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import ValidationError

DEFAULT_THRESHOLD = 0.85


@dataclass(frozen=True, slots=True)
class ProductRecord:
    product_id: str
    title: str
    referral_url: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.product_id, str) or not self.product_id:
            raise ValidationError("product_id must be a non-empty string")
        if not isinstance(self.title, str):
            raise ValidationError(f"title of {self.product_id!r} must be a string")


class ProductClusterMap(Mapping):
    """product_id -> canonical product_id. Canonical ids map to themselves."""

    def __init__(self, mapping: Mapping[str, str], threshold: float = DEFAULT_THRESHOLD):
        self._map = dict(mapping)
        self.threshold = threshold
        for p, c in self._map.items():
            if self._map.get(c, c) != c:
                raise ValidationError(f"cluster map is not idempotent at {p!r} -> {c!r}")

    def __getitem__(self, product_id: str) -> str:
        return self._map[product_id]

    def __iter__(self) -> Iterator[str]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __repr__(self) -> str:
        return f"ProductClusterMap({len(self._map)} products, {self.n_clusters} clusters, threshold={self.threshold})"

    def canonical(self, product_id: str) -> str:
        return self._map.get(product_id, product_id)

    @property
    def n_clusters(self) -> int:
        return len(set(self._map.values()))

    def clusters(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for p in sorted(self._map):
            out.setdefault(self._map[p], []).append(p)
        return out

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# threshold {self.threshold!r}\n")
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["product_id", "canonical_id"])
            for p in sorted(self._map):
                w.writerow([p, self._map[p]])

    @classmethod
    def read(cls, path) -> "ProductClusterMap":
        threshold = DEFAULT_THRESHOLD
        mapping = {}
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        rows = []
        for line in lines:
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "threshold":
                    threshold = float(parts[1])
                continue
            if line.strip():
                rows.append(line)
        for i, row in enumerate(csv.reader(rows, delimiter="\t")):
            if i == 0 and row == ["product_id", "canonical_id"]:
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}: expected two tab-separated columns, got {row!r}")
            mapping[row[0]] = row[1]
        return cls(mapping, threshold)


def normalize_title(title: str) -> str:
    out = " ".join(title.casefold().split())
    if not out:
        raise ValidationError(f"unusable title {title!r}")
    return out


def edit_distance(a: str, b: str, max_distance: Optional[int] = None) -> int:
    """Unit-cost Levenshtein distance.

    With ``max_distance`` the computation stays inside the diagonal band and
    returns ``max_distance + 1`` as soon as the distance is known to exceed it.
    """
    if len(a) < len(b):
        a, b = b, a
    la, lb = len(a), len(b)
    if max_distance is None:
        max_distance = la
    if la - lb > max_distance:
        return max_distance + 1
    if lb == 0:
        return la
    big = max_distance + 1
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        lo = max(1, i - max_distance)
        hi = min(lb, i + max_distance)
        cur = [big] * (lb + 1)
        if lo == 1:
            cur[0] = i
        ca = a[i - 1]
        row_min = cur[0] if lo == 1 else big
        for j in range(lo, hi + 1):
            cost = prev[j - 1] + (ca != b[j - 1])
            d = prev[j] + 1
            if d < cost:
                cost = d
            d = cur[j - 1] + 1
            if d < cost:
                cost = d
            cur[j] = cost
            if cost < row_min:
                row_min = cost
        if row_min > max_distance:
            return big
        prev = cur
    return min(prev[lb], big)


def title_similarity(a: str, b: str) -> float:
    """1 - edit_distance / longer length, on already-normalized titles."""
    m = max(len(a), len(b))
    if m == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / m


def _max_qualifying_distance(m: int, threshold: float) -> int:
    """Largest distance d with 1 - d/m > threshold, or -1 if none."""
    d = int((1.0 - threshold) * m) + 1
    while d >= 0 and not (1.0 - d / m > threshold):
        d -= 1
    return d


def _bag_distance(ca: Counter, cb: Counter) -> int:
    # lower bound on edit distance: unmatched characters on the larger side
    extra_a = sum((ca - cb).values())
    extra_b = sum((cb - ca).values())
    return max(extra_a, extra_b)


class _UnionFind:
    def __init__(self, items: Iterable[str]):
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller id as root so roots are canonical ids
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def cluster_products(products: Iterable[ProductRecord], threshold: float = DEFAULT_THRESHOLD) -> ProductClusterMap:
    """Single-link clustering of products whose titles are more than ``threshold`` similar.

    Pairs are pruned without losing any qualifying pair: titles are visited
    in length order and the scan for a title stops once the length gap alone
    rules out a match; a character-multiset bound then discards most of the
    rest before a banded edit distance settles the remainder.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValidationError(f"threshold must lie in (0, 1], got {threshold!r}")
    products = list(products)
    ids = [p.product_id for p in products]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate product_id in catalogue")
    uf = _UnionFind(ids)

    # identical normalized titles always merge; compare one representative each
    by_title: dict[str, list[str]] = {}
    for p in products:
        by_title.setdefault(normalize_title(p.title), []).append(p.product_id)
    for members in by_title.values():
        for other in members[1:]:
            uf.union(members[0], other)

    titles = sorted(by_title, key=lambda t: (len(t), t))
    bags = [Counter(t) for t in titles]
    for i, a in enumerate(titles):
        la = len(a)
        for j in range(i + 1, len(titles)):
            b = titles[j]
            lb = len(b)
            max_d = _max_qualifying_distance(lb, threshold)
            if lb - la > max_d:
                # la/lb only shrinks further along the sorted list
                break
            if _bag_distance(bags[i], bags[j]) > max_d:
                continue
            if edit_distance(a, b, max_d) <= max_d:
                uf.union(by_title[a][0], by_title[b][0])

    return ProductClusterMap({p: uf.find(p) for p in ids}, threshold)
