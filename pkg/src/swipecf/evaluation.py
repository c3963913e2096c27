"""Dataset, system and user perspective metrics over an event log."""
from __future__ import annotations

import datetime as dt
import functools
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import ValidationError
from .model import (
    Direction,
    Event,
    ImpressionEvent,
    ReferralClickEvent,
    SessionEvent,
    Source,
    SwipeEvent,
    canonical,
)

PositivePredicate = Callable[[ImpressionEvent], bool]


@dataclass(frozen=True, slots=True)
class Window:
    """Half-open time range ``[start, end)`` in epoch milliseconds. None means unbounded."""

    start: Optional[int] = None
    end: Optional[int] = None

    def __contains__(self, ts: int) -> bool:
        return (self.start is None or ts >= self.start) and (self.end is None or ts < self.end)

    def to_dict(self) -> dict:
        return {"start_ms": self.start, "end_ms": self.end}


ALL_TIME = Window()


def in_window(events: Iterable[Event], window: Window) -> list[Event]:
    return [e for e in events if e.timestamp in window]


# --- dataset perspective ---------------------------------------------------


@dataclass(frozen=True, slots=True)
class DatasetStats:
    total_users: int
    total_products: int
    total_swipes: int
    products_swiped_min_twice: int
    products_raided: int

    def __post_init__(self):
        for name in ("total_users", "total_products", "total_swipes", "products_swiped_min_twice", "products_raided"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.products_swiped_min_twice > self.total_products or self.products_raided > self.total_products:
            raise ValidationError("product counts exceed total_products")
        if self.total_swipes < self.products_swiped_min_twice:
            raise ValidationError("total_swipes is below products_swiped_min_twice")

    @classmethod
    def from_events(
        cls,
        swipes: Iterable[SwipeEvent],
        total_products: int,
        total_users: int,
        clusters: Optional[Mapping[str, str]] = None,
    ) -> "DatasetStats":
        """Count swipes from the log; denominators come from the catalogue and user registry.

        Every swipe event counts, repeats included. Products are counted by
        canonical id when ``clusters`` is given.
        """
        per_product: Counter = Counter()
        raided: set[str] = set()
        n = 0
        for ev in swipes:
            if not isinstance(ev, SwipeEvent):
                continue
            n += 1
            p = canonical(ev.product_id, clusters)
            per_product[p] += 1
            if ev.direction is Direction.RAID:
                raided.add(p)
        return cls(
            total_users=total_users,
            total_products=total_products,
            total_swipes=n,
            products_swiped_min_twice=sum(1 for c in per_product.values() if c >= 2),
            products_raided=len(raided),
        )


def sparsity(stats: DatasetStats) -> float:
    """Percentage of the user x product matrix with no swipe."""
    if stats.total_products <= 0 or stats.total_users <= 0:
        raise ValidationError("sparsity needs total_products > 0 and total_users > 0")
    return (1 - stats.total_swipes / (stats.total_products * stats.total_users)) * 100


def catalogue_coverage(stats: DatasetStats) -> float:
    """Percentage of catalogue products swiped at least twice."""
    if stats.total_products <= 0:
        raise ValidationError("catalogue_coverage needs total_products > 0")
    return stats.products_swiped_min_twice / stats.total_products * 100


def coverage(stats: DatasetStats) -> float:
    """Percentage of catalogue products raided at least once."""
    if stats.total_products <= 0:
        raise ValidationError("coverage needs total_products > 0")
    return stats.products_raided / stats.total_products * 100


def dataset_report(stats: DatasetStats) -> dict:
    return {
        **asdict(stats),
        "sparsity": sparsity(stats),
        "catalogue_coverage": catalogue_coverage(stats),
        "coverage": coverage(stats),
    }


# --- system perspective ----------------------------------------------------


def precision(n_relevant_selected: int, n_selected: int) -> Optional[float]:
    """Share of selected items that were relevant; None when nothing was selected."""
    if n_relevant_selected < 0 or n_selected < 0:
        raise ValidationError("counts must be non-negative")
    if n_relevant_selected > n_selected:
        raise ValidationError("more relevant items than selected items")
    if n_selected == 0:
        return None
    return n_relevant_selected / n_selected


def positive_action_predicate(events: Iterable[Event]) -> PositivePredicate:
    """An impression is positive if the same user raided or clicked the product at or after it."""
    latest: dict[tuple[str, str], int] = {}
    for ev in events:
        if (isinstance(ev, SwipeEvent) and ev.direction is Direction.RAID) or isinstance(ev, ReferralClickEvent):
            key = (ev.user_id, ev.product_id)
            if ev.timestamp > latest.get(key, -(2**63)):
                latest[key] = ev.timestamp

    def is_positive(imp: ImpressionEvent) -> bool:
        t = latest.get((imp.user_id, imp.product_id))
        return t is not None and t >= imp.timestamp

    return is_positive


@dataclass(frozen=True, slots=True)
class SimilarityBucket:
    lower: float
    upper: float
    impressions: int
    positives: int
    precision: Optional[float]


def _bucket_count(bucket_width: float) -> int:
    n = round(1 / bucket_width)
    if n < 1 or abs(n * bucket_width - 1) > 1e-9:
        raise ValidationError(f"bucket_width must divide 1 evenly, got {bucket_width!r}")
    return n


def bucket_index(score: float, n_buckets: int) -> int:
    i = min(int(score * n_buckets), n_buckets - 1)
    # guard against float rounding right at a boundary
    if i + 1 < n_buckets and score >= (i + 1) / n_buckets:
        i += 1
    elif i > 0 and score < i / n_buckets:
        i -= 1
    return i


def similarity_precision_buckets(
    impressions: Iterable[ImpressionEvent],
    positives: PositivePredicate,
    bucket_width: float = 0.05,
) -> list[SimilarityBucket]:
    """Precision of recommender impressions grouped by similarity interval.

    Buckets are ``[i*w, (i+1)*w)`` with the last one closed at 1.0. Fallback
    impressions are ignored.
    """
    n = _bucket_count(bucket_width)
    shown = [0] * n
    hits = [0] * n
    for imp in impressions:
        if not isinstance(imp, ImpressionEvent) or imp.source is not Source.RECOMMENDER:
            continue
        i = bucket_index(imp.similarity_score, n)
        shown[i] += 1
        if positives(imp):
            hits[i] += 1
    return [
        SimilarityBucket(i / n, (i + 1) / n, shown[i], hits[i], precision(hits[i], shown[i]))
        for i in range(n)
    ]


@dataclass(frozen=True, slots=True)
class FunnelReport:
    total_shown: int
    recommended_shown: int
    positive_actions_on_recommended: int
    recommended_share: Optional[float]  # percent
    precision: Optional[float]  # percent

    @classmethod
    def from_counts(cls, total_shown: int, recommended_shown: int, positive_actions: int) -> "FunnelReport":
        if recommended_shown > total_shown:
            raise ValidationError("recommended_shown exceeds total_shown")
        share = precision(recommended_shown, total_shown)
        prec = precision(positive_actions, recommended_shown)
        return cls(
            total_shown=total_shown,
            recommended_shown=recommended_shown,
            positive_actions_on_recommended=positive_actions,
            recommended_share=None if share is None else share * 100,
            precision=None if prec is None else prec * 100,
        )

    def display(self) -> dict:
        """Rounded view: share to one decimal, precision to a whole percent."""
        return {
            "total_shown": self.total_shown,
            "recommended_share": None if self.recommended_share is None else round(self.recommended_share, 1),
            "recommended_shown": self.recommended_shown,
            "precision": None if self.precision is None else round(self.precision),
            "positive_actions": self.positive_actions_on_recommended,
        }


def funnel(impressions: Iterable[ImpressionEvent], positives: PositivePredicate) -> FunnelReport:
    total = rec = pos = 0
    for imp in impressions:
        if not isinstance(imp, ImpressionEvent):
            continue
        total += 1
        if imp.source is Source.RECOMMENDER:
            rec += 1
            if positives(imp):
                pos += 1
    return FunnelReport.from_counts(total, rec, pos)


# --- user perspective ------------------------------------------------------


@dataclass(frozen=True, slots=True)
class UserMetricsReport:
    avg_session_minutes: float = 0.0
    avg_swipes_per_new_user: float = 0.0
    referral_clicks: int = 0
    returning_users: int = 0
    monthly_swipes: dict = field(default_factory=dict)
    # None when no user ever received a recommendation
    avg_swipes_to_first_recommendation: Optional[float] = None
    users_with_recommendation: int = 0


def month_of(ts_ms: int) -> str:
    return _month_of_day(ts_ms // 86_400_000)


@functools.lru_cache(maxsize=4096)
def _month_of_day(day: int) -> str:
    return dt.datetime.fromtimestamp(day * 86_400, tz=dt.timezone.utc).strftime("%Y-%m")


def user_metrics(events: Sequence[Event], period: Window = ALL_TIME) -> UserMetricsReport:
    """Time spent, swipes in a user's first session, referral clicks, returns and monthly volume.

    A user is new in ``period`` when their earliest session (over the whole
    log) starts inside it. Swipes-to-first-recommendation counts a user's
    swipes strictly before their first recommender impression, for users
    whose first recommendation falls inside ``period``.
    """
    sessions: dict[str, list[SessionEvent]] = defaultdict(list)
    swipes_by_user: dict[str, list[int]] = defaultdict(list)
    first_rec: dict[str, int] = {}
    for ev in events:
        if isinstance(ev, SessionEvent):
            sessions[ev.user_id].append(ev)
        elif isinstance(ev, SwipeEvent):
            swipes_by_user[ev.user_id].append(ev.timestamp)
        elif isinstance(ev, ImpressionEvent) and ev.source is Source.RECOMMENDER:
            if ev.timestamp < first_rec.get(ev.user_id, 2**63):
                first_rec[ev.user_id] = ev.timestamp

    in_period = [s for ss in sessions.values() for s in ss if s.session_start in period]
    avg_minutes = (
        sum(s.session_end - s.session_start for s in in_period) / len(in_period) / 60000 if in_period else 0.0
    )

    new_user_swipes = []
    for user, ss in sessions.items():
        first = min(ss, key=lambda s: (s.session_start, s.session_end, s.event_id))
        if first.session_start not in period:
            continue
        new_user_swipes.append(
            sum(1 for t in swipes_by_user.get(user, ()) if first.session_start <= t <= first.session_end)
        )

    per_user_sessions = Counter(s.user_id for s in in_period)
    monthly = Counter(
        month_of(ev.timestamp) for ev in events if isinstance(ev, SwipeEvent) and ev.timestamp in period
    )
    clicks = sum(1 for ev in events if isinstance(ev, ReferralClickEvent) and ev.timestamp in period)

    to_first = [
        sum(1 for t in swipes_by_user.get(user, ()) if t < t_rec)
        for user, t_rec in first_rec.items()
        if t_rec in period
    ]
    return UserMetricsReport(
        avg_session_minutes=avg_minutes,
        avg_swipes_per_new_user=sum(new_user_swipes) / len(new_user_swipes) if new_user_swipes else 0.0,
        referral_clicks=clicks,
        returning_users=sum(1 for c in per_user_sessions.values() if c >= 2),
        monthly_swipes=dict(sorted(monthly.items())),
        avg_swipes_to_first_recommendation=sum(to_first) / len(to_first) if to_first else None,
        users_with_recommendation=len(to_first),
    )


# --- full pass -------------------------------------------------------------


def evaluate(
    events: Sequence[Event],
    *,
    total_products: Optional[int] = None,
    total_users: Optional[int] = None,
    clusters: Optional[Mapping[str, str]] = None,
    window: Window = ALL_TIME,
    bucket_width: float = 0.05,
) -> dict:
    """Every metric in one JSON-ready payload.

    Without explicit denominators the distinct products and users seen in
    the whole log are used.
    """
    if total_products is None:
        total_products = len({canonical(e.product_id, clusters) for e in events if hasattr(e, "product_id")})
    if total_users is None:
        total_users = len({e.user_id for e in events})
    scoped = in_window(events, window)
    stats = DatasetStats.from_events(scoped, total_products, total_users, clusters)
    try:
        dataset = dataset_report(stats)
    except ValidationError:
        dataset = {**asdict(stats), "sparsity": None, "catalogue_coverage": None, "coverage": None}
    positives = positive_action_predicate(events)
    impressions = [e for e in scoped if isinstance(e, ImpressionEvent)]
    report = funnel(impressions, positives)
    return {
        "window": window.to_dict(),
        "dataset": dataset,
        "funnel": {**asdict(report), "display": report.display()},
        "buckets": [asdict(b) for b in similarity_precision_buckets(impressions, positives, bucket_width)],
        "user": asdict(user_metrics(events, window)),
    }
