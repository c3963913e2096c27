"""Synthetic swipe logs from a latent style model.

Users and products get unit style vectors drawn around a few shared style
centers. A user raids a shown product with a probability that is a
monotone (clamped affine) function of the dot product of their vectors.
In engine mode the feed comes from :func:`swipecf.recommender.feed`, so
recommender impressions carry the similarity score the engine produced.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .abtest import Experiment, assign_variant
from .dedup import ProductRecord
from .errors import ValidationError
from .eventstore import EventStore
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
from .recommender import FeedItem, feed

_COLORS = ["white", "black", "oak", "grey", "sand", "green", "brass", "blue"]
_NOUNS = ["chair", "lamp", "vase", "rug", "sofa", "table", "mirror", "shelf", "cushion", "stool", "pendant", "plant pot"]
_STYLES = ["nordic", "rustic", "classic", "modern", "boho", "industrial", "minimal", "vintage"]


@dataclass(frozen=True)
class SimulationConfig:
    n_users: int = 200
    n_products: int = 500
    sessions_per_user: int = 5
    swipes_per_session: int = 20
    feed_policy: str = "engine"  # "engine" or "fallback"
    seed: int = 0
    feed_size: int = 5
    # user sessions between matrix rebuilds
    refresh_every: int = 20
    style_dimensions: int = 16
    n_styles: int = 6
    style_spread: float = 0.25
    raid_intercept: float = 0.02
    raid_slope: float = 0.9
    referral_click_probability: float = 0.1
    start_ms: int = 1_680_307_200_000  # 2023-04-01T00:00:00Z
    swipe_interval_ms: int = 900
    session_gap_ms: int = 3_600_000
    experiment: Optional[dict] = None

    def __post_init__(self):
        for name in ("n_users", "n_products", "sessions_per_user", "swipes_per_session", "feed_size", "refresh_every",
                     "style_dimensions", "n_styles"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if self.feed_policy not in ("engine", "fallback"):
            raise ValidationError(f"feed_policy must be 'engine' or 'fallback', got {self.feed_policy!r}")
        if self.raid_slope < 0:
            raise ValidationError("raid_slope must be non-negative so raid probability is monotone")

    @classmethod
    def from_dict(cls, doc: dict) -> "SimulationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown simulation config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "SimulationConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class LatentStyleModel:
    def __init__(self, users: dict, products: dict, intercept: float, slope: float, seed: int):
        self.users = users
        self.products = products
        self.intercept = intercept
        self.slope = slope
        self.seed = seed
        self.style_dimensions = len(next(iter(users.values())))

    @classmethod
    def clustered(cls, config: SimulationConfig) -> "LatentStyleModel":
        rng = np.random.default_rng([config.seed, 1])
        d = config.style_dimensions
        centers = _unit_rows(rng.normal(size=(config.n_styles, d)))
        u_style = rng.integers(config.n_styles, size=config.n_users)
        p_style = rng.integers(config.n_styles, size=config.n_products)
        u = _unit_rows(centers[u_style] + config.style_spread * rng.normal(size=(config.n_users, d)) / np.sqrt(d) * 3)
        p = _unit_rows(centers[p_style] + config.style_spread * rng.normal(size=(config.n_products, d)) / np.sqrt(d) * 3)
        users = {user_id(i): u[i] for i in range(config.n_users)}
        products = {product_id(i): p[i] for i in range(config.n_products)}
        return cls(users, products, config.raid_intercept, config.raid_slope, config.seed)

    def raid_probability(self, user: str, product: str) -> float:
        affinity = float(self.users[user] @ self.products[product])
        return min(1.0, max(0.0, self.intercept + self.slope * affinity))


def user_id(i: int) -> str:
    return f"u{i:05d}"


def product_id(i: int) -> str:
    return f"p{i:05d}"


def catalogue(config: SimulationConfig) -> list[ProductRecord]:
    """Deterministic titles; consecutive products often share a base title in another color."""
    rng = np.random.default_rng([config.seed, 2])
    out, base = [], None
    for i in range(config.n_products):
        if base is None or rng.random() < 0.6:
            base = f"{_STYLES[rng.integers(len(_STYLES))]} {_NOUNS[rng.integers(len(_NOUNS))]} {i}"
        color = _COLORS[rng.integers(len(_COLORS))]
        out.append(ProductRecord(product_id(i), f"{base} {color}", f"https://shop.example/{product_id(i)}"))
    return out


def generate(config: SimulationConfig, model: Optional[LatentStyleModel] = None) -> list[Event]:
    """Simulate every user's sessions. Same config and model, same events."""
    if model is None:
        model = LatentStyleModel.clustered(config)
    if len(model.users) != config.n_users or len(model.products) != config.n_products:
        raise ValidationError("model size does not match config")
    experiment = None if config.experiment is None else Experiment.from_dict(config.experiment)
    rng = np.random.default_rng([config.seed, 3])
    users = sorted(model.users)
    products = sorted(model.products)
    variants = {u: (assign_variant(experiment, u) if experiment else None) for u in users}

    events: list[Event] = []
    counter = 0

    def next_id() -> str:
        nonlocal counter
        counter += 1
        return f"e{counter:08d}"

    seen_by_user: dict[str, set[str]] = {u: set() for u in users}
    cells: dict = {}
    pending: list[SwipeEvent] = []
    matrix = InteractionMatrix.from_cells(cells)
    since_refresh = 0
    t = config.start_ms
    engine = config.feed_policy == "engine"

    for _ in range(config.sessions_per_user):
        for ui in rng.permutation(len(users)):
            u = users[ui]
            variant = variants[u]
            if engine and since_refresh >= config.refresh_every:
                cells = reduce_swipes(pending, cells=cells)
                pending = []
                matrix = InteractionMatrix.from_cells(cells)
                since_refresh = 0
            since_refresh += 1
            start = t
            pool = [products[i] for i in rng.permutation(len(products))]
            seen = seen_by_user[u]
            swiped_total = 0
            while swiped_total < config.swipes_per_session:
                want = min(config.feed_size, config.swipes_per_session - swiped_total)
                if engine:
                    # seen also covers swipes made since the last rebuild
                    items = feed(matrix, u, want, pool, exclude=seen)
                else:
                    items = [FeedItem(p, Source.FALLBACK) for p in pool if p not in seen][:want]
                if not items:
                    break
                for item in items:
                    p = item.product_id
                    seen.add(p)
                    events.append(ImpressionEvent(next_id(), u, p, item.source, t, item.similarity, variant))
                    t += config.swipe_interval_ms
                    raid = rng.random() < model.raid_probability(u, p)
                    direction = Direction.RAID if raid else Direction.DISLIKE
                    swipe = SwipeEvent(next_id(), u, p, direction, t, variant)
                    events.append(swipe)
                    pending.append(swipe)
                    swiped_total += 1
                    if raid and rng.random() < config.referral_click_probability:
                        events.append(ReferralClickEvent(next_id(), u, p, t + config.swipe_interval_ms // 2, variant))
                    t += config.swipe_interval_ms
            events.append(SessionEvent(next_id(), u, start, t, variant))
            t += config.swipe_interval_ms
        t += config.session_gap_ms
    return events


def write_store(config: SimulationConfig, out_dir, model: Optional[LatentStyleModel] = None) -> EventStore:
    """Generate a log and write it, with catalogue and user registry, as a fresh store."""
    out = Path(out_dir)
    if (out / "events.jsonl").exists() and (out / "events.jsonl").stat().st_size:
        raise ValidationError(f"{out} already holds an event log")
    if model is None:
        model = LatentStyleModel.clustered(config)
    events = generate(config, model)
    store = EventStore(out, create=True)
    store.append_many(events, strict=True)
    store.write_catalogue(catalogue(config))
    store.write_users(sorted(model.users))
    return store
