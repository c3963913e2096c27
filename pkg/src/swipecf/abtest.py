"""Deterministic variant assignment and same-window funnel comparison."""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import ValidationError
from .evaluation import (
    ALL_TIME,
    FunnelReport,
    UserMetricsReport,
    Window,
    funnel,
    in_window,
    positive_action_predicate,
    user_metrics,
)
from .model import Event, ImpressionEvent


@dataclass(frozen=True)
class Experiment:
    name: str
    variants: tuple[tuple[str, float], ...]
    salt: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple((str(l), float(w)) for l, w in self.variants))
        labels = [l for l, _ in self.variants]
        if not labels:
            raise ValidationError("experiment needs at least one variant")
        if len(set(labels)) != len(labels):
            raise ValidationError("variant labels must be unique")
        if any(w <= 0 for _, w in self.variants):
            raise ValidationError("variant weights must be positive")
        if abs(sum(w for _, w in self.variants) - 1.0) > 1e-9:
            raise ValidationError("variant weights must sum to 1")

    @property
    def labels(self) -> list[str]:
        return [l for l, _ in self.variants]

    @classmethod
    def from_dict(cls, doc: dict) -> "Experiment":
        try:
            raw = doc["variants"]
            if isinstance(raw, dict):
                variants = list(raw.items())
            else:
                variants = [(v["label"], v["weight"]) if isinstance(v, dict) else tuple(v) for v in raw]
            return cls(name=doc["name"], variants=tuple(variants), salt=doc.get("salt", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad experiment document: {exc}") from exc

    @classmethod
    def load(cls, path) -> "Experiment":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def bucket_point(salt: str, user_id: str) -> float:
    """Stable map of (salt, user_id) to [0, 1)."""
    digest = hashlib.sha256(f"{salt}\x00{user_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def assign_variant(experiment: Experiment, user_id: str) -> str:
    x = bucket_point(experiment.salt, user_id)
    cumulative = 0.0
    for label, weight in experiment.variants:
        cumulative += weight
        if x < cumulative:
            return label
    # weights summing to 1 - epsilon can leave a sliver at the top
    return experiment.variants[-1][0]


@dataclass(frozen=True)
class VariantComparison:
    experiment: str
    window: Window
    funnels: dict[str, FunnelReport]
    users: dict[str, UserMetricsReport]
    unattributed: dict[str, int] = field(default_factory=dict)

    def best_by_precision(self) -> str | None:
        scored = sorted((-f.precision, label) for label, f in self.funnels.items() if f.precision is not None)
        return scored[0][1] if scored else None

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "window": self.window.to_dict(),
            "variants": {
                label: {
                    "funnel": {**asdict(self.funnels[label]), "display": self.funnels[label].display()},
                    "user": asdict(self.users[label]),
                }
                for label in self.funnels
            },
            "unattributed": dict(self.unattributed),
            "best_by_precision": self.best_by_precision(),
        }


def compare(events: Sequence[Event], experiment: Experiment, window: Window = ALL_TIME) -> VariantComparison:
    """Split the log by variant label and evaluate every split over one shared window.

    Events without a label, or with a label the experiment does not know,
    are left out and tallied by type under ``unattributed``. There is no way
    to compare a variant against a baseline from another window.
    """
    labels = experiment.labels
    splits: dict[str, list[Event]] = {l: [] for l in labels}
    unattributed: Counter = Counter()
    for ev in events:
        bucket = splits.get(ev.variant)
        if bucket is None:
            if ev.timestamp in window:
                unattributed[type(ev).__name__] += 1
            continue
        bucket.append(ev)
    funnels, users = {}, {}
    for label in labels:
        sub = splits[label]
        positives = positive_action_predicate(sub)
        funnels[label] = funnel((e for e in in_window(sub, window) if isinstance(e, ImpressionEvent)), positives)
        users[label] = user_metrics(sub, window)
    return VariantComparison(experiment.name, window, funnels, users, dict(sorted(unattributed.items())))
