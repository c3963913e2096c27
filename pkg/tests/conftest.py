import itertools
import random

import pytest

from swipecf.model import Direction, ImpressionEvent, ReferralClickEvent, SessionEvent, Source, SwipeEvent

T0 = 1_680_307_200_000  # 2023-04-01T00:00:00Z

_ids = itertools.count()


def eid():
    return f"t{next(_ids):09d}"


def raid(user, product, ts=T0, variant=None, event_id=None):
    return SwipeEvent(event_id or eid(), user, product, Direction.RAID, ts, variant)


def dislike(user, product, ts=T0, variant=None, event_id=None):
    return SwipeEvent(event_id or eid(), user, product, Direction.DISLIKE, ts, variant)


def shown(user, product, ts=T0, similarity=None, variant=None):
    source = Source.FALLBACK if similarity is None else Source.RECOMMENDER
    return ImpressionEvent(eid(), user, product, source, ts, similarity, variant)


def click(user, product, ts=T0, variant=None):
    return ReferralClickEvent(eid(), user, product, ts, variant)


def session(user, start, end, variant=None):
    return SessionEvent(eid(), user, start, end, variant)


def random_swipes(rng: random.Random, n_users, n_products, n_events, raid_share=0.6):
    out = []
    for i in range(n_events):
        d = Direction.RAID if rng.random() < raid_share else Direction.DISLIKE
        out.append(
            SwipeEvent(
                f"r{i:07d}",
                f"u{rng.randrange(n_users):03d}",
                f"p{rng.randrange(n_products):04d}",
                d,
                T0 + rng.randrange(50_000),
            )
        )
    return out


@pytest.fixture
def rng():
    return random.Random(20240417)


def funnel_log(variant, total_shown, recommended, positive, user_prefix="u"):
    """Labeled impressions reproducing given funnel counts, one raid per positive impression."""
    out = []
    for i in range(total_shown):
        user, product, ts = f"{user_prefix}{i % 997:04d}", f"p{i:06d}", T0 + i
        if i < recommended:
            out.append(ImpressionEvent(f"{variant}-i{i}", user, product, Source.RECOMMENDER, ts, 0.5, variant))
            if i < positive:
                out.append(SwipeEvent(f"{variant}-s{i}", user, product, Direction.RAID, ts + 1, variant))
        else:
            out.append(ImpressionEvent(f"{variant}-i{i}", user, product, Source.FALLBACK, ts, None, variant))
    return out


ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, title, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title}  [{detail}]")
