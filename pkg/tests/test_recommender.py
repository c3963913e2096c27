import math

import pytest

from conftest import T0, dislike, raid
from swipecf.errors import UnknownUserError, ValidationError
from swipecf.model import Source, build_matrix, raid_vector
from swipecf.recommender import (
    FeedItem,
    NoRecommendation,
    NoRecommendationReason,
    RecommendationRecord,
    feed,
    recommend,
)
from swipecf.similarity import cosine_similarity
from swipecf.simulator import SimulationConfig, generate


def test_single_neighbor_recommendation():
    m = build_matrix([raid("t", "p1", T0), raid("u2", "p1", T0), raid("u2", "p2", T0 + 2), raid("u2", "p3", T0 + 1)])
    out = recommend(m, "t")
    assert isinstance(out, RecommendationRecord)
    assert out.neighbor == "u2"
    # newest neighbor raid first
    assert out.queued == ("p2", "p3")
    assert math.isclose(out.similarity, 1 / math.sqrt(3), abs_tol=1e-15)
    assert abs(out.similarity - 0.577) < 5e-4


def test_cold_user():
    m = build_matrix([dislike("t", "p1"), raid("u2", "p1")])
    assert recommend(m, "t") == NoRecommendation("t", NoRecommendationReason.COLD_USER)


def test_no_qualified_neighbor():
    m = build_matrix([raid("t", "p1"), raid("u2", "p2")])
    assert recommend(m, "t").reason is NoRecommendationReason.NO_QUALIFIED_NEIGHBOR


def test_no_fresh_products():
    m = build_matrix([raid("t", "p1"), raid("t", "p2"), raid("u2", "p1"), raid("u2", "p2")])
    assert recommend(m, "t").reason is NoRecommendationReason.NO_FRESH_PRODUCTS


def test_walks_down_to_next_neighbor():
    # u2 is identical to t (nothing fresh); u3 is weaker but has p9
    events = [raid("t", "p1"), raid("t", "p2"), raid("u2", "p1"), raid("u2", "p2"), raid("u3", "p1"), raid("u3", "p9")]
    out = recommend(build_matrix(events), "t")
    assert out.neighbor == "u3" and out.queued == ("p9",)
    assert out.similarity == pytest.approx(0.5)


def test_disliked_products_are_not_queued():
    m = build_matrix([raid("t", "p1"), dislike("t", "p2"), raid("u2", "p1"), raid("u2", "p2"), raid("u2", "p3")])
    assert recommend(m, "t").queued == ("p3",)


def test_queue_capped_at_n():
    events = [raid("t", "p0")] + [raid("u2", f"p{i}", T0 + i) for i in range(10)]
    m = build_matrix(events)
    assert len(recommend(m, "t").queued) == 5
    assert recommend(m, "t", n=3).queued == ("p9", "p8", "p7")


def test_unknown_target():
    with pytest.raises(UnknownUserError):
        recommend(build_matrix([raid("u", "p")]), "nobody")


def test_feed_cold_user_is_pure_fallback():
    m = build_matrix([raid("u2", "p1")])
    pool = [f"p{i}" for i in range(1, 11)]
    items = feed(m, "newbie", 5, pool)
    assert [i.product_id for i in items] == pool[:5]
    assert all(i.source is Source.FALLBACK and i.similarity is None for i in items)


def test_feed_full_recommendation():
    events = [raid("t", "p0")] + [raid("u2", f"q{i}", T0 + i) for i in range(8)] + [raid("u2", "p0")]
    items = feed(build_matrix(events), "t", 5, ["f1", "f2"])
    assert [i.source for i in items] == [Source.RECOMMENDER] * 5


def test_feed_mixes_two_recommended_and_three_fallback():
    events = [raid("t", "p0"), raid("u2", "p0"), raid("u2", "r1", T0 + 2), raid("u2", "r2", T0 + 1)]
    m = build_matrix(events)
    sim = cosine_similarity(raid_vector(m, "t"), raid_vector(m, "u2"))
    items = feed(m, "t", 5, ["p0", "r1", "f1", "f2", "f3", "f4"])
    assert items == [
        FeedItem("r1", Source.RECOMMENDER, sim),
        FeedItem("r2", Source.RECOMMENDER, sim),
        FeedItem("f1", Source.FALLBACK),
        FeedItem("f2", Source.FALLBACK),
        FeedItem("f3", Source.FALLBACK),
    ]


def test_feed_requires_pool():
    with pytest.raises(ValidationError):
        feed(build_matrix([]), "t", 5, [])


def test_engine_driven_simulation_properties():
    cfg = SimulationConfig(n_users=40, n_products=120, sessions_per_user=3, swipes_per_session=10, seed=3, refresh_every=5)
    events = generate(cfg)
    swipes = [e for e in events if e.__class__.__name__ == "SwipeEvent"]
    recs = [e for e in events if getattr(e, "source", None) is Source.RECOMMENDER]
    assert recs
    first_seen = {}
    for e in swipes:
        first_seen.setdefault((e.user_id, e.product_id), e.timestamp)
    for imp in recs:
        # a recommended product is never one the user swiped before the impression
        assert first_seen[(imp.user_id, imp.product_id)] > imp.timestamp
    assert len({(e.user_id, e.product_id) for e in swipes}) == len(swipes)


def test_recommendation_is_deterministic():
    events = [raid("t", "p1"), raid("u2", "p1"), raid("u2", "p2"), raid("u3", "p1"), raid("u3", "p3")]
    m = build_matrix(events)
    assert recommend(m, "t") == recommend(build_matrix(list(reversed(events))), "t")


def test_logged_similarity_recomputes():
    events = [raid("t", "p1"), raid("t", "p4"), raid("u2", "p1"), raid("u2", "p2"), raid("u2", "p4"), raid("u3", "p4")]
    m = build_matrix(events)
    out = recommend(m, "t")
    assert abs(out.similarity - cosine_similarity(raid_vector(m, "t"), raid_vector(m, out.neighbor))) <= 1e-12
