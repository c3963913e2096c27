import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import T0, dislike, raid, random_swipes
from oracles import matrix_cells_by_scan
from swipecf.errors import UnknownUserError, ValidationError
from swipecf.model import Direction, SessionEvent, SwipeEvent, build_matrix, raid_vector


def test_empty_log():
    m = build_matrix([])
    assert m.users == () and m.products == () and not m.raids and not m.dislikes


def test_later_dislike_overwrites_raid():
    m = build_matrix([raid("u1", "p1", T0), dislike("u1", "p1", T0 + 5)])
    assert m.raids == frozenset()
    assert m.dislikes == {(0, 0)}


def test_timestamp_tie_goes_to_larger_event_id():
    a = raid("u1", "p1", T0, event_id="b")
    b = dislike("u1", "p1", T0, event_id="a")
    assert build_matrix([a, b]).raids == {(0, 0)}
    assert build_matrix([b, a]).raids == {(0, 0)}


def test_six_raids_match_per_pair_scan():
    events = [
        raid("u1", "p1"), raid("u1", "p2"), raid("u2", "p2"),
        raid("u2", "p3"), raid("u3", "p4"), raid("u3", "p1"),
    ]
    m = build_matrix(events)
    assert (len(m.users), len(m.products)) == (3, 4)
    assert len(m.raids) == 6
    expected = {k for k, v in matrix_cells_by_scan(events).items() if v == "raid"}
    got = {(m.users[u], m.products[p]) for u, p in m.raids}
    assert got == expected


def test_random_log_matches_per_pair_scan(rng):
    events = random_swipes(rng, 12, 30, 400)
    m = build_matrix(events)
    cells = matrix_cells_by_scan(events)
    assert {(m.users[u], m.products[p]) for u, p in m.raids} == {k for k, v in cells.items() if v == "raid"}
    assert {(m.users[u], m.products[p]) for u, p in m.dislikes} == {k for k, v in cells.items() if v == "dislike"}


def test_orderings_sorted():
    m = build_matrix([raid("b", "z"), raid("a", "y"), raid("c", "x")])
    assert m.users == ("a", "b", "c")
    assert m.products == ("x", "y", "z")


def test_cluster_map_merges_columns():
    m = build_matrix([raid("u1", "p1", T0), dislike("u1", "p2", T0 + 1)], {"p2": "p1"})
    assert m.products == ("p1",)
    assert m.dislikes == {(0, 0)}


def test_raid_vector():
    events = [raid("u1", f"p{i}") for i in (2, 5)] + [dislike("u1", "p1")] + [raid("u2", f"p{i}") for i in (3, 4, 6)]
    m = build_matrix(events)
    v = raid_vector(m, "u1")
    assert v.dim == 6
    assert sorted(m.products[i] for i in v.indices) == ["p2", "p5"]
    assert v.to_dense().count(1) == 2


def test_raid_vector_all_zero_for_dislike_only_user():
    m = build_matrix([dislike("u1", "p1"), raid("u2", "p1")])
    assert raid_vector(m, "u1").to_dense() == [0]


def test_raid_vector_unknown_user():
    with pytest.raises(UnknownUserError, match="ghost"):
        raid_vector(build_matrix([raid("u1", "p1")]), "ghost")


def test_raid_vector_population_counts(rng):
    # one swipe per pair so the final state equals the raw raid count
    pairs = [(f"u{u:02d}", f"p{p:02d}") for u in range(20) for p in range(15)]
    events = []
    for i, (u, p) in enumerate(pairs):
        if rng.random() < 0.3:
            d = Direction.RAID if rng.random() < 0.7 else Direction.DISLIKE
            events.append(SwipeEvent(f"e{i}", u, p, d, T0 + i))
    m = build_matrix(events)
    for u in m.users:
        expected = sum(1 for e in events if e.user_id == u and e.direction is Direction.RAID)
        assert len(raid_vector(m, u)) == expected


def test_malformed_events_rejected_with_id():
    with pytest.raises(ValidationError, match="e9"):
        SwipeEvent("e9", "u1", "p1", "sideways", T0)
    with pytest.raises(ValidationError, match="e8"):
        SwipeEvent("e8", "", "p1", Direction.RAID, T0)
    with pytest.raises(ValidationError, match="e7"):
        SessionEvent("e7", "u1", T0 + 10, T0)
    with pytest.raises(ValidationError):
        build_matrix([SessionEvent("e6", "u1", T0, T0)])


swipe_lists = st.lists(
    st.tuples(
        st.integers(0, 4), st.integers(0, 6), st.booleans(), st.integers(0, 20)
    ),
    max_size=60,
).map(
    lambda rows: [
        SwipeEvent(f"e{i:03d}", f"u{u}", f"p{p}", Direction.RAID if r else Direction.DISLIKE, T0 + t)
        for i, (u, p, r, t) in enumerate(rows)
    ]
)


@settings(max_examples=150, deadline=None)
@given(swipe_lists, st.randoms(use_true_random=False))
def test_matrix_properties(events, rnd):
    m = build_matrix(events)
    assert build_matrix(events) == m
    assert not (m.raids & m.dislikes)
    assert len(m.raids) + len(m.dislikes) == len({(e.user_id, e.product_id) for e in events})
    shuffled = list(events)
    rnd.shuffle(shuffled)
    # latest-wins with a total tie-break makes order irrelevant
    assert build_matrix(shuffled) == m
    for u, p in m.raids | m.dislikes:
        assert 0 <= u < len(m.users) and 0 <= p < len(m.products)
