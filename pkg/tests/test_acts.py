import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madpl_lab.acts import (
    DialogAct,
    act_from_string,
    build_action_space,
    decode_vector,
    encode_acts,
    lexicalize,
)
from madpl_lab.errors import (
    DimensionMismatch,
    MissingValue,
    ParseError,
    UnknownAct,
)
from madpl_lab.ontology import DONT_CARE, SubGoal, UserGoal, load_ontology
from conftest import MINI_CONFIG


@pytest.fixture(scope="module")
def user_space(mini_ontology):
    return build_action_space(mini_ontology, "user")


@pytest.fixture(scope="module")
def sys_space(mini_ontology):
    return build_action_space(mini_ontology, "system")


def test_user_space_hand_enumeration(user_space):
    # 4 informs (2 informable + 2 book slots) + 2 requests + 2 general
    assert user_space.dim == 8
    assert user_space.entries == (
        ("general", "bye", "none"),
        ("general", "thank", "none"),
        ("rest", "inform", "area"),
        ("rest", "inform", "food"),
        ("rest", "inform", "people"),
        ("rest", "inform", "time"),
        ("rest", "request", "addr"),
        ("rest", "request", "phone"),
    )


def test_system_space_hand_enumeration(sys_space):
    # 4 informs + 2 requests (informable only) + recommend + book/offerbook/
    # nooffer + 3 general
    assert sys_space.dim == 13
    assert ("rest", "inform", "phone") in sys_space.index
    assert ("rest", "request", "food") in sys_space.index
    assert ("rest", "request", "phone") not in sys_space.index
    assert ("rest", "recommend", "name") in sys_space.index
    assert ("general", "welcome", "none") in sys_space.index


def test_space_build_is_deterministic(mini_ontology):
    a = build_action_space(mini_ontology, "user")
    b = build_action_space(mini_ontology, "user")
    assert a.entries == b.entries


def test_dimension_closed_form(mini_ontology):
    second = load_ontology(json.dumps({
        "domains": [
            MINI_CONFIG["domains"][0],
            {
                "name": "spa",
                "informable": {"type": ["sauna", "pool", "gym"]},
                "requestable": ["hours", "fee", "post"],
                "book_slots": ["slot"],
                "bookable": True,
            },
        ]
    }))
    for onto in (mini_ontology, second):
        n_user = sum(
            len(d.informable) + len(d.book_slots) + len(d.requestable)
            for d in onto.domains
        ) + 2
        n_sys = sum(
            2 * len(d.informable) + len(d.requestable) + 4 for d in onto.domains
        ) + 3
        assert build_action_space(onto, "user").dim == n_user
        assert build_action_space(onto, "system").dim == n_sys


def test_encode_empty_set(user_space):
    assert np.array_equal(encode_acts(set(), user_space), np.zeros(8))


def test_encode_known_positions(user_space):
    acts = {
        DialogAct(*user_space.entries[0]),
        DialogAct(*user_space.entries[3]),
    }
    want = np.zeros(8)
    want[[0, 3]] = 1.0
    assert np.array_equal(encode_acts(acts, user_space), want)


def test_encode_unknown_act(user_space):
    with pytest.raises(UnknownAct):
        encode_acts({DialogAct("zoo", "inform", "food")}, user_space)


def test_decode_extremes(user_space):
    rng = np.random.default_rng(0)
    assert decode_vector(np.zeros(8), user_space, "sample", rng) == set()
    assert decode_vector(np.zeros(8), user_space, "threshold") == set()
    full = decode_vector(np.ones(8), user_space, "sample", rng)
    assert len(full) == 8
    assert len(decode_vector(np.ones(8), user_space, "threshold")) == 8


def test_decode_wrong_length(user_space):
    with pytest.raises(DimensionMismatch):
        decode_vector(np.zeros(9), user_space)


def test_decode_sample_fraction(user_space):
    rng = np.random.default_rng(11)
    probs = np.zeros(8)
    probs[2] = 0.7
    hits = sum(
        bool(decode_vector(probs, user_space, "sample", rng))
        for _ in range(10000)
    )
    assert abs(hits / 10000 - 0.7) <= 0.02


@settings(max_examples=60, deadline=None)
@given(mask=st.lists(st.booleans(), min_size=8, max_size=8))
def test_encode_decode_roundtrip(user_space, mask):
    acts = {
        DialogAct(*t) for t, keep in zip(user_space.entries, mask) if keep
    }
    vec = encode_acts(acts, user_space)
    assert decode_vector(vec, user_space, "threshold") == acts


GOAL = UserGoal(
    domains=("rest",),
    sub={
        "rest": SubGoal(
            constraints={"food": "italian", "area": DONT_CARE},
            requests=("phone",),
            book={"people": "4", "time": "7"},
        )
    },
)


def test_lexicalize_user_informs(hand_db):
    acts = [
        DialogAct("rest", "inform", "food"),
        DialogAct("rest", "inform", "area"),
        DialogAct("rest", "inform", "people"),
    ]
    got = {a.slot: a.value for a in lexicalize(acts, goal=GOAL)}
    assert got == {"food": "italian", "area": DONT_CARE, "people": "4"}


def test_lexicalize_system_entity(hand_db):
    ent = hand_db.entities["rest"][0]
    acts = [
        DialogAct("rest", "inform", "phone"),
        DialogAct("rest", "request", "food"),
        DialogAct("rest", "recommend", "name"),
    ]
    got = {a.intent: a.value for a in lexicalize(acts, entity=ent)}
    assert got["inform"] == "phone-000111"
    assert got["request"] == "?"
    assert got["recommend"] == "rest-000"


def test_lexicalize_book_reference():
    acts = [DialogAct("rest", "book", "none")]
    (got,) = lexicalize(acts, entity=None, book_refs={"rest": "ref-rest-1"})
    assert got.value == "ref-rest-1"


def test_lexicalize_missing_strict_vs_fallback():
    act = [DialogAct("rest", "inform", "price")]
    with pytest.raises(MissingValue):
        lexicalize(act, goal=GOAL)
    (soft,) = lexicalize(act, goal=GOAL, strict=False)
    assert soft.value == DONT_CARE
    with pytest.raises(MissingValue):
        lexicalize(act, entity=None)
    (soft,) = lexicalize(act, entity=None, strict=False)
    assert soft.value == "none"


def test_act_string_roundtrip():
    act = DialogAct("rest", "inform", "food", "italian")
    assert act.to_string() == "rest-inform-food=italian"
    assert act_from_string(act.to_string()) == act
    with pytest.raises(ParseError):
        act_from_string("rest-inform")
