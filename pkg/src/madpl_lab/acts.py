"""Delexicalized dialog acts, per-role action spaces, and lexicalization.

An act is (domain, intent, slot, value); policies operate on the
delexicalized triple (domain, intent, slot) via fixed multi-hot indices.
Canonical string form: ``domain-intent-slot=value``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, MissingValue, ParseError, UnknownAct
from .ontology import DONT_CARE

GENERAL = "general"
PLACEHOLDER = "?"
NO_VALUE = "none"

SYSTEM_INTENTS = (
    "inform",
    "request",
    "recommend",
    "book",
    "offerbook",
    "nooffer",
    "reqmore",
    "bye",
    "welcome",
)
USER_INTENTS = ("inform", "request", "thank", "bye")


@dataclass(frozen=True)
class DialogAct:
    domain: str
    intent: str
    slot: str = NO_VALUE
    value: str = PLACEHOLDER

    @property
    def triple(self):
        return (self.domain, self.intent, self.slot)

    def to_string(self):
        return f"{self.domain}-{self.intent}-{self.slot}={self.value}"


def act_from_string(text):
    head, sep, value = text.partition("=")
    parts = head.split("-", 2)
    if not sep or len(parts) != 3 or not all(parts):
        raise ParseError(f"malformed act string: {text!r}")
    return DialogAct(domain=parts[0], intent=parts[1], slot=parts[2], value=value)


@dataclass(frozen=True)
class ActionSpace:
    role: str
    entries: tuple
    index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.entries)})

    @property
    def dim(self):
        return len(self.entries)

    def position(self, triple):
        try:
            return self.index[triple]
        except KeyError:
            raise UnknownAct(f"{self.role} space has no act {triple}") from None


def build_action_space(ontology, role):
    """Enumerate the role's delexicalized acts in lexicographic order."""
    if role not in ("system", "user"):
        raise ValueError(f"unknown role {role!r}")
    triples = []
    for dom in ontology.domains:
        d = dom.name
        if role == "user":
            for slot in list(dom.informable) + list(dom.book_slots):
                triples.append((d, "inform", slot))
            for slot in dom.requestable:
                triples.append((d, "request", slot))
        else:
            for slot in list(dom.informable) + list(dom.requestable):
                triples.append((d, "inform", slot))
            for slot in dom.informable:
                triples.append((d, "request", slot))
            triples.append((d, "recommend", "name"))
            triples.append((d, "book", NO_VALUE))
            triples.append((d, "offerbook", NO_VALUE))
            triples.append((d, "nooffer", NO_VALUE))
    if role == "user":
        triples.append((GENERAL, "thank", NO_VALUE))
        triples.append((GENERAL, "bye", NO_VALUE))
    else:
        triples.append((GENERAL, "reqmore", NO_VALUE))
        triples.append((GENERAL, "bye", NO_VALUE))
        triples.append((GENERAL, "welcome", NO_VALUE))
    return ActionSpace(role=role, entries=tuple(sorted(triples)))


def encode_acts(acts, space):
    """Multi-hot vector with 1 at each act's index."""
    vec = np.zeros(space.dim)
    for act in acts:
        vec[space.position(act.triple)] = 1.0
    return vec


def decode_vector(probs, space, mode="threshold", rng=None):
    """Act set from per-dimension probabilities.

    'sample' draws each dimension as an independent Bernoulli (needs rng);
    'threshold' keeps dimensions with p > 0.5.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (space.dim,):
        raise DimensionMismatch(
            f"vector length {probs.shape} != action space dim {space.dim}"
        )
    if mode == "sample":
        if rng is None:
            raise ValueError("sample mode needs an rng")
        chosen = rng.random(space.dim) < probs
    elif mode == "threshold":
        chosen = probs > 0.5
    else:
        raise ValueError(f"unknown decode mode {mode!r}")
    return {
        DialogAct(domain=t[0], intent=t[1], slot=t[2])
        for t, hit in zip(space.entries, chosen)
        if hit
    }


def _user_value(act, goal, strict):
    if goal is not None and act.domain in goal.sub:
        sg = goal.sub[act.domain]
        if act.slot in sg.constraints:
            return sg.constraints[act.slot]
        if act.slot in sg.book:
            return sg.book[act.slot]
    if strict:
        raise MissingValue(f"goal has no value for {act.domain}.{act.slot}")
    return DONT_CARE


def _entity_value(act, entity, strict):
    if entity is not None and act.slot in entity.attributes:
        return entity.attributes[act.slot]
    if strict:
        raise MissingValue(f"entity has no value for {act.domain}.{act.slot}")
    return NO_VALUE


def lexicalize(acts, goal=None, entity=None, book_refs=None, strict=True):
    """Fill placeholder values from the goal (user side) or entity (system).

    Request acts keep the "?" placeholder; valueless intents get "none".
    Acts that already carry a non-placeholder value pass through untouched,
    so agents may pre-ground some of their acts. With strict=False missing
    lookups degrade to "dont care"/"none" instead of raising, which lets
    arbitrary sampled acts ground during rollouts.
    """
    out = []
    for act in sorted(acts, key=lambda a: a.triple):
        if act.value != PLACEHOLDER and act.intent != "request":
            out.append(act)
            continue
        if act.intent == "inform":
            if goal is not None:
                value = _user_value(act, goal, strict)
            else:
                value = _entity_value(act, entity, strict)
        elif act.intent == "request":
            value = PLACEHOLDER
        elif act.intent == "recommend":
            if entity is not None:
                value = entity.id
            elif strict:
                raise MissingValue(f"no entity to recommend for {act.domain}")
            else:
                value = NO_VALUE
        elif act.intent == "book":
            if book_refs and act.domain in book_refs:
                value = book_refs[act.domain]
            elif strict:
                raise MissingValue(f"no booking reference for {act.domain}")
            else:
                value = NO_VALUE
        else:
            value = NO_VALUE
        out.append(replace(act, value=value))
    return out
