"""Synthetic dialog world: domain schemas, entity database, user goals.

A world is defined by a JSON config listing domains with informable slots
(each with a closed value list), requestable slots, and optional booking
slots. Entities are sampled from the schema; user goals are rejection-sampled
so that every constraint set matches at least one entity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ParseError,
    SamplingExhausted,
    SchemaError,
    UnknownDomain,
    UnknownSlot,
)

DONT_CARE = "dont care"

# domain-count mixture for sampled goals: one, two, three domains
DEFAULT_GOAL_WEIGHTS = (0.328, 0.549, 0.123)

REJECTION_LIMIT = 1000


@dataclass(frozen=True)
class DomainSchema:
    name: str
    informable: dict
    requestable: tuple
    book_slots: tuple
    bookable: bool


@dataclass(frozen=True)
class Ontology:
    domains: tuple
    _by_name: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {d.name: d for d in self.domains})

    def domain_names(self):
        return tuple(d.name for d in self.domains)

    def get(self, name):
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownDomain(name) from None


@dataclass(frozen=True)
class Entity:
    id: str
    attributes: dict


@dataclass(frozen=True)
class Database:
    entities: dict
    informable_slots: dict


@dataclass(frozen=True)
class SubGoal:
    constraints: dict
    requests: tuple
    book: dict


@dataclass(frozen=True)
class UserGoal:
    """Ordered per-domain objectives: constraints C, requests R, bookings."""

    domains: tuple
    sub: dict

    def booking_domains(self):
        return tuple(d for d in self.domains if self.sub[d].book)

    def to_dict(self):
        return {
            "domains": list(self.domains),
            "sub": {
                d: {
                    "constraints": dict(sg.constraints),
                    "requests": list(sg.requests),
                    "book": dict(sg.book),
                }
                for d, sg in self.sub.items()
            },
        }

    @classmethod
    def from_dict(cls, data):
        sub = {
            d: SubGoal(
                constraints=dict(v["constraints"]),
                requests=tuple(v["requests"]),
                book=dict(v["book"]),
            )
            for d, v in data["sub"].items()
        }
        return cls(domains=tuple(data["domains"]), sub=sub)


def _require(condition, message):
    if not condition:
        raise SchemaError(message)


def load_ontology(text):
    """Parse and validate a world config (JSON text) into an Ontology."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"world config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("world config must be a JSON object")
    raw_domains = data.get("domains")
    _require(isinstance(raw_domains, list) and raw_domains, "domains: must be a nonempty list")
    domains = []
    seen = set()
    for i, raw in enumerate(raw_domains):
        where = f"domains[{i}]"
        _require(isinstance(raw, dict), f"{where}: must be an object")
        name = raw.get("name")
        _require(isinstance(name, str) and name, f"{where}.name: must be a nonempty string")
        _require(name not in seen, f"{where}.name: duplicate domain {name!r}")
        seen.add(name)
        informable = raw.get("informable")
        _require(
            isinstance(informable, dict) and informable,
            f"{name}.informable: must be a nonempty object",
        )
        inf = {}
        for slot, values in informable.items():
            _require(
                isinstance(values, list) and len(values) >= 2,
                f"{name}.informable.{slot}: needs at least 2 values",
            )
            _require(
                len(set(values)) == len(values),
                f"{name}.informable.{slot}: duplicate values",
            )
            inf[slot] = tuple(str(v) for v in values)
        requestable = tuple(raw.get("requestable", []))
        book_slots = tuple(raw.get("book_slots", []))
        bookable = bool(raw.get("bookable", bool(book_slots)))
        groups = [list(inf), list(requestable), list(book_slots)]
        flat = [s for g in groups for s in g]
        _require(
            len(set(flat)) == len(flat),
            f"{name}: slot names must be unique across informable/requestable/book_slots",
        )
        _require(
            bookable == bool(book_slots),
            f"{name}.bookable: must agree with book_slots being nonempty",
        )
        domains.append(
            DomainSchema(
                name=name,
                informable=inf,
                requestable=requestable,
                book_slots=book_slots,
                bookable=bookable,
            )
        )
    return Ontology(domains=tuple(domains))


def generate_database(ontology, seed, entities_per_domain):
    """Sample a deterministic entity table for every domain."""
    if entities_per_domain < 1:
        raise ValueError("entities_per_domain must be >= 1")
    rng = np.random.default_rng(seed)
    entities = {}
    informable_slots = {}
    for dom in ontology.domains:
        rows = []
        for i in range(entities_per_domain):
            attrs = {}
            for slot, values in dom.informable.items():
                attrs[slot] = values[int(rng.integers(len(values)))]
            for slot in dom.requestable:
                attrs[slot] = f"{slot}-{int(rng.integers(1_000_000)):06d}"
            rows.append(Entity(id=f"{dom.name}-{i:03d}", attributes=attrs))
        entities[dom.name] = tuple(rows)
        informable_slots[dom.name] = frozenset(dom.informable)
    return Database(entities=entities, informable_slots=informable_slots)


def query(db, domain, constraints):
    """All entities of a domain matching every non-dont-care constraint."""
    if domain not in db.entities:
        raise UnknownDomain(domain)
    valid = db.informable_slots.get(domain, frozenset())
    for slot in constraints:
        if slot not in valid:
            raise UnknownSlot(f"{domain}.{slot}")
    hits = [
        e
        for e in db.entities[domain]
        if all(
            e.attributes.get(s) == v
            for s, v in constraints.items()
            if v != DONT_CARE
        )
    ]
    return sorted(hits, key=lambda e: e.id)


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def goal_weights_for(ontology, weights=None):
    """Domain-count weights truncated to the world size and renormalized."""
    w = np.asarray(
        DEFAULT_GOAL_WEIGHTS if weights is None else weights, dtype=np.float64
    )
    w = w[: len(ontology.domain_names())]
    total = float(w.sum())
    if total <= 0:
        raise ValueError("goal weights must have positive mass")
    return tuple(float(v) for v in w / total)


def sample_goal(ontology, db, rng, domain_count_weights=DEFAULT_GOAL_WEIGHTS):
    """Draw a satisfiable multi-domain user goal.

    The domain count follows domain_count_weights; constraint sets are
    rejection-sampled until the database query is nonempty. Bookable domains
    get booking requirements with probability 0.5.
    """
    rng = _as_rng(rng)
    w = np.asarray(domain_count_weights, dtype=np.float64)
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError("domain_count_weights must sum to 1")
    names = ontology.domain_names()
    if len(w) > len(names) and float(w[len(names):].sum()) > 0:
        raise ValueError("domain_count_weights allow more domains than the world has")
    k = int(rng.choice(np.arange(1, len(w) + 1), p=w))
    order = rng.choice(len(names), size=k, replace=False)
    chosen = [names[int(i)] for i in order]
    sub = {}
    for name in chosen:
        dom = ontology.get(name)
        constraints = None
        for _ in range(REJECTION_LIMIT):
            cand = {}
            for slot, values in dom.informable.items():
                u = rng.random()
                if u < 0.70:
                    cand[slot] = values[int(rng.integers(len(values)))]
                elif u < 0.85:
                    cand[slot] = DONT_CARE
            if not cand:
                continue
            if query(db, name, cand):
                constraints = cand
                break
        if constraints is None:
            raise SamplingExhausted(
                f"no satisfiable constraint set found for domain {name!r} "
                f"after {REJECTION_LIMIT} attempts"
            )
        requests = tuple(s for s in dom.requestable if rng.random() < 0.6)
        if not requests and dom.requestable:
            requests = (dom.requestable[int(rng.integers(len(dom.requestable)))],)
        book = {}
        if dom.bookable and rng.random() < 0.5:
            book = {s: str(int(rng.integers(1, 11))) for s in dom.book_slots}
        sub[name] = SubGoal(constraints=constraints, requests=requests, book=book)
    return UserGoal(domains=tuple(chosen), sub=sub)
