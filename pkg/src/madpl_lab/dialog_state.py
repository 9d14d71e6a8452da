"""Symbolic dialog state for both roles and the fixed-length feature vectors.

The system tracks a belief store (constraint values + requested-slot flags),
query-count buckets, and bookings. The user tracks remaining goal flags g_t
and the inconsistency vector c_t. All transitions are pure: they return new
state values and never mutate their inputs.

Vector layouts are fixed by the ontology alone; ``layout_text`` renders the
documented segment map (state-layout.txt).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .acts import build_action_space, encode_acts
from .errors import UnknownDomain, UnknownSlot
from .ontology import DONT_CARE, query

Q_BUCKETS = ("0", "1", "2-3", ">=4")


def q_bucket(n):
    if n <= 0:
        return 0
    if n == 1:
        return 1
    if n <= 3:
        return 2
    return 3


@dataclass(frozen=True)
class StateLayout:
    """Positions of every vector segment for a fixed ontology."""

    ontology: object
    user_space: object
    sys_space: object
    sys_dim: int
    user_dim: int
    belief_slots: tuple       # (domain, slot, values) in vector order
    requested_slots: tuple    # (domain, slot) in vector order
    g_constraint: tuple       # (domain, slot)
    g_book_value: tuple       # (domain, slot)
    g_request: tuple          # (domain, slot)
    domains: tuple


def build_layout(ontology):
    user_space = build_action_space(ontology, "user")
    sys_space = build_action_space(ontology, "system")
    belief_slots = []
    requested_slots = []
    g_constraint = []
    g_book_value = []
    g_request = []
    for dom in ontology.domains:
        for slot, values in dom.informable.items():
            belief_slots.append((dom.name, slot, values))
            g_constraint.append((dom.name, slot))
        for slot in dom.requestable:
            requested_slots.append((dom.name, slot))
            g_request.append((dom.name, slot))
        for slot in dom.book_slots:
            g_book_value.append((dom.name, slot))
    domains = ontology.domain_names()
    sys_dim = (
        user_space.dim
        + sys_space.dim
        + sum(len(v) + 1 for _, _, v in belief_slots)
        + len(requested_slots)
        + 4 * len(domains)
    )
    user_dim = (
        sys_space.dim
        + user_space.dim
        + len(g_constraint)
        + len(g_book_value)
        + len(g_request)
        + len(domains)
        + len(g_constraint)
    )
    return StateLayout(
        ontology=ontology,
        user_space=user_space,
        sys_space=sys_space,
        sys_dim=sys_dim,
        user_dim=user_dim,
        belief_slots=tuple(belief_slots),
        requested_slots=tuple(requested_slots),
        g_constraint=tuple(g_constraint),
        g_book_value=tuple(g_book_value),
        g_request=tuple(g_request),
        domains=domains,
    )


@dataclass(frozen=True)
class SystemState:
    user_acts_now: np.ndarray
    sys_acts_prev: np.ndarray
    belief: dict              # (domain, slot) -> value
    requested: frozenset      # (domain, slot) pairs awaiting an answer
    booked: dict              # domain -> entity id or None
    book_supplied: dict       # (domain, slot) -> value, tracked symbolically
    q_counts: dict            # domain -> current query hit count

    def belief_for(self, domain):
        return {s: v for (d, s), v in self.belief.items() if d == domain}


@dataclass(frozen=True)
class UserState:
    sys_acts_prev: np.ndarray
    user_acts_prev: np.ndarray
    constraint_pending: frozenset   # (domain, slot) not yet informed
    book_value_pending: frozenset   # (domain, slot) book values not yet given
    request_pending: frozenset      # (domain, slot) not yet answered
    book_pending: frozenset         # domains whose booking is unconfirmed
    inconsistent: frozenset         # (domain, slot) with conflicting informs

    def pending_total(self):
        return (
            len(self.constraint_pending)
            + len(self.book_value_pending)
            + len(self.request_pending)
            + len(self.book_pending)
        )


def init_states(goal, layout, db):
    """Fresh (UserState, SystemState) for a goal: all flags set, belief empty."""
    counts = {d: len(query(db, d, {})) for d in layout.domains}
    sys_state = SystemState(
        user_acts_now=np.zeros(layout.user_space.dim),
        sys_acts_prev=np.zeros(layout.sys_space.dim),
        belief={},
        requested=frozenset(),
        booked={},
        book_supplied={},
        q_counts=counts,
    )
    user_state = UserState(
        sys_acts_prev=np.zeros(layout.sys_space.dim),
        user_acts_prev=np.zeros(layout.user_space.dim),
        constraint_pending=frozenset(
            (d, s) for d in goal.domains for s in goal.sub[d].constraints
        ),
        book_value_pending=frozenset(
            (d, s) for d in goal.domains for s in goal.sub[d].book
        ),
        request_pending=frozenset(
            (d, s) for d in goal.domains for s in goal.sub[d].requests
        ),
        book_pending=frozenset(goal.booking_domains()),
        inconsistent=frozenset(),
    )
    return user_state, sys_state


def _check_user_act(act, ontology):
    if act.domain == "general":
        return
    dom = ontology.get(act.domain)
    if act.intent == "inform":
        if act.slot not in dom.informable and act.slot not in dom.book_slots:
            raise UnknownSlot(f"{act.domain}.{act.slot}")
    elif act.intent == "request":
        if act.slot not in dom.requestable:
            raise UnknownSlot(f"{act.domain}.{act.slot}")


def note_user_acts(prev, user_acts, layout):
    """Fold the user's own just-emitted acts into its state.

    Informing a constraint or book slot clears its pending flag; the acts
    become a_{t-1}^U for the next turn.
    """
    informed = {
        (a.domain, a.slot) for a in user_acts if a.intent == "inform"
    }
    return replace(
        prev,
        user_acts_prev=encode_acts(user_acts, layout.user_space),
        constraint_pending=prev.constraint_pending - informed,
        book_value_pending=prev.book_value_pending - informed,
    )


def update_system_state(prev, user_acts, db, layout):
    """Apply grounded user acts to the system's trackers and recompute q_t."""
    onto = layout.ontology
    belief = dict(prev.belief)
    requested = set(prev.requested)
    book_supplied = dict(prev.book_supplied)
    for act in user_acts:
        _check_user_act(act, onto)
        if act.domain == "general":
            continue
        dom = onto.get(act.domain)
        if act.intent == "inform":
            if act.slot in dom.informable:
                belief[(act.domain, act.slot)] = act.value
            else:
                book_supplied[(act.domain, act.slot)] = act.value
        elif act.intent == "request":
            requested.add((act.domain, act.slot))
    counts = {
        d: len(query(db, d, {s: v for (dd, s), v in belief.items() if dd == d}))
        for d in layout.domains
    }
    return replace(
        prev,
        user_acts_now=encode_acts(user_acts, layout.user_space),
        belief=belief,
        requested=frozenset(requested),
        book_supplied=book_supplied,
        q_counts=counts,
    )


def note_system_response(prev, system_acts, layout, booked_entities=None):
    """Fold the system's own response into its state.

    Answered requests drop their flags; book acts record the booked entity
    (or None when booking had no grounding).
    """
    booked = dict(prev.booked)
    informed = {
        (a.domain, a.slot) for a in system_acts if a.intent == "inform"
    }
    for act in system_acts:
        if act.intent == "book":
            hit = (booked_entities or {}).get(act.domain)
            booked[act.domain] = hit
    return replace(
        prev,
        sys_acts_prev=encode_acts(system_acts, layout.sys_space),
        requested=prev.requested - informed,
        booked=booked,
    )


def update_user_state(prev, system_acts, goal, layout):
    """Apply grounded system acts to the user's goal flags and c_t."""
    request_pending = set(prev.request_pending)
    book_pending = set(prev.book_pending)
    inconsistent = set(prev.inconsistent)
    constraint_domains_done = {
        d for d in layout.domains
        if not any(dd == d for dd, _ in prev.constraint_pending)
    }
    for act in system_acts:
        if act.intent == "inform":
            request_pending.discard((act.domain, act.slot))
            if act.domain in goal.sub:
                cons = goal.sub[act.domain].constraints
                want = cons.get(act.slot)
                if want is not None and want != DONT_CARE:
                    if act.value != want:
                        inconsistent.add((act.domain, act.slot))
                    else:
                        inconsistent.discard((act.domain, act.slot))
        elif act.intent in ("book", "offerbook"):
            if act.domain in constraint_domains_done:
                book_pending.discard(act.domain)
    return replace(
        prev,
        sys_acts_prev=encode_acts(system_acts, layout.sys_space),
        request_pending=frozenset(request_pending),
        book_pending=frozenset(book_pending),
        inconsistent=frozenset(inconsistent),
    )


def vectorize(state, layout):
    """Fixed-order feature vector for either role's state."""
    if isinstance(state, SystemState):
        return _vectorize_system(state, layout)
    if isinstance(state, UserState):
        return _vectorize_user(state, layout)
    raise TypeError(f"not a dialog state: {type(state).__name__}")


def _vectorize_system(state, layout):
    parts = [state.user_acts_now, state.sys_acts_prev]
    belief = np.zeros(sum(len(v) + 1 for _, _, v in layout.belief_slots))
    off = 0
    for domain, slot, values in layout.belief_slots:
        val = state.belief.get((domain, slot))
        if val is not None:
            belief[off] = 1.0
            if val in values:
                belief[off + 1 + values.index(val)] = 1.0
            # dont-care and out-of-ontology values leave the one-hot zero
        off += len(values) + 1
    parts.append(belief)
    req = np.zeros(len(layout.requested_slots))
    for i, pair in enumerate(layout.requested_slots):
        if pair in state.requested:
            req[i] = 1.0
    parts.append(req)
    q = np.zeros(4 * len(layout.domains))
    for i, d in enumerate(layout.domains):
        q[4 * i + q_bucket(state.q_counts.get(d, 0))] = 1.0
    parts.append(q)
    vec = np.concatenate(parts)
    assert vec.shape == (layout.sys_dim,)
    return vec


def _vectorize_user(state, layout):
    parts = [state.sys_acts_prev, state.user_acts_prev]
    for pairs, pending in (
        (layout.g_constraint, state.constraint_pending),
        (layout.g_book_value, state.book_value_pending),
        (layout.g_request, state.request_pending),
    ):
        seg = np.zeros(len(pairs))
        for i, pair in enumerate(pairs):
            if pair in pending:
                seg[i] = 1.0
        parts.append(seg)
    dom_seg = np.zeros(len(layout.domains))
    for i, d in enumerate(layout.domains):
        if d in state.book_pending:
            dom_seg[i] = 1.0
    parts.append(dom_seg)
    c_seg = np.zeros(len(layout.g_constraint))
    for i, pair in enumerate(layout.g_constraint):
        if pair in state.inconsistent:
            c_seg[i] = 1.0
    parts.append(c_seg)
    vec = np.concatenate(parts)
    assert vec.shape == (layout.user_dim,)
    return vec


def layout_text(layout):
    """Human-readable segment map of both state vectors."""
    lines = [f"system state vector, length {layout.sys_dim}"]
    off = 0

    def seg(n, label):
        nonlocal off
        lines.append(f"  [{off}:{off + n})  {label}")
        off += n

    seg(layout.user_space.dim, "current user acts (user action space order)")
    seg(layout.sys_space.dim, "previous system acts (system action space order)")
    for domain, slot, values in layout.belief_slots:
        seg(len(values) + 1, f"belief {domain}.{slot}: filled bit + one-hot{list(values)}")
    for domain, slot in layout.requested_slots:
        seg(1, f"requested flag {domain}.{slot}")
    for d in layout.domains:
        seg(4, f"query-count bucket {d}: one-hot{list(Q_BUCKETS)}")

    lines.append("")
    lines.append(f"user state vector, length {layout.user_dim}")
    off = 0
    seg(layout.sys_space.dim, "previous system acts (system action space order)")
    seg(layout.user_space.dim, "previous user acts (user action space order)")
    for domain, slot in layout.g_constraint:
        seg(1, f"constraint not yet informed: {domain}.{slot}")
    for domain, slot in layout.g_book_value:
        seg(1, f"book value not yet given: {domain}.{slot}")
    for domain, slot in layout.g_request:
        seg(1, f"request not yet answered: {domain}.{slot}")
    for d in layout.domains:
        seg(1, f"booking not yet confirmed: {d}")
    for domain, slot in layout.g_constraint:
        seg(1, f"inconsistent system inform: {domain}.{slot}")
    return "\n".join(lines) + "\n"
