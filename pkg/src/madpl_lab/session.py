"""Episode engine: runs one asynchronous user/system exchange loop.

The user speaks first each turn. Acts are chosen delexicalized, grounded
against the goal (user) or the current belief query (system), folded into
both symbolic states, and scored by the three reward streams. Transitions
carry the exact vectors the learners need; bootstrap targets for the system
are filled in retrospectively since its next state only exists once the next
user utterance arrives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acts import GENERAL, encode_acts, lexicalize
from .dialog_state import (
    init_states,
    note_system_response,
    note_user_acts,
    update_system_state,
    update_user_state,
    vectorize,
)
from .metrics import dialog_success, informed_pairs
from .ontology import query
from .rewards import RewardConfig, TurnContext, compute_rewards

DEFAULT_MAX_TURNS = 20


@dataclass
class UserObs:
    """What a user agent sees when choosing its acts."""

    state: object
    vector: np.ndarray
    goal: object
    last_system_acts: tuple
    turn: int


@dataclass
class SysObs:
    """What a system agent sees; state already includes the user's new acts."""

    state: object
    vector: np.ndarray
    last_user_acts: tuple
    turn: int


@dataclass
class Transition:
    """One exchange from both learners' point of view."""

    turn: int
    s_user: np.ndarray
    a_user: np.ndarray        # multi-hot over the user act space
    terminal: bool            # user terminal decision this turn
    s_sys: np.ndarray
    a_sys: np.ndarray         # multi-hot over the system act space
    r_sys: float
    r_user: float
    r_global: float
    next_s_user: np.ndarray = None
    next_s_sys: np.ndarray = None
    done: bool = False
    breakdown: object = None


@dataclass
class DialogRecord:
    """Grounded surface record of a dialog, enough to score it offline."""

    goal: object
    turns: tuple              # ((user acts, system acts), ...) grounded
    booked: dict              # domain -> entity id or None
    turn_count: int
    success: bool

    def sys_turns(self):
        return tuple(s for _, s in self.turns)

    def user_turns(self):
        return tuple(u for u, _ in self.turns)


@dataclass
class Episode:
    goal: object
    transitions: list
    record: DialogRecord
    expressed_success: bool
    user_expressed_all: bool
    success: bool

    @property
    def turn_count(self):
        return len(self.transitions)

    def returns(self):
        r = np.array(
            [[t.r_sys, t.r_user, t.r_global] for t in self.transitions]
        )
        return r.sum(axis=0)


class PolicyUserAgent:
    """Adapter running a learned user policy inside an episode."""

    def __init__(self, policy, mode="sample", rng=None):
        self.policy = policy
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def begin_episode(self, goal):
        pass

    def act(self, obs):
        return self.policy.act(obs.vector, mode=self.mode, rng=self.rng)


class PolicySystemAgent:
    def __init__(self, policy, mode="sample", rng=None):
        self.policy = policy
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def begin_episode(self):
        pass

    def act(self, obs):
        acts, _ = self.policy.act(obs.vector, mode=self.mode, rng=self.rng)
        return acts


def ground_system_acts(acts, sys_state, db, turn):
    """Attach values to delexicalized system acts from the belief query.

    Each mentioned domain is grounded against the first entity matching the
    current belief; book acts get a synthetic reference and record which
    entity (if any) the booking landed on.
    """
    by_domain = {}
    for act in acts:
        by_domain.setdefault(act.domain, []).append(act)
    grounded = []
    booked_entities = {}
    for domain, group in sorted(by_domain.items()):
        entity = None
        refs = None
        if domain != GENERAL:
            hits = query(db, domain, sys_state.belief_for(domain))
            entity = hits[0] if hits else None
            if any(a.intent == "book" for a in group):
                refs = {domain: f"{domain}-ref-{turn:02d}"}
                booked_entities[domain] = entity.id if entity is not None else None
        grounded.extend(
            lexicalize(group, entity=entity, book_refs=refs, strict=False)
        )
    return tuple(sorted(grounded, key=lambda a: a.triple)), booked_entities


def _subtask_done(domain, goal, user_state, booked):
    sg = goal.sub[domain]
    flags = (
        user_state.constraint_pending
        | user_state.request_pending
        | user_state.inconsistent
    )
    if any(d == domain for d, _ in flags):
        return False
    if sg.book and booked.get(domain) is None:
        return False
    return True


def run_episode(
    world,
    goal,
    user_agent,
    system_agent,
    max_turns=DEFAULT_MAX_TURNS,
    reward_config=None,
):
    """Roll one dialog and return transitions plus the scored record."""
    layout = world.layout
    cfg = reward_config if reward_config is not None else RewardConfig()
    user_state, sys_state = init_states(goal, layout, world.db)
    user_agent.begin_episode(goal)
    system_agent.begin_episode()

    transitions = []
    turn_log = []
    booked = {}
    informed_acc = set()
    expressed_requests = set()
    completed = set()
    last_sys_grounded = ()
    expressed_success = False
    user_expressed_all = False
    succeeded = False

    for turn in range(max_turns):
        u_vec = vectorize(user_state, layout)
        user_acts, terminal = user_agent.act(
            UserObs(
                state=user_state,
                vector=u_vec,
                goal=goal,
                last_system_acts=last_sys_grounded,
                turn=turn,
            )
        )
        user_grounded = tuple(lexicalize(user_acts, goal=goal, strict=False))
        user_state = note_user_acts(user_state, user_grounded, layout)
        sys_state = update_system_state(sys_state, user_grounded, world.db, layout)
        s_vec = vectorize(sys_state, layout)
        sys_acts = system_agent.act(
            SysObs(
                state=sys_state, vector=s_vec, last_user_acts=user_grounded,
                turn=turn,
            )
        )
        sys_grounded, booked_now = ground_system_acts(
            sys_acts, sys_state, world.db, turn
        )
        sys_state = note_system_response(
            sys_state, sys_grounded, layout, booked_now
        )
        user_state = update_user_state(user_state, sys_grounded, goal, layout)

        booked.update(sys_state.booked)
        informed_acc |= informed_pairs([sys_grounded], world.ontology)
        expressed_requests |= {
            (a.domain, a.slot) for a in user_grounded if a.intent == "request"
        }
        newly_completed = tuple(
            d
            for d in goal.domains
            if d not in completed and _subtask_done(d, goal, user_state, booked)
        )
        completed.update(newly_completed)

        succeeded = dialog_success(goal, informed_acc, booked, world.db)
        done = terminal or succeeded or (turn == max_turns - 1)

        if done:
            answered = expressed_requests <= informed_acc
            booking_asked = {d for d, _ in sys_state.book_supplied}
            served = all(booked.get(d) is not None for d in booking_asked)
            expressed_success = answered and served
            goal_requests = {
                (d, s) for d in goal.domains for s in goal.sub[d].requests
            }
            user_expressed_all = (
                not user_state.constraint_pending
                and not user_state.book_value_pending
                and goal_requests <= expressed_requests
            )

        unexpressed = {}
        for d, _ in user_state.constraint_pending:
            unexpressed[d] = unexpressed.get(d, 0) + 1
        ctx = TurnContext(
            user_acts=user_grounded,
            system_acts=sys_grounded,
            unexpressed_constraints=unexpressed,
            newly_completed_domains=newly_completed,
            done=done,
            expressed_success=expressed_success,
            user_expressed_all=user_expressed_all,
            global_success=succeeded,
        )
        breakdown = compute_rewards(ctx, cfg)

        transitions.append(
            Transition(
                turn=turn,
                s_user=u_vec,
                a_user=encode_acts(user_acts, layout.user_space),
                terminal=terminal,
                s_sys=s_vec,
                a_sys=encode_acts(sys_acts, layout.sys_space),
                r_sys=breakdown.r_S,
                r_user=breakdown.r_U,
                r_global=breakdown.r_G,
                done=done,
                breakdown=breakdown,
            )
        )
        turn_log.append((user_grounded, sys_grounded))
        last_sys_grounded = sys_grounded
        if done:
            break

    for i, tr in enumerate(transitions):
        if i + 1 < len(transitions):
            tr.next_s_user = transitions[i + 1].s_user
            tr.next_s_sys = transitions[i + 1].s_sys
        else:
            tr.next_s_user = np.zeros(layout.user_dim)
            tr.next_s_sys = np.zeros(layout.sys_dim)

    record = DialogRecord(
        goal=goal,
        turns=tuple(turn_log),
        booked=dict(booked),
        turn_count=len(transitions),
        success=succeeded,
    )
    return Episode(
        goal=goal,
        transitions=transitions,
        record=record,
        expressed_success=expressed_success,
        user_expressed_all=user_expressed_all,
        success=succeeded,
    )


def rollout_records(world, goals, user_agent, system_agent,
                    max_turns=DEFAULT_MAX_TURNS):
    """Dialog records for a fixed goal list under one agent pair."""
    return [
        run_episode(world, g, user_agent, system_agent, max_turns=max_turns).record
        for g in goals
    ]
