"""Scripted oracle agents and the supervised corpus they generate.

The user follows a goal agenda (informs before requests, domain by domain)
and reacts to what the system just said; the system answers from the belief
query with a fixed decision table. Both are deterministic given the goal, so
corpus generation is reproducible from a single seed.
"""

from __future__ import annotations

import numpy as np

from .acts import GENERAL, DialogAct
from .corpus import write_corpus
from .ontology import DONT_CARE, goal_weights_for, query, sample_goal
from .session import run_episode

USER_ACTS_PER_TURN = 2


class RuleUserAgent:
    """Agenda-driven goal reporter.

    Keeps a working copy of the constraints so a nooffer can relax one slot
    to dont-care without touching the goal the dialog is scored against.
    """

    def __init__(self, db, acts_per_turn=USER_ACTS_PER_TURN):
        self.db = db
        self.acts_per_turn = acts_per_turn
        self.goal = None
        self.agenda = []
        self.working = {}

    def begin_episode(self, goal):
        self.goal = goal
        self.working = {d: dict(goal.sub[d].constraints) for d in goal.domains}
        self.agenda = []
        for d in goal.domains:
            sg = goal.sub[d]
            for slot, value in sg.constraints.items():
                self.agenda.append(DialogAct(d, "inform", slot, value))
            for slot, value in sg.book.items():
                self.agenda.append(DialogAct(d, "inform", slot, value))
            for slot in sg.requests:
                self.agenda.append(DialogAct(d, "request", slot))

    def _queued(self, triple):
        return any(a.triple == triple for a in self.agenda)

    def _relax(self, domain):
        """Drop the constraint with the fewest solo matches to dont-care."""
        concrete = [
            (slot, value)
            for slot, value in self.working.get(domain, {}).items()
            if value != DONT_CARE
        ]
        if not concrete:
            return
        slot, _ = min(
            concrete,
            key=lambda sv: (len(query(self.db, domain, {sv[0]: sv[1]})), sv[0]),
        )
        self.working[domain][slot] = DONT_CARE
        self.agenda.insert(0, DialogAct(domain, "inform", slot, DONT_CARE))

    def act(self, obs):
        state = obs.state
        for act in obs.last_system_acts:
            if act.intent == "nooffer" and act.domain in self.working:
                self._relax(act.domain)
        for d, slot in sorted(state.inconsistent):
            triple = (d, "inform", slot)
            if d in self.working and not self._queued(triple):
                value = self.working[d].get(
                    slot, self.goal.sub[d].constraints.get(slot, DONT_CARE)
                )
                self.agenda.insert(0, DialogAct(d, "inform", slot, value))
        for act in obs.last_system_acts:
            if act.intent != "request" or act.domain not in self.working:
                continue
            triple = (act.domain, "inform", act.slot)
            if not self._queued(triple):
                value = self.working[act.domain].get(act.slot, DONT_CARE)
                self.agenda.insert(0, DialogAct(act.domain, "inform", act.slot, value))
        for d, slot in sorted(state.request_pending):
            if not self._queued((d, "request", slot)):
                self.agenda.append(DialogAct(d, "request", slot))

        if not self.agenda:
            return (
                DialogAct(GENERAL, "thank"),
                DialogAct(GENERAL, "bye"),
            ), True
        emit = tuple(self.agenda[: self.acts_per_turn])
        del self.agenda[: self.acts_per_turn]
        return emit, False


class RuleSystemAgent:
    """Belief-query decision table over the domains the user engaged."""

    def __init__(self, world):
        self.world = world

    def begin_episode(self):
        pass

    def act(self, obs):
        state = obs.state
        onto = self.world.ontology
        db = self.world.db
        user_acts = obs.last_user_acts
        if any(a.intent == "bye" for a in user_acts):
            return (
                DialogAct(GENERAL, "bye"),
                DialogAct(GENERAL, "welcome"),
            )

        engaged = {a.domain for a in user_acts if a.domain != GENERAL}
        active = set(engaged)
        active.update(d for d, _ in state.requested)
        for dom in onto.domains:
            supplied = {s for (d, s) in state.book_supplied if d == dom.name}
            if (
                dom.bookable
                and set(dom.book_slots) <= supplied
                and state.booked.get(dom.name) is None
            ):
                active.add(dom.name)

        acts = []
        for d in sorted(active):
            dom = onto.get(d)
            belief_d = state.belief_for(d)
            hits = query(db, d, belief_d)
            if belief_d and not hits:
                acts.append(DialogAct(d, "nooffer"))
                continue
            domain_acts = []
            for dd, slot in sorted(state.requested):
                if dd == d:
                    domain_acts.append(DialogAct(d, "inform", slot))
            informed_constraint = any(
                a.intent == "inform" and a.domain == d and a.slot in dom.informable
                for a in user_acts
            )
            if informed_constraint and hits:
                domain_acts.append(DialogAct(d, "recommend", "name"))
            if dom.bookable:
                supplied = {s for (dd, s) in state.book_supplied if dd == d}
                complete = set(dom.book_slots) <= supplied
                unbooked = state.booked.get(d) is None
                if complete and unbooked and hits:
                    domain_acts.append(DialogAct(d, "book"))
                elif not complete and unbooked and d in engaged and hits:
                    domain_acts.append(DialogAct(d, "offerbook"))
            if not domain_acts and d in engaged:
                missing = [s for s in dom.informable if (d, s) not in state.belief]
                if missing and len(hits) > 1:
                    domain_acts.append(DialogAct(d, "request", missing[0]))
            acts.extend(domain_acts)

        if not acts:
            acts.append(DialogAct(GENERAL, "reqmore"))
        return tuple(acts)


def rollout_rule_pair(world, goal, max_turns=20, acts_per_turn=USER_ACTS_PER_TURN):
    user = RuleUserAgent(world.db, acts_per_turn=acts_per_turn)
    system = RuleSystemAgent(world)
    return run_episode(world, goal, user, system, max_turns=max_turns)


def generate_corpus(world, n_dialogs, seed, path=None, max_turns=20):
    """Roll the rule pair on sampled goals and collect per-turn rows.

    Returns (rows, success map, goals); when path is given the rows are also
    written in the corpus file format.
    """
    rng = np.random.default_rng(seed)
    weights = goal_weights_for(world.ontology)
    rows = []
    success = {}
    goals = []
    for i in range(n_dialogs):
        goal = sample_goal(world.ontology, world.db, rng, weights)
        goals.append(goal)
        ep = rollout_rule_pair(world, goal, max_turns=max_turns)
        success[i] = ep.success
        for tr in ep.transitions:
            rows.append((i, tr.turn, "user", tr.s_user, tr.a_user, int(tr.terminal)))
            rows.append((i, tr.turn, "system", tr.s_sys, tr.a_sys, 0))
    if path is not None:
        write_corpus(path, rows, world.layout, success)
    return rows, success, goals
