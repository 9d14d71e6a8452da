"""Episode engine: grounding, reward wiring, done conditions, bootstraps."""

import numpy as np
import pytest

from madpl_lab.acts import GENERAL, DialogAct
from madpl_lab.ontology import SubGoal, UserGoal
from madpl_lab.policy import DialogPolicy
from madpl_lab.session import (
    PolicySystemAgent,
    PolicyUserAgent,
    ground_system_acts,
    run_episode,
)
from madpl_lab.dialog_state import init_states, update_system_state


class NullUser:
    def begin_episode(self, goal):
        pass

    def act(self, obs):
        return (), False


class NullSystem:
    def begin_episode(self):
        pass

    def act(self, obs):
        return ()


class ScriptedUser:
    def __init__(self, turns):
        self.turns = list(turns)

    def begin_episode(self, goal):
        self.i = 0

    def act(self, obs):
        acts, terminal = self.turns[self.i]
        self.i += 1
        return acts, terminal


class ScriptedSystem:
    def __init__(self, turns):
        self.turns = list(turns)

    def begin_episode(self):
        self.i = 0

    def act(self, obs):
        acts = self.turns[self.i]
        self.i += 1
        return acts


def full_goal():
    return UserGoal(
        domains=("rest",),
        sub={
            "rest": SubGoal(
                constraints={"food": "italian", "area": "north"},
                requests=("phone",),
                book={"people": "2", "time": "5"},
            )
        },
    )


def test_silent_pair_rewards_and_termination(mini_world):
    ep = run_episode(mini_world, full_goal(), NullUser(), NullSystem(), max_turns=20)
    assert ep.turn_count == 20
    assert not ep.success
    for tr in ep.transitions[:-1]:
        assert (tr.r_sys, tr.r_user, tr.r_global) == (-5.0, -5.0, -1.0)
        assert not tr.done
    last = ep.transitions[-1]
    assert last.done
    # nothing was expressed, so the expressed-goal outcome is vacuously met
    assert (last.r_sys, last.r_user, last.r_global) == (15.0, -10.0, -6.0)
    np.testing.assert_array_equal(ep.returns(), [-80.0, -105.0, -25.0])


def test_scripted_dialog_grounds_and_succeeds(mini_world):
    goal = full_goal()
    user = ScriptedUser([
        ((DialogAct("rest", "inform", "food"), DialogAct("rest", "inform", "area")), False),
        ((DialogAct("rest", "inform", "people"), DialogAct("rest", "inform", "time")), False),
        ((DialogAct("rest", "request", "phone"),), False),
        ((DialogAct(GENERAL, "thank"), DialogAct(GENERAL, "bye")), True),
    ])
    system = ScriptedSystem([
        (DialogAct("rest", "recommend", "name"),),
        (DialogAct("rest", "book"),),
        (DialogAct("rest", "inform", "phone"),),
        (DialogAct(GENERAL, "bye"),),
    ])
    ep = run_episode(mini_world, goal, user, system, max_turns=20)

    # success fires the turn the request is answered; the scripted bye never runs
    assert ep.turn_count == 3
    assert ep.success and ep.expressed_success and ep.user_expressed_all
    assert ep.record.booked == {"rest": "rest-000"}

    t0_user, t0_sys = ep.record.turns[0]
    assert [a.to_string() for a in t0_user] == [
        "rest-inform-area=north",
        "rest-inform-food=italian",
    ]
    assert t0_sys[0].to_string() == "rest-recommend-name=rest-000"
    t2_sys = ep.record.turns[2][1]
    assert t2_sys[0].to_string() == "rest-inform-phone=phone-000111"

    r = [(t.r_sys, t.r_user, t.r_global) for t in ep.transitions]
    assert r[0] == (0.0, 0.0, -1.0)
    assert r[1] == (0.0, 0.0, -1.0)
    # subgoal completion (+5) and all three done bonuses land on the last turn
    assert r[2] == (20.0, 20.0, 24.0)


def test_action_encoding_positions(mini_world):
    goal = full_goal()
    user = ScriptedUser([
        ((DialogAct("rest", "inform", "food"), DialogAct("rest", "inform", "area")), False),
    ])
    system = ScriptedSystem([(DialogAct("rest", "recommend", "name"),)])
    ep = run_episode(mini_world, goal, user, system, max_turns=1)
    space = mini_world.layout.user_space
    vec = ep.transitions[0].a_user
    on = {i for i in range(space.dim) if vec[i] == 1.0}
    assert on == {
        space.position(("rest", "inform", "food")),
        space.position(("rest", "inform", "area")),
    }
    s_space = mini_world.layout.sys_space
    s_vec = ep.transitions[0].a_sys
    assert s_vec[s_space.position(("rest", "recommend", "name"))] == 1.0
    assert s_vec.sum() == 1.0


def test_bootstrap_chaining(mini_world):
    goal = full_goal()
    user = ScriptedUser([((DialogAct("rest", "inform", "food"),), False)] * 4)
    system = ScriptedSystem([()] * 4)
    ep = run_episode(mini_world, goal, user, system, max_turns=4)
    for a, b in zip(ep.transitions, ep.transitions[1:]):
        np.testing.assert_array_equal(a.next_s_sys, b.s_sys)
        np.testing.assert_array_equal(a.next_s_user, b.s_user)
    last = ep.transitions[-1]
    assert last.done
    assert not last.next_s_sys.any() and not last.next_s_user.any()


def test_early_request_and_late_answer_penalties(mini_world):
    goal = full_goal()
    user = ScriptedUser([((DialogAct("rest", "request", "phone"),), False)])
    system = ScriptedSystem([()])
    ep = run_episode(mini_world, goal, user, system, max_turns=1)
    tr = ep.transitions[0]
    # system: empty act -5, late answer -1, expressed failure -5
    assert tr.r_sys == -11.0
    # user: early request -1, unexpressed goal -5
    assert tr.r_user == -6.0
    assert tr.r_global == -6.0


def test_late_answer_is_one_penalty_for_two_requests(mini_world):
    goal = UserGoal(
        domains=("rest",),
        sub={
            "rest": SubGoal(
                constraints={},
                requests=("phone", "addr"),
                book={},
            )
        },
    )
    user = ScriptedUser([
        ((DialogAct("rest", "request", "phone"), DialogAct("rest", "request", "addr")), False),
    ])
    system = ScriptedSystem([(DialogAct("rest", "inform", "phone"),)])
    ep = run_episode(mini_world, goal, user, system, max_turns=1)
    tr = ep.transitions[0]
    # addr unanswered: one late penalty, plus the expressed failure at done
    assert tr.r_sys == -6.0
    names = [n for stream, n, _ in tr.breakdown.components if stream == "system"]
    assert names.count("late_answer") == 1


def test_unbacked_inform_does_not_answer(mini_world):
    goal = UserGoal(
        domains=("rest",),
        sub={
            "rest": SubGoal(
                constraints={"food": "chinese", "area": "south"},
                requests=("phone",),
                book={},
            )
        },
    )
    user = ScriptedUser([
        ((DialogAct("rest", "inform", "food"), DialogAct("rest", "inform", "area")), False),
        ((DialogAct("rest", "request", "phone"),), True),
    ])
    system = ScriptedSystem([
        (DialogAct("rest", "nooffer"),),
        (DialogAct("rest", "inform", "phone"),),
    ])
    ep = run_episode(mini_world, goal, user, system, max_turns=2)
    # no chinese/south entity exists, so the inform grounds to "none"
    assert ep.record.turns[1][1][0].to_string() == "rest-inform-phone=none"
    assert not ep.success
    assert not ep.expressed_success


def test_ground_system_acts_booking(mini_world):
    goal = full_goal()
    _, sys_state = init_states(goal, mini_world.layout, mini_world.db)
    grounded, booked = ground_system_acts(
        (DialogAct("rest", "book"), DialogAct(GENERAL, "bye")),
        sys_state, mini_world.db, turn=0,
    )
    assert booked == {"rest": "rest-000"}
    by_intent = {a.intent: a for a in grounded}
    assert by_intent["book"].value == "rest-ref-00"
    assert by_intent["bye"].value == "none"


def test_ground_system_acts_empty_query(mini_world):
    goal = full_goal()
    _, sys_state = init_states(goal, mini_world.layout, mini_world.db)
    sys_state = update_system_state(
        sys_state,
        [DialogAct("rest", "inform", "food", "chinese"),
         DialogAct("rest", "inform", "area", "south")],
        mini_world.db, mini_world.layout,
    )
    grounded, booked = ground_system_acts(
        (DialogAct("rest", "book"), DialogAct("rest", "recommend", "name")),
        sys_state, mini_world.db, turn=3,
    )
    assert booked == {"rest": None}
    by_intent = {a.intent: a for a in grounded}
    assert by_intent["recommend"].value == "none"


def test_policy_agents_run_and_are_seed_deterministic(mini_world):
    layout = mini_world.layout

    def make(seed):
        u_pol = DialogPolicy("user", layout.user_space, layout.user_dim,
                             rng=np.random.default_rng(seed))
        s_pol = DialogPolicy("system", layout.sys_space, layout.sys_dim,
                             rng=np.random.default_rng(seed + 1))
        return (
            PolicyUserAgent(u_pol, mode="sample", rng=np.random.default_rng(42)),
            PolicySystemAgent(s_pol, mode="sample", rng=np.random.default_rng(43)),
        )

    def transcript(ep):
        return [
            ([a.to_string() for a in u], [a.to_string() for a in s])
            for u, s in ep.record.turns
        ]

    ua1, sa1 = make(0)
    ep1 = run_episode(mini_world, full_goal(), ua1, sa1, max_turns=8)
    ua2, sa2 = make(0)
    ep2 = run_episode(mini_world, full_goal(), ua2, sa2, max_turns=8)
    assert transcript(ep1) == transcript(ep2)
    np.testing.assert_array_equal(ep1.returns(), ep2.returns())
    assert 1 <= ep1.turn_count <= 8


def test_greedy_zero_policy_is_silent(mini_world):
    layout = mini_world.layout
    u_pol = DialogPolicy("user", layout.user_space, layout.user_dim,
                         rng=np.random.default_rng(0))
    s_pol = DialogPolicy("system", layout.sys_space, layout.sys_dim,
                         rng=np.random.default_rng(1))
    for net in (u_pol.net, s_pol.net):
        net.set_flat(np.zeros(net.get_flat().shape))
    ep = run_episode(
        mini_world, full_goal(),
        PolicyUserAgent(u_pol, mode="greedy"),
        PolicySystemAgent(s_pol, mode="greedy"),
        max_turns=3,
    )
    assert ep.turn_count == 3
    assert all(u == () and s == () for u, s in ep.record.turns)
