import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madpl_lab.acts import DialogAct
from madpl_lab.rewards import (
    RewardConfig,
    TurnContext,
    compute_rewards,
    global_reward,
    system_reward,
    user_reward,
)

CFG = RewardConfig()


def ctx(**kw):
    base = dict(
        user_acts=(),
        system_acts=(),
        unexpressed_constraints={},
        newly_completed_domains=(),
        done=False,
    )
    base.update(kw)
    return TurnContext(**base)


REQ = DialogAct("rest", "request", "phone", "?")
INFORM_PHONE = DialogAct("rest", "inform", "phone", "555")
INFORM_ADDR = DialogAct("rest", "inform", "addr", "road")
USER_INFORM = DialogAct("rest", "inform", "food", "italian")


def test_system_empty_act_penalty():
    r, fired = system_reward(ctx(user_acts=(USER_INFORM,)), CFG)
    assert r == -5.0
    assert fired == (("empty_act", -5.0),)


def test_system_late_answer_single_penalty():
    c = ctx(
        user_acts=(REQ, DialogAct("rest", "request", "addr", "?")),
        system_acts=(DialogAct("general", "reqmore", "none", "none"),),
    )
    r, fired = system_reward(c, CFG)
    # two unanswered requests still cost one late penalty, not two
    assert r == -1.0
    assert [n for n, _ in fired] == ["late_answer"]


def test_system_immediate_answer_no_penalty():
    c = ctx(user_acts=(REQ,), system_acts=(INFORM_PHONE,))
    assert system_reward(c, CFG)[0] == 0.0


def test_system_partial_answer_is_late():
    c = ctx(
        user_acts=(REQ, DialogAct("rest", "request", "addr", "?")),
        system_acts=(INFORM_ADDR,),
    )
    assert system_reward(c, CFG)[0] == -1.0


def test_system_done_outcomes():
    win = ctx(system_acts=(INFORM_PHONE,), done=True, expressed_success=True)
    lose = ctx(system_acts=(INFORM_PHONE,), done=True, expressed_success=False)
    assert system_reward(win, CFG)[0] == 20.0
    assert system_reward(lose, CFG)[0] == -5.0


def test_user_empty_act_penalty():
    r, fired = user_reward(ctx(system_acts=(INFORM_PHONE,)), CFG)
    assert r == -5.0
    assert fired == (("empty_act", -5.0),)


def test_user_early_request_penalty():
    c = ctx(user_acts=(REQ,), unexpressed_constraints={"rest": 1})
    assert user_reward(c, CFG)[0] == -1.0


def test_user_request_after_constraints_ok():
    c = ctx(user_acts=(REQ,), unexpressed_constraints={"rest": 0})
    assert user_reward(c, CFG)[0] == 0.0


def test_user_early_request_is_per_domain():
    c = ctx(user_acts=(REQ,), unexpressed_constraints={"rest": 0, "lodge": 2})
    assert user_reward(c, CFG)[0] == 0.0


def test_user_done_outcomes():
    win = ctx(user_acts=(REQ,), done=True, user_expressed_all=True)
    lose = ctx(user_acts=(REQ,), done=True, user_expressed_all=False)
    assert user_reward(win, CFG)[0] == 20.0
    assert user_reward(lose, CFG)[0] == -5.0


def test_global_efficiency_each_turn():
    r, fired = global_reward(ctx(), CFG)
    assert r == -1.0
    assert fired == (("efficiency", -1.0),)


def test_global_subgoal_completion():
    r, _ = global_reward(ctx(newly_completed_domains=("rest",)), CFG)
    assert r == -1.0 + 5.0


def test_global_success_with_final_subgoal():
    c = ctx(newly_completed_domains=("rest",), done=True, global_success=True)
    assert global_reward(c, CFG)[0] == -1.0 + 5.0 + 20.0


def test_global_failure_at_done():
    assert global_reward(ctx(done=True), CFG)[0] == -6.0


def test_system_success_can_coexist_with_global_failure():
    # the user never asked for the one thing the goal wanted: the system
    # satisfied the expressed goal while failing the hidden one
    c = ctx(
        user_acts=(USER_INFORM,),
        system_acts=(INFORM_PHONE,),
        done=True,
        expressed_success=True,
        user_expressed_all=False,
        global_success=False,
    )
    bd = compute_rewards(c, CFG)
    assert bd.r_S == 20.0
    assert bd.r_G == -6.0
    assert bd.r_U == -5.0


def test_breakdown_sums_match_components():
    c = ctx(
        user_acts=(REQ,),
        unexpressed_constraints={"rest": 1},
        newly_completed_domains=("rest",),
        done=True,
        expressed_success=True,
        user_expressed_all=True,
        global_success=True,
    )
    bd = compute_rewards(c, CFG)
    for stream, attr in (("system", bd.r_S), ("user", bd.r_U), ("global", bd.r_G)):
        assert attr == sum(v for s, _, v in bd.components if s == stream)
    assert bd.total() == bd.r_S + bd.r_U + bd.r_G


@settings(max_examples=50, deadline=None)
@given(
    n_user=st.integers(0, 2),
    n_sys=st.integers(0, 2),
    done=st.booleans(),
    flags=st.tuples(st.booleans(), st.booleans(), st.booleans()),
    completed=st.lists(st.sampled_from(["rest", "lodge"]), max_size=2, unique=True),
)
def test_decomposition_identity(n_user, n_sys, done, flags, completed):
    c = ctx(
        user_acts=(USER_INFORM, REQ)[:n_user],
        system_acts=(INFORM_PHONE, INFORM_ADDR)[:n_sys],
        unexpressed_constraints={"rest": 1},
        newly_completed_domains=tuple(completed),
        done=done,
        expressed_success=flags[0],
        user_expressed_all=flags[1],
        global_success=flags[2],
    )
    bd = compute_rewards(c, CFG)
    assert bd.total() == sum(v for _, _, v in bd.components)


def test_custom_config_respected():
    cfg = RewardConfig(empty_act_penalty=-2.0, success_reward=7.0)
    r, _ = system_reward(ctx(done=True, expressed_success=True), cfg)
    assert r == -2.0 + 7.0
