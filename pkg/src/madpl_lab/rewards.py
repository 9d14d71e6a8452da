"""Role-aware reward decomposition: per-turn r_S, r_U, r_G.

Each stream is a pure function of a TurnContext the session assembles. A
RewardBreakdown keeps the fired components by name so tests and logs can
audit exactly which triggers produced a value.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RewardConfig:
    empty_act_penalty: float = -5.0
    late_answer_penalty: float = -1.0
    early_inform_penalty: float = -1.0
    efficiency_penalty: float = -1.0
    subgoal_reward: float = 5.0
    success_reward: float = 20.0
    failure_penalty: float = -5.0


@dataclass(frozen=True)
class TurnContext:
    """Everything the reward streams need about one turn exchange."""

    user_acts: tuple
    system_acts: tuple
    unexpressed_constraints: dict   # domain -> C slots still unexpressed after
                                    # this turn's own user informs
    newly_completed_domains: tuple
    done: bool
    expressed_success: bool = False  # system met everything the user expressed
    user_expressed_all: bool = False
    global_success: bool = False


@dataclass(frozen=True)
class RewardBreakdown:
    r_S: float
    r_U: float
    r_G: float
    components: tuple   # (stream, trigger name, value)

    def total(self):
        return self.r_S + self.r_U + self.r_G


def _requests(acts):
    return {(a.domain, a.slot) for a in acts if a.intent == "request"}


def _informs(acts):
    return {(a.domain, a.slot) for a in acts if a.intent == "inform"}


def system_reward(ctx, cfg=RewardConfig()):
    """Empty-act and late-answer penalties; expressed-goal outcome at done."""
    fired = []
    if not ctx.system_acts:
        fired.append(("empty_act", cfg.empty_act_penalty))
    pending = _requests(ctx.user_acts) - _informs(ctx.system_acts)
    if pending:
        fired.append(("late_answer", cfg.late_answer_penalty))
    if ctx.done:
        if ctx.expressed_success:
            fired.append(("expressed_success", cfg.success_reward))
        else:
            fired.append(("expressed_failure", cfg.failure_penalty))
    return sum(v for _, v in fired), tuple(fired)


def user_reward(ctx, cfg=RewardConfig()):
    """Empty-act and early-request penalties; goal expression outcome at done."""
    fired = []
    if not ctx.user_acts:
        fired.append(("empty_act", cfg.empty_act_penalty))
    early = any(
        ctx.unexpressed_constraints.get(d, 0) > 0
        for d, _ in _requests(ctx.user_acts)
    )
    if early:
        fired.append(("early_request", cfg.early_inform_penalty))
    if ctx.done:
        if ctx.user_expressed_all:
            fired.append(("expressed_all", cfg.success_reward))
        else:
            fired.append(("expressed_incomplete", cfg.failure_penalty))
    return sum(v for _, v in fired), tuple(fired)


def global_reward(ctx, cfg=RewardConfig()):
    """Per-turn efficiency penalty, one-shot subgoal rewards, final outcome."""
    fired = [("efficiency", cfg.efficiency_penalty)]
    for d in ctx.newly_completed_domains:
        fired.append((f"subgoal:{d}", cfg.subgoal_reward))
    if ctx.done:
        if ctx.global_success:
            fired.append(("task_success", cfg.success_reward))
        else:
            fired.append(("task_failure", cfg.failure_penalty))
    return sum(v for _, v in fired), tuple(fired)


def compute_rewards(ctx, cfg=RewardConfig()):
    r_s, fired_s = system_reward(ctx, cfg)
    r_u, fired_u = user_reward(ctx, cfg)
    r_g, fired_g = global_reward(ctx, cfg)
    components = tuple(
        [("system", name, value) for name, value in fired_s]
        + [("user", name, value) for name, value in fired_u]
        + [("global", name, value) for name, value in fired_g]
    )
    return RewardBreakdown(r_S=r_s, r_U=r_u, r_G=r_g, components=components)
