"""Actor-critic training loops for both dialog policies.

`train_madpl` updates the shared three-branch critic from a sliding window of
recent transitions, then takes one policy-gradient step per role on the fresh
episode, weighting each turn's log-likelihood by the role advantage plus the
global advantage. The baselines swap the critic arrangement: a single value
net over one role's state (rl-sys / rl-user / iterdpl) or over both states
concatenated (crl).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .critic import (
    HybridValueNet,
    advantages,
    hvn_loss_and_grad,
    make_value_net,
    sync_target,
    value_advantages,
    value_loss_and_grad,
)
from .errors import DivergenceError
from .metrics import summarize
from .nets import Rmsprop
from .ontology import goal_weights_for, sample_goal
from .policy import weighted_logprob_grad
from .rewards import RewardConfig
from .session import (
    PolicySystemAgent,
    PolicyUserAgent,
    rollout_records,
    run_episode,
)

ALGOS = ("madpl", "rl-sys", "rl-user", "crl", "iterdpl")

HISTORY_COLUMNS = (
    "iteration", "episodes", "success", "inform_f1", "match", "avg_turns",
    "mean_r_S", "mean_r_U", "mean_r_G", "L_V",
)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    batch_size: int = 32
    lr_value: float = 3e-5
    lr_sys: float = 1e-4
    lr_user: float = 5e-5
    target_sync_every: int = 400
    window: int = 96
    max_turns: int = 20
    eval_every: int = 200       # episodes between greedy evaluations (0: end only)
    eval_goals: int = 50
    phase_len: int = 500        # iterdpl only: episodes per alternating phase
    reward: RewardConfig = field(default_factory=RewardConfig)


@dataclass
class TrainResult:
    algo: str
    user_policy: object
    sys_policy: object
    critic: object
    history: list
    critic_updates: int
    episodes: int
    seed: int
    config: TrainConfig


def _batch_hvn(transitions):
    return {
        "s_s": np.array([t.s_sys for t in transitions]),
        "s_u": np.array([t.s_user for t in transitions]),
        "next_s_s": np.array([t.next_s_sys for t in transitions]),
        "next_s_u": np.array([t.next_s_user for t in transitions]),
        "r_s": np.array([t.r_sys for t in transitions]),
        "r_u": np.array([t.r_user for t in transitions]),
        "r_g": np.array([t.r_global for t in transitions]),
        "done": np.array([float(t.done) for t in transitions]),
    }


def _batch_value(transitions, states, rewards):
    """Single-head critic batch; states/rewards pick the view."""
    return {
        "x": np.array([states(t) for t in transitions]),
        "next_x": np.array([states(t, True) for t in transitions]),
        "r": np.array([rewards(t) for t in transitions]),
        "done": np.array([float(t.done) for t in transitions]),
    }


def _sys_view(t, nxt=False):
    return t.next_s_sys if nxt else t.s_sys


def _user_view(t, nxt=False):
    return t.next_s_user if nxt else t.s_user


def _joint_view(t, nxt=False):
    if nxt:
        return np.concatenate([t.next_s_sys, t.next_s_user])
    return np.concatenate([t.s_sys, t.s_user])


def _actor_step(policy, opt, transitions, weights):
    """One descent step on the advantage-weighted log-likelihood."""
    if policy.role == "user":
        states = np.array([t.s_user for t in transitions])
        actions = np.array(
            [np.append(t.a_user, float(t.terminal)) for t in transitions]
        )
    else:
        states = np.array([t.s_sys for t in transitions])
        actions = np.array([t.a_sys for t in transitions])
    loss, grads = weighted_logprob_grad(policy, states, actions, weights)
    if not np.isfinite(loss):
        raise DivergenceError(f"{policy.role} actor loss is not finite")
    opt.step(grads)
    return loss


def _require_finite(value, what):
    if not np.isfinite(value):
        raise DivergenceError(f"{what} is not finite")
    return value


def greedy_eval(world, user_policy, sys_policy, goals, max_turns=20):
    """Deterministic rollouts of the pair on a fixed goal list."""
    records = rollout_records(
        world, goals,
        PolicyUserAgent(user_policy, mode="greedy"),
        PolicySystemAgent(sys_policy, mode="greedy"),
        max_turns=max_turns,
    )
    return summarize(records, world)


def _eval_goal_set(world, seed, n):
    rng = np.random.default_rng([seed, 0xE7A1])
    weights = goal_weights_for(world.ontology)
    return [sample_goal(world.ontology, world.db, rng, weights) for _ in range(n)]


class _History:
    """Accumulates per-episode stats and emits fixed-schema rows."""

    def __init__(self, verbose=False):
        self.rows = []
        self.verbose = verbose
        self._reset_window()

    def _reset_window(self):
        self.r_sums = np.zeros(3)
        self.lv_sum = 0.0
        self.lv_n = 0
        self.n_episodes = 0

    def note_episode(self, episode):
        self.r_sums += episode.returns()
        self.n_episodes += 1

    def note_critic(self, loss):
        self.lv_sum += loss
        self.lv_n += 1

    def emit(self, iteration, episodes, report):
        n = max(1, self.n_episodes)
        row = {
            "iteration": iteration,
            "episodes": episodes,
            "success": report.success,
            "inform_f1": report.inform_f1,
            "match": report.match,
            "avg_turns": report.avg_turns,
            "mean_r_S": self.r_sums[0] / n,
            "mean_r_U": self.r_sums[1] / n,
            "mean_r_G": self.r_sums[2] / n,
            "L_V": self.lv_sum / self.lv_n if self.lv_n else 0.0,
        }
        self.rows.append(row)
        if self.verbose:
            print(
                f"it {row['iteration']:>6}  success {row['success']:.3f}  "
                f"inform_f1 {row['inform_f1']:.3f}  match {row['match']:.3f}  "
                f"turns {row['avg_turns']:.2f}  L_V {row['L_V']:.3f}"
            )
        self._reset_window()


def history_csv(rows):
    lines = [",".join(HISTORY_COLUMNS)]
    for row in rows:
        lines.append(",".join(f"{row[c]:.6g}" if isinstance(row[c], float)
                              else str(row[c]) for c in HISTORY_COLUMNS))
    return "\n".join(lines) + "\n"


def train_madpl(world, user_policy, sys_policy, episodes, seed,
                config=TrainConfig(), verbose=False, checkpoint=None):
    """Joint actor-critic training of both policies with the shared critic.

    checkpoint, when given, is called with the iteration number at every
    periodic evaluation; callers use it to snapshot the nets they own.
    """
    layout = world.layout
    rng = np.random.default_rng([seed, 1])
    hvn = HybridValueNet(layout.sys_dim, layout.user_dim,
                         rng=np.random.default_rng([seed, 2]))
    target = hvn.copy()
    opt_v = Rmsprop(hvn.param_list(), lr=config.lr_value)
    opt_s = Rmsprop(sys_policy.net.param_list(), lr=config.lr_sys)
    opt_u = Rmsprop(user_policy.net.param_list(), lr=config.lr_user)
    user_agent = PolicyUserAgent(user_policy, "sample", np.random.default_rng([seed, 3]))
    sys_agent = PolicySystemAgent(sys_policy, "sample", np.random.default_rng([seed, 4]))
    weights = goal_weights_for(world.ontology)
    eval_goals = _eval_goal_set(world, seed, config.eval_goals)
    window = deque(maxlen=config.window)
    history = _History(verbose)
    critic_updates = 0

    for it in range(1, episodes + 1):
        goal = sample_goal(world.ontology, world.db, rng, weights)
        ep = run_episode(world, goal, user_agent, sys_agent,
                         max_turns=config.max_turns, reward_config=config.reward)
        window.extend(ep.transitions)
        history.note_episode(ep)

        if len(window) >= config.batch_size:
            idx = rng.choice(len(window), size=config.batch_size, replace=False)
            batch = _batch_hvn([window[i] for i in idx])
            loss_v, grads, _ = hvn_loss_and_grad(hvn, target, batch, config.gamma)
            _require_finite(loss_v, "critic loss")
            opt_v.step(grads)
            critic_updates += 1
            history.note_critic(loss_v)
            if critic_updates % config.target_sync_every == 0:
                sync_target(hvn, target)

        ep_batch = _batch_hvn(ep.transitions)
        a_s, a_u, a_g = advantages(hvn, ep_batch, config.gamma)
        _actor_step(sys_policy, opt_s, ep.transitions, a_s + a_g)
        _actor_step(user_policy, opt_u, ep.transitions, a_u + a_g)

        if config.eval_every and it % config.eval_every == 0:
            report = greedy_eval(world, user_policy, sys_policy, eval_goals,
                                 config.max_turns)
            history.emit(it, it, report)
            if checkpoint is not None:
                checkpoint(it)

    if not history.rows or history.rows[-1]["iteration"] != episodes:
        report = greedy_eval(world, user_policy, sys_policy, eval_goals,
                             config.max_turns)
        history.emit(episodes, episodes, report)
    return TrainResult(
        algo="madpl", user_policy=user_policy, sys_policy=sys_policy,
        critic=hvn, history=history.rows, critic_updates=critic_updates,
        episodes=episodes, seed=seed, config=config,
    )


def _single_critic_phase(role):
    """View functions and reward mix for one learning role."""
    if role == "user":
        return _user_view, lambda t: t.r_user + t.r_global
    return _sys_view, lambda t: t.r_sys + t.r_global


def train_single_rl(world, learn_role, user_policy, sys_policy, episodes, seed,
                    config=TrainConfig(), verbose=False, checkpoint=None):
    """One policy learns against a frozen partner; its critic sees own state
    and the role reward plus the global stream."""
    if learn_role not in ("user", "system"):
        raise ValueError(f"unknown role {learn_role!r}")
    layout = world.layout
    rng = np.random.default_rng([seed, 1])
    own_dim = layout.user_dim if learn_role == "user" else layout.sys_dim
    net = make_value_net(own_dim, rng=np.random.default_rng([seed, 2]))
    target = net.copy()
    opt_v = Rmsprop(net.param_list(), lr=config.lr_value)
    policy = user_policy if learn_role == "user" else sys_policy
    lr_pi = config.lr_user if learn_role == "user" else config.lr_sys
    opt_pi = Rmsprop(policy.net.param_list(), lr=lr_pi)
    user_agent = PolicyUserAgent(user_policy, "sample", np.random.default_rng([seed, 3]))
    sys_agent = PolicySystemAgent(sys_policy, "sample", np.random.default_rng([seed, 4]))
    weights = goal_weights_for(world.ontology)
    eval_goals = _eval_goal_set(world, seed, config.eval_goals)
    view, reward = _single_critic_phase(learn_role)
    window = deque(maxlen=config.window)
    history = _History(verbose)
    critic_updates = 0

    for it in range(1, episodes + 1):
        goal = sample_goal(world.ontology, world.db, rng, weights)
        ep = run_episode(world, goal, user_agent, sys_agent,
                         max_turns=config.max_turns, reward_config=config.reward)
        window.extend(ep.transitions)
        history.note_episode(ep)

        if len(window) >= config.batch_size:
            idx = rng.choice(len(window), size=config.batch_size, replace=False)
            batch = _batch_value([window[i] for i in idx], view, reward)
            loss_v, grads = value_loss_and_grad(net, target, batch, config.gamma)
            _require_finite(loss_v, "critic loss")
            opt_v.step(grads)
            critic_updates += 1
            history.note_critic(loss_v)
            if critic_updates % config.target_sync_every == 0:
                sync_target(net, target)

        adv = value_advantages(net, _batch_value(ep.transitions, view, reward),
                               config.gamma)
        _actor_step(policy, opt_pi, ep.transitions, adv)

        if config.eval_every and it % config.eval_every == 0:
            history.emit(it, it, greedy_eval(world, user_policy, sys_policy,
                                             eval_goals, config.max_turns))
            if checkpoint is not None:
                checkpoint(it)

    if not history.rows or history.rows[-1]["iteration"] != episodes:
        history.emit(episodes, episodes,
                     greedy_eval(world, user_policy, sys_policy, eval_goals,
                                 config.max_turns))
    return TrainResult(
        algo=f"rl-{'user' if learn_role == 'user' else 'sys'}",
        user_policy=user_policy, sys_policy=sys_policy, critic=net,
        history=history.rows, critic_updates=critic_updates,
        episodes=episodes, seed=seed, config=config,
    )


def train_crl(world, user_policy, sys_policy, episodes, seed,
              config=TrainConfig(), verbose=False, checkpoint=None):
    """Centralized baseline: one critic over both states, one summed reward,
    and the same scalar advantage feeding both actors."""
    layout = world.layout
    rng = np.random.default_rng([seed, 1])
    net = make_value_net(layout.sys_dim + layout.user_dim,
                         rng=np.random.default_rng([seed, 2]))
    target = net.copy()
    opt_v = Rmsprop(net.param_list(), lr=config.lr_value)
    opt_s = Rmsprop(sys_policy.net.param_list(), lr=config.lr_sys)
    opt_u = Rmsprop(user_policy.net.param_list(), lr=config.lr_user)
    user_agent = PolicyUserAgent(user_policy, "sample", np.random.default_rng([seed, 3]))
    sys_agent = PolicySystemAgent(sys_policy, "sample", np.random.default_rng([seed, 4]))
    weights = goal_weights_for(world.ontology)
    eval_goals = _eval_goal_set(world, seed, config.eval_goals)

    def reward(t):
        return t.r_sys + t.r_user + t.r_global

    window = deque(maxlen=config.window)
    history = _History(verbose)
    critic_updates = 0

    for it in range(1, episodes + 1):
        goal = sample_goal(world.ontology, world.db, rng, weights)
        ep = run_episode(world, goal, user_agent, sys_agent,
                         max_turns=config.max_turns, reward_config=config.reward)
        window.extend(ep.transitions)
        history.note_episode(ep)

        if len(window) >= config.batch_size:
            idx = rng.choice(len(window), size=config.batch_size, replace=False)
            batch = _batch_value([window[i] for i in idx], _joint_view, reward)
            loss_v, grads = value_loss_and_grad(net, target, batch, config.gamma)
            _require_finite(loss_v, "critic loss")
            opt_v.step(grads)
            critic_updates += 1
            history.note_critic(loss_v)
            if critic_updates % config.target_sync_every == 0:
                sync_target(net, target)

        adv = value_advantages(
            net, _batch_value(ep.transitions, _joint_view, reward), config.gamma
        )
        _actor_step(sys_policy, opt_s, ep.transitions, adv)
        _actor_step(user_policy, opt_u, ep.transitions, adv)

        if config.eval_every and it % config.eval_every == 0:
            history.emit(it, it, greedy_eval(world, user_policy, sys_policy,
                                             eval_goals, config.max_turns))
            if checkpoint is not None:
                checkpoint(it)

    if not history.rows or history.rows[-1]["iteration"] != episodes:
        history.emit(episodes, episodes,
                     greedy_eval(world, user_policy, sys_policy, eval_goals,
                                 config.max_turns))
    return TrainResult(
        algo="crl", user_policy=user_policy, sys_policy=sys_policy, critic=net,
        history=history.rows, critic_updates=critic_updates,
        episodes=episodes, seed=seed, config=config,
    )


def iterdpl_role(iteration, phase_len):
    """Which role learns at a 1-based iteration; the user phase comes first."""
    return "user" if ((iteration - 1) // phase_len) % 2 == 0 else "system"


def train_iterdpl(world, user_policy, sys_policy, episodes, seed,
                  config=TrainConfig(), verbose=False, checkpoint=None):
    """Alternating single-agent phases, user first; each role keeps its own
    critic across its phases."""
    layout = world.layout
    rng = np.random.default_rng([seed, 1])
    nets = {
        "user": make_value_net(layout.user_dim, rng=np.random.default_rng([seed, 2])),
        "system": make_value_net(layout.sys_dim, rng=np.random.default_rng([seed, 5])),
    }
    targets = {role: nets[role].copy() for role in nets}
    opt_v = {role: Rmsprop(nets[role].param_list(), lr=config.lr_value)
             for role in nets}
    opt_pi = {
        "user": Rmsprop(user_policy.net.param_list(), lr=config.lr_user),
        "system": Rmsprop(sys_policy.net.param_list(), lr=config.lr_sys),
    }
    policies = {"user": user_policy, "system": sys_policy}
    user_agent = PolicyUserAgent(user_policy, "sample", np.random.default_rng([seed, 3]))
    sys_agent = PolicySystemAgent(sys_policy, "sample", np.random.default_rng([seed, 4]))
    weights = goal_weights_for(world.ontology)
    eval_goals = _eval_goal_set(world, seed, config.eval_goals)
    windows = {role: deque(maxlen=config.window) for role in nets}
    history = _History(verbose)
    critic_updates = 0

    for it in range(1, episodes + 1):
        role = iterdpl_role(it, config.phase_len)
        view, reward = _single_critic_phase(role)
        goal = sample_goal(world.ontology, world.db, rng, weights)
        ep = run_episode(world, goal, user_agent, sys_agent,
                         max_turns=config.max_turns, reward_config=config.reward)
        window = windows[role]
        window.extend(ep.transitions)
        history.note_episode(ep)

        if len(window) >= config.batch_size:
            idx = rng.choice(len(window), size=config.batch_size, replace=False)
            batch = _batch_value([window[i] for i in idx], view, reward)
            loss_v, grads = value_loss_and_grad(nets[role], targets[role], batch,
                                                config.gamma)
            _require_finite(loss_v, "critic loss")
            opt_v[role].step(grads)
            critic_updates += 1
            history.note_critic(loss_v)
            if critic_updates % config.target_sync_every == 0:
                sync_target(nets[role], targets[role])

        adv = value_advantages(nets[role],
                               _batch_value(ep.transitions, view, reward),
                               config.gamma)
        _actor_step(policies[role], opt_pi[role], ep.transitions, adv)

        if config.eval_every and it % config.eval_every == 0:
            history.emit(it, it, greedy_eval(world, user_policy, sys_policy,
                                             eval_goals, config.max_turns))
            if checkpoint is not None:
                checkpoint(it)

    if not history.rows or history.rows[-1]["iteration"] != episodes:
        history.emit(episodes, episodes,
                     greedy_eval(world, user_policy, sys_policy, eval_goals,
                                 config.max_turns))
    return TrainResult(
        algo="iterdpl", user_policy=user_policy, sys_policy=sys_policy,
        critic=nets, history=history.rows, critic_updates=critic_updates,
        episodes=episodes, seed=seed, config=config,
    )


def train(world, algo, user_policy, sys_policy, episodes, seed,
          config=TrainConfig(), verbose=False, checkpoint=None):
    """Dispatch by algorithm name (see ALGOS)."""
    if algo == "madpl":
        return train_madpl(world, user_policy, sys_policy, episodes, seed,
                           config, verbose, checkpoint)
    if algo == "rl-sys":
        return train_single_rl(world, "system", user_policy, sys_policy,
                               episodes, seed, config, verbose, checkpoint)
    if algo == "rl-user":
        return train_single_rl(world, "user", user_policy, sys_policy,
                               episodes, seed, config, verbose, checkpoint)
    if algo == "crl":
        return train_crl(world, user_policy, sys_policy, episodes, seed,
                         config, verbose, checkpoint)
    if algo == "iterdpl":
        return train_iterdpl(world, user_policy, sys_policy, episodes, seed,
                             config, verbose, checkpoint)
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGOS}")
