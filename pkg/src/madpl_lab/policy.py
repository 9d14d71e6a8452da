"""Dialog actors: sigmoid multi-label policies with behavior cloning.

The system policy maps s^S to per-act probabilities; the user policy adds a
terminal head as its last output. Joint actions factor as independent
Bernoullis, so the log-likelihood and its logit gradient (a - p) have
closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acts import decode_vector
from .errors import DimensionMismatch, EmptyCorpus
from .nets import MlpNet, Rmsprop

ACTOR_HIDDEN = (128, 128)

PROB_FLOOR = 1e-7


def _clamp(p):
    return np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


class DialogPolicy:
    """Multi-label actor for one role; user role carries the terminal dim."""

    def __init__(self, role, space, state_dim, hidden=ACTOR_HIDDEN, rng=None):
        if role not in ("system", "user"):
            raise ValueError(f"unknown role {role!r}")
        self.role = role
        self.space = space
        self.state_dim = int(state_dim)
        out_dim = space.dim + (1 if role == "user" else 0)
        self.net = MlpNet([state_dim, *hidden, out_dim], out_act="sigmoid", rng=rng)

    @property
    def out_dim(self):
        return self.net.out_dim

    def copy(self):
        other = DialogPolicy.__new__(DialogPolicy)
        other.role = self.role
        other.space = self.space
        other.state_dim = self.state_dim
        other.net = self.net.copy()
        return other

    def probs(self, state_vec):
        out, _ = self.net.forward(state_vec)
        return out

    def act(self, state_vec, mode="sample", rng=None):
        """Decode an act set (and terminal flag for the user role).

        'sample' draws independent Bernoullis, 'greedy' thresholds at 0.5.
        """
        p = self.probs(state_vec)
        if self.role == "user":
            act_p, term_p = p[:-1], float(p[-1])
        else:
            act_p, term_p = p, 0.0
        decode_mode = "sample" if mode == "sample" else "threshold"
        acts = decode_vector(act_p, self.space, decode_mode, rng)
        if self.role != "user":
            return acts, False
        if mode == "sample":
            terminal = bool(rng.random() < term_p)
        else:
            terminal = term_p > 0.5
        return acts, terminal


def bc_loss_and_grad(policy, states, targets, beta):
    """Weighted multi-label logistic loss, averaged over batch and dims.

    targets must include the terminal column for user policies. The positive
    class is weighted by beta; the logit gradient is
    (-beta*y*(1-p) + (1-y)*p) / (n*m).
    """
    states = np.asarray(states, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if states.ndim == 1:
        states = states.reshape(1, -1)
        targets = targets.reshape(1, -1)
    if targets.shape[1] != policy.out_dim:
        raise DimensionMismatch(
            f"target dim {targets.shape[1]} != policy output {policy.out_dim}"
        )
    n, m = targets.shape
    p_raw, cache = policy.net.forward(states)
    p = _clamp(p_raw)
    loss = -float(
        np.mean(beta * targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p))
    )
    dz = (-beta * targets * (1.0 - p_raw) + (1.0 - targets) * p_raw) / (n * m)
    grads, _ = policy.net.backward_from_logits(cache, dz)
    return loss, grads


def logprob_and_grad(policy, state_vec, action_vec):
    """log pi(a|s) under the Bernoulli factorization and its ascent gradient."""
    action_vec = np.asarray(action_vec, dtype=np.float64)
    p_raw, cache = policy.net.forward(np.asarray(state_vec, dtype=np.float64))
    p = _clamp(p_raw)
    logp = float(
        np.sum(action_vec * np.log(p) + (1.0 - action_vec) * np.log(1.0 - p))
    )
    grads, _ = policy.net.backward_from_logits(cache, action_vec - p_raw)
    return logp, grads


def weighted_logprob_grad(policy, states, actions, weights):
    """Gradients of the surrogate -mean_i w_i log pi(a_i|s_i).

    weights are treated as constants. Returns (surrogate loss, grads) ready
    for a descent step.
    """
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
    n = states.shape[0]
    p_raw, cache = policy.net.forward(states)
    p = _clamp(p_raw)
    logps = np.sum(
        actions * np.log(p) + (1.0 - actions) * np.log(1.0 - p), axis=1
    )
    loss = -float(np.mean(weights[:, 0] * logps))
    dz = -weights * (actions - p_raw) / n
    grads, _ = policy.net.backward_from_logits(cache, dz)
    return loss, grads


def micro_f1(pred, truth):
    """Per-act micro F1 at threshold 0.5; empty-vs-empty counts as perfect."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    if 2 * tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2 * tp + fp + fn)


@dataclass
class PretrainReport:
    epochs: int
    heldout_f1: list
    train_loss: list

    @property
    def final_f1(self):
        return self.heldout_f1[-1] if self.heldout_f1 else 0.0


def pretrain(policy, records, epochs, batch_size=32, lr=1e-3, beta=1.0, seed=0):
    """Behavior-clone a policy on corpus records with RMSprop.

    records supplies dialog_ids, states, actions, terminal (see corpus
    module); the split into 90/10 train/held-out is by dialog. Held-out
    micro-F1 is measured on act dims only (terminal excluded).
    """
    states = np.asarray(records.states, dtype=np.float64)
    actions = np.asarray(records.actions, dtype=np.float64)
    if states.shape[0] == 0:
        raise EmptyCorpus("no records for role " + policy.role)
    if states.shape[0] < batch_size:
        raise EmptyCorpus(
            f"corpus has {states.shape[0]} records, need at least {batch_size}"
        )
    if policy.role == "user":
        targets = np.hstack(
            [actions, np.asarray(records.terminal, dtype=np.float64).reshape(-1, 1)]
        )
    else:
        targets = actions
    rng = np.random.default_rng(seed)
    ids = np.asarray(records.dialog_ids)
    unique_ids = np.unique(ids)
    perm = rng.permutation(len(unique_ids))
    n_held = max(1, len(unique_ids) // 10)
    held_ids = set(unique_ids[perm[:n_held]].tolist())
    held_mask = np.array([i in held_ids for i in ids])
    train_idx = np.flatnonzero(~held_mask)
    held_idx = np.flatnonzero(held_mask)
    if train_idx.size == 0 or held_idx.size == 0:
        raise EmptyCorpus("dialog split left an empty train or held-out side")

    opt = Rmsprop(policy.net.param_list(), lr=lr)
    n_act = policy.space.dim
    report = PretrainReport(epochs=epochs, heldout_f1=[], train_loss=[])
    for _ in range(epochs):
        order = rng.permutation(train_idx)
        losses = []
        for start in range(0, order.size, batch_size):
            chunk = order[start:start + batch_size]
            loss, grads = bc_loss_and_grad(
                policy, states[chunk], targets[chunk], beta
            )
            opt.step(grads)
            losses.append(loss)
        probs, _ = policy.net.forward(states[held_idx])
        f1 = micro_f1(probs[:, :n_act] > 0.5, targets[held_idx, :n_act] > 0.5)
        report.heldout_f1.append(f1)
        report.train_loss.append(float(np.mean(losses)))
    return report
