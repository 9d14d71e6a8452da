"""Hybrid value network: role encoders feeding V^S, V^U, V^G branches.

The two encoders squash each role's state into a shared-width code; the
role heads read their own code only, the global head reads both. TD targets
come from a frozen copy synced every C iterations. Also provides the plain
single-head critic used by the RL and CRL baselines.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch
from .nets import MlpNet

ENC_HIDDEN = (256, 256)
HEAD_HIDDEN = (128, 128)
CODE_DIM = 64


class HybridValueNet:
    """Three-branch critic over the pair of role states."""

    NET_NAMES = ("enc_s", "enc_u", "head_s", "head_u", "head_g")

    def __init__(self, s_dim, u_dim, code_dim=CODE_DIM, enc_hidden=ENC_HIDDEN,
                 head_hidden=HEAD_HIDDEN, rng=None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.s_dim = int(s_dim)
        self.u_dim = int(u_dim)
        self.code_dim = int(code_dim)
        self.enc_s = MlpNet([s_dim, *enc_hidden, code_dim], out_act="tanh", rng=rng)
        self.enc_u = MlpNet([u_dim, *enc_hidden, code_dim], out_act="tanh", rng=rng)
        self.head_s = MlpNet([code_dim, *head_hidden, 1], rng=rng)
        self.head_u = MlpNet([code_dim, *head_hidden, 1], rng=rng)
        self.head_g = MlpNet([2 * code_dim, *head_hidden, 1], rng=rng)

    def nets(self):
        return [getattr(self, name) for name in self.NET_NAMES]

    def param_list(self):
        return [p for net in self.nets() for p in net.param_list()]

    def n_params(self):
        return sum(p.size for p in self.param_list())

    def get_flat(self):
        return np.concatenate([n.get_flat() for n in self.nets()])

    def set_flat(self, vec):
        off = 0
        for net in self.nets():
            n = net.n_params()
            net.set_flat(vec[off:off + n])
            off += n
        if off != np.asarray(vec).size:
            raise DimensionMismatch("flat vector size mismatch")

    def copy(self):
        other = HybridValueNet.__new__(HybridValueNet)
        other.s_dim, other.u_dim = self.s_dim, self.u_dim
        other.code_dim = self.code_dim
        for name in self.NET_NAMES:
            setattr(other, name, getattr(self, name).copy())
        return other

    def copy_from(self, other):
        for name in self.NET_NAMES:
            getattr(self, name).copy_from(getattr(other, name))

    def all_finite(self):
        return all(net.all_finite() for net in self.nets())

    def forward(self, s_s, s_u):
        """(V_S, V_U, V_G, cache); values are (n,) arrays or scalars."""
        s_s = np.asarray(s_s, dtype=np.float64)
        s_u = np.asarray(s_u, dtype=np.float64)
        squeeze = s_s.ndim == 1
        if squeeze != (s_u.ndim == 1):
            raise DimensionMismatch("state batches must agree in rank")
        if squeeze:
            s_s = s_s.reshape(1, -1)
            s_u = s_u.reshape(1, -1)
        h_s, c_enc_s = self.enc_s.forward(s_s)
        h_u, c_enc_u = self.enc_u.forward(s_u)
        v_s, c_head_s = self.head_s.forward(h_s)
        v_u, c_head_u = self.head_u.forward(h_u)
        v_g, c_head_g = self.head_g.forward(
            np.ascontiguousarray(np.concatenate([h_s, h_u], axis=1))
        )
        cache = {
            "enc_s": c_enc_s, "enc_u": c_enc_u,
            "head_s": c_head_s, "head_u": c_head_u, "head_g": c_head_g,
            "squeeze": squeeze,
        }
        if squeeze:
            return float(v_s[0, 0]), float(v_u[0, 0]), float(v_g[0, 0]), cache
        return v_s[:, 0], v_u[:, 0], v_g[:, 0], cache

    def backward(self, cache, d_vs, d_vu, d_vg):
        """Gradients in param_list order from per-branch value gradients."""
        def col(d):
            d = np.asarray(d, dtype=np.float64)
            return np.ascontiguousarray(d.reshape(-1, 1))

        g_head_s, dh_s = self.head_s.backward(cache["head_s"], col(d_vs))
        g_head_u, dh_u = self.head_u.backward(cache["head_u"], col(d_vu))
        g_head_g, dh_cat = self.head_g.backward(cache["head_g"], col(d_vg))
        k = self.code_dim
        dh_s = dh_s + dh_cat[:, :k]
        dh_u = dh_u + dh_cat[:, k:]
        g_enc_s, _ = self.enc_s.backward(cache["enc_s"], np.ascontiguousarray(dh_s))
        g_enc_u, _ = self.enc_u.backward(cache["enc_u"], np.ascontiguousarray(dh_u))
        return g_enc_s + g_enc_u + g_head_s + g_head_u + g_head_g


def sync_target(hvn, target):
    """theta_minus := theta (full copy)."""
    target.copy_from(hvn)


def hvn_loss_and_grad(hvn, target, batch, gamma):
    """Summed per-branch squared TD errors over a batch of transitions.

    batch keys: s_s, s_u, next_s_s, next_s_u (2-D), r_s, r_u, r_g, done
    (1-D). The bootstrap term is dropped where done. Returns
    (L_V, grads, (L_S, L_U, L_G)); the target parameters receive no gradient.
    """
    n = batch["s_s"].shape[0]
    v_s, v_u, v_g, cache = hvn.forward(batch["s_s"], batch["s_u"])
    t_s, t_u, t_g, _ = target.forward(batch["next_s_s"], batch["next_s_u"])
    live = 1.0 - np.asarray(batch["done"], dtype=np.float64)
    e_s = v_s - (batch["r_s"] + gamma * t_s * live)
    e_u = v_u - (batch["r_u"] + gamma * t_u * live)
    e_g = v_g - (batch["r_g"] + gamma * t_g * live)
    parts = (
        float(np.mean(e_s ** 2)),
        float(np.mean(e_u ** 2)),
        float(np.mean(e_g ** 2)),
    )
    grads = hvn.backward(cache, 2.0 * e_s / n, 2.0 * e_u / n, 2.0 * e_g / n)
    return sum(parts), grads, parts


def advantages(hvn, batch, gamma):
    """One-step per-branch advantages from the live network."""
    v_s, v_u, v_g, _ = hvn.forward(batch["s_s"], batch["s_u"])
    n_s, n_u, n_g, _ = hvn.forward(batch["next_s_s"], batch["next_s_u"])
    live = 1.0 - np.asarray(batch["done"], dtype=np.float64)
    a_s = batch["r_s"] + gamma * n_s * live - v_s
    a_u = batch["r_u"] + gamma * n_u * live - v_u
    a_g = batch["r_g"] + gamma * n_g * live - v_g
    return a_s, a_u, a_g


def make_value_net(in_dim, hidden=ENC_HIDDEN, rng=None):
    """Single-head critic for the RL and CRL baselines."""
    return MlpNet([in_dim, *hidden, 1], rng=rng)


def value_loss_and_grad(net, target, batch, gamma):
    """Squared TD error for a single-head critic; batch keys x, r, next_x, done."""
    n = batch["x"].shape[0]
    v, cache = net.forward(batch["x"])
    t, _ = target.forward(batch["next_x"])
    live = 1.0 - np.asarray(batch["done"], dtype=np.float64)
    e = v[:, 0] - (batch["r"] + gamma * t[:, 0] * live)
    loss = float(np.mean(e ** 2))
    grads, _ = net.backward(cache, np.ascontiguousarray((2.0 * e / n).reshape(-1, 1)))
    return loss, grads


def value_advantages(net, batch, gamma):
    v, _ = net.forward(batch["x"])
    nv, _ = net.forward(batch["next_x"])
    live = 1.0 - np.asarray(batch["done"], dtype=np.float64)
    return batch["r"] + gamma * nv[:, 0] * live - v[:, 0]
