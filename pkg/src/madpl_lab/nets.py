"""Minimal dense-network machinery: MLPs, backprop, RMSprop, checkpoints.

Everything is float64 and deterministic given the caller's RNG. Forward and
backward are pure given a parameter snapshot; only optimizer steps mutate
parameters. The heavy kernels live in the selected backend (see
``backend.py``).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .backend import ops
from .errors import DimensionMismatch, StaleCache

MAGIC = b"MADPLNET"
FORMAT_VERSION = 1

OUT_ACTS = ("identity", "sigmoid", "tanh")


def glorot_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class MlpNet:
    """Fully-connected net with relu hidden layers and a configurable output.

    ``dims`` chains input through hidden layers to the output, e.g.
    ``[136, 128, 128, 42]``. ``out_act`` is one of 'identity', 'sigmoid',
    'tanh'.
    """

    def __init__(self, dims, out_act="identity", rng=None):
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        if out_act not in OUT_ACTS:
            raise ValueError(f"unknown output activation {out_act!r}")
        self.dims = list(int(d) for d in dims)
        self.out_act = out_act
        if rng is None:
            rng = np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for din, dout in zip(self.dims[:-1], self.dims[1:]):
            self.weights.append(np.ascontiguousarray(glorot_uniform(rng, din, dout)))
            self.biases.append(np.zeros(dout))

    @property
    def in_dim(self):
        return self.dims[0]

    @property
    def out_dim(self):
        return self.dims[-1]

    def param_list(self):
        """Parameter arrays in a fixed order (W0, b0, W1, b1, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def n_params(self):
        return sum(p.size for p in self.param_list())

    def copy(self):
        other = MlpNet.__new__(MlpNet)
        other.dims = list(self.dims)
        other.out_act = self.out_act
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def copy_from(self, other):
        if other.dims != self.dims:
            raise DimensionMismatch("cannot copy parameters between different shapes")
        for dst, src in zip(self.param_list(), other.param_list()):
            np.copyto(dst, src)

    def forward(self, x):
        """Run the net; returns (output, cache) with cache feeding backward."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x.reshape(1, -1)
        if x.shape[1] != self.dims[0]:
            raise DimensionMismatch(
                f"input dim {x.shape[1]} != net input dim {self.dims[0]}"
            )
        a = np.ascontiguousarray(x)
        pre = []
        post = [a]
        n_layers = len(self.weights)
        for i in range(n_layers):
            z = ops.affine_fwd(a, self.weights[i], self.biases[i])
            pre.append(z)
            if i < n_layers - 1:
                a = ops.relu_fwd(z)
            elif self.out_act == "sigmoid":
                a = ops.sigmoid_fwd(z)
            elif self.out_act == "tanh":
                a = ops.tanh_fwd(z)
            else:
                a = z
            post.append(a)
        out = post[-1]
        cache = {"pre": pre, "post": post, "squeeze": squeeze}
        return (out[0] if squeeze else out), cache

    def backward(self, cache, dout):
        """Exact reverse-mode gradients of forward.

        Returns (grads, dx) where grads matches param_list() order.
        """
        dout = np.asarray(dout, dtype=np.float64)
        if cache.get("squeeze"):
            dout = dout.reshape(1, -1)
        pre, post = cache["pre"], cache["post"]
        if len(pre) != len(self.weights) or dout.shape != post[-1].shape:
            raise StaleCache("cache does not match this net/output gradient")
        dout = np.ascontiguousarray(dout)
        if self.out_act == "sigmoid":
            dz = ops.sigmoid_bwd(dout, post[-1])
        elif self.out_act == "tanh":
            dz = ops.tanh_bwd(dout, post[-1])
        else:
            dz = dout
        return self._backward_core(cache, dz)

    def backward_from_logits(self, cache, dz):
        """Backward given the gradient w.r.t. the final pre-activation.

        Skips the output-activation chain step; useful when a loss's logit
        gradient has a closed form that stays stable under saturation.
        """
        dz = np.asarray(dz, dtype=np.float64)
        if cache.get("squeeze"):
            dz = dz.reshape(1, -1)
        if dz.shape != cache["post"][-1].shape:
            raise StaleCache("cache does not match this logit gradient")
        return self._backward_core(cache, np.ascontiguousarray(dz))

    def _backward_core(self, cache, dz):
        pre, post = cache["pre"], cache["post"]
        n_layers = len(self.weights)
        grads = [None] * (2 * n_layers)
        for i in range(n_layers - 1, -1, -1):
            dx, dw, db = ops.affine_bwd(dz, post[i], self.weights[i])
            grads[2 * i] = dw
            grads[2 * i + 1] = db
            if i > 0:
                dz = ops.relu_bwd(dx, pre[i - 1])
        if cache.get("squeeze"):
            dx = dx[0]
        return grads, dx

    def get_flat(self):
        return np.concatenate([p.reshape(-1) for p in self.param_list()])

    def set_flat(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.n_params():
            raise DimensionMismatch("flat vector size mismatch")
        off = 0
        for p in self.param_list():
            p[...] = vec[off:off + p.size].reshape(p.shape)
            off += p.size

    def all_finite(self):
        return all(np.isfinite(p).all() for p in self.param_list())


class Rmsprop:
    """RMSprop state over a list of parameter arrays (updated in place).

    v <- 0.99 v + 0.01 g^2;  p <- p - lr * g / (sqrt(v) + 1e-8)
    """

    def __init__(self, params, lr, decay=0.99, eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.decay = float(decay)
        self.eps = float(eps)
        self.avg = [np.zeros(p.size) for p in self.params]

    def step(self, grads):
        if len(grads) != len(self.params):
            raise DimensionMismatch("gradient list does not match parameter list")
        for p, g, v in zip(self.params, grads, self.avg):
            g = np.ascontiguousarray(np.asarray(g, dtype=np.float64).reshape(-1))
            if g.size != p.size:
                raise DimensionMismatch("gradient shape does not match parameter")
            ops.rmsprop_update(p.reshape(-1), g, v, self.lr, self.decay, self.eps)


def fd_gradient(f, params, h=1e-5):
    """Central-difference gradient of a scalar function of a flat vector."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + h
        hi = f(params)
        params[i] = orig - h
        lo = f(params)
        params[i] = orig
        grad[i] = (hi - lo) / (2.0 * h)
    return grad


def save_nets(path, named_nets, meta=None):
    """Write named MLPs to a single binary checkpoint.

    Layout: magic, u32 version, u32 header length, JSON header (net names,
    dims, activations, optional meta), then each net's parameters flattened
    in param_list() order as little-endian float64.
    """
    header = {
        "version": FORMAT_VERSION,
        "meta": meta or {},
        "nets": [
            {"name": name, "dims": net.dims, "out_act": net.out_act}
            for name, net in named_nets.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for net in named_nets.values():
            fh.write(net.get_flat().astype("<f8").tobytes())


def load_nets(path):
    """Read a checkpoint written by save_nets; returns (nets dict, meta)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a madpl-lab checkpoint")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        nets = {}
        for entry in header["nets"]:
            net = MlpNet(entry["dims"], out_act=entry["out_act"])
            raw = fh.read(8 * net.n_params())
            net.set_flat(np.frombuffer(raw, dtype="<f8"))
            nets[entry["name"]] = net
    return nets, header.get("meta", {})
