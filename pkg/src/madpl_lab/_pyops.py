"""Pure-numpy implementations of the dense kernels.

Fallback backend used when the compiled extension is unavailable (or forced
via ``MADPL_LAB_BACKEND=py``). Signatures mirror ``_fastops`` exactly; all
arrays are float64 and C-contiguous.
"""

import numpy as np

NAME = "python"


def affine_fwd(x, w, b):
    return x @ w + b


def affine_bwd(dy, x, w):
    dx = dy @ w.T
    dw = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dw, db


def relu_fwd(z):
    return np.maximum(z, 0.0)


def relu_bwd(da, z):
    return np.where(z > 0.0, da, 0.0)


def sigmoid_fwd(z):
    out = np.empty_like(z)
    np.negative(z, out=out)
    np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def sigmoid_bwd(da, a):
    return da * a * (1.0 - a)


def tanh_fwd(z):
    return np.tanh(z)


def tanh_bwd(da, a):
    return da * (1.0 - a * a)


def rmsprop_update(p, g, v, lr, decay, eps):
    """In-place RMSprop step: v <- decay*v + (1-decay)*g^2; p -= lr*g/(sqrt(v)+eps)."""
    v *= decay
    v += (1.0 - decay) * g * g
    p -= lr * g / (np.sqrt(v) + eps)
