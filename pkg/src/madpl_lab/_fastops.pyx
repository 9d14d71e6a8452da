# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense kernels for the MLP hot path.

Same contract as ``_pyops``: float64, C-contiguous arrays. Matrix products
and the transcendental forwards delegate to numpy, whose BLAS and SIMD ufuncs
beat any scalar loop at these sizes; the compiled wins are the fused backward
and optimizer loops, which numpy can only express through temporaries. Every
kernel evaluates in the same per-element order as ``_pyops`` (and the build
disables FP contraction), so both backends produce bit-identical results.
"""

import numpy as np

cimport numpy as cnp

from libc.math cimport sqrt

cnp.import_array()

NAME = "c"


def affine_fwd(x, w, b):
    return x @ w + b


def affine_bwd(dy, x, w):
    dx = dy @ w.T
    dw = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dw, db


def relu_fwd(z):
    return np.maximum(z, 0.0)


def relu_bwd(double[:, ::1] da, double[:, ::1] z):
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t d = z.shape[1]
    out = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] dz = out
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(d):
            dz[i, j] = da[i, j] if z[i, j] > 0.0 else 0.0
    return out


def sigmoid_fwd(z):
    out = np.empty_like(z)
    np.negative(z, out=out)
    np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def sigmoid_bwd(double[:, ::1] da, double[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    out = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] dz = out
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(d):
            dz[i, j] = (da[i, j] * a[i, j]) * (1.0 - a[i, j])
    return out


def tanh_fwd(z):
    return np.tanh(z)


def tanh_bwd(double[:, ::1] da, double[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    out = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] dz = out
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(d):
            dz[i, j] = da[i, j] * (1.0 - a[i, j] * a[i, j])
    return out


def rmsprop_update(double[::1] p, double[::1] g, double[::1] v,
                   double lr, double decay, double eps):
    """In-place RMSprop step: v <- decay*v + (1-decay)*g^2; p -= lr*g/(sqrt(v)+eps)."""
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double gi, vi
    cdef double s = 1.0 - decay
    for i in range(n):
        gi = g[i]
        vi = v[i] * decay + (s * gi) * gi
        v[i] = vi
        p[i] = p[i] - (lr * gi) / (sqrt(vi) + eps)
