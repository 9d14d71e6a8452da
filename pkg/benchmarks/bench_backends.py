"""Compare the compiled kernel backend against the numpy fallback.

Times the individual dense kernels and a full policy-net forward/backward at
training-relevant shapes, then prints per-op medians and ratios. Run from a
checkout with the extension built:

    python benchmarks/bench_backends.py [--batch 32] [--repeats 200]
"""

import argparse
import statistics
import time

import numpy as np

from madpl_lab import _pyops

try:
    from madpl_lab import _fastops
except ImportError:
    _fastops = None

from madpl_lab.nets import MlpNet


def time_call(fn, repeats):
    """Median wall time of fn() over repeats, in microseconds."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e6)
    return statistics.median(times)


def kernel_cases(batch, rng):
    """(name, callable-factory) pairs covering every backend op."""
    x = rng.standard_normal((batch, 132))
    w = rng.standard_normal((132, 128))
    b = rng.standard_normal(128)
    z = rng.standard_normal((batch, 128))
    a = np.tanh(z)
    s = 1.0 / (1.0 + np.exp(-z))
    dy = rng.standard_normal((batch, 128))
    p = rng.standard_normal(132 * 128)
    g = rng.standard_normal(132 * 128)

    def cases(ops):
        v = np.zeros_like(p)
        pc = p.copy()
        return [
            ("affine_fwd", lambda: ops.affine_fwd(x, w, b)),
            ("affine_bwd", lambda: ops.affine_bwd(dy, x, w)),
            ("relu_fwd", lambda: ops.relu_fwd(z)),
            ("relu_bwd", lambda: ops.relu_bwd(dy, z)),
            ("sigmoid_fwd", lambda: ops.sigmoid_fwd(z)),
            ("sigmoid_bwd", lambda: ops.sigmoid_bwd(dy, s)),
            ("tanh_fwd", lambda: ops.tanh_fwd(z)),
            ("tanh_bwd", lambda: ops.tanh_bwd(dy, a)),
            ("rmsprop_update",
             lambda: ops.rmsprop_update(pc, g, v, 1e-4, 0.99, 1e-8)),
        ]

    return cases


def net_case(batch, rng):
    """Forward+backward through an actor-sized MLP under the active backend."""
    net = MlpNet([132, 128, 128, 41], out_act="sigmoid",
                 rng=np.random.default_rng(0))
    x = rng.standard_normal((batch, 132))
    dout = rng.standard_normal((batch, 41))

    def run():
        out, cache = net.forward(x)
        net.backward(cache, dout)

    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    if _fastops is None:
        print("compiled backend not available; build the extension first")
        return 1

    rng = np.random.default_rng(42)
    factory = kernel_cases(args.batch, rng)
    py_cases = factory(_pyops)
    c_cases = factory(_fastops)

    print(f"batch {args.batch}, repeats {args.repeats}, "
          f"median wall time per call\n")
    print(f"{'op':<16} {'python us':>10} {'c us':>10} {'speedup':>8}")
    print("-" * 48)
    for (name, py_fn), (_, c_fn) in zip(py_cases, c_cases):
        t_py = time_call(py_fn, args.repeats)
        t_c = time_call(c_fn, args.repeats)
        print(f"{name:<16} {t_py:>10.2f} {t_c:>10.2f} {t_py / t_c:>7.2f}x")

    import madpl_lab.nets as nets
    active = nets.ops
    try:
        for label, module in (("python", _pyops), ("c", _fastops)):
            nets.ops = module
            t = time_call(net_case(args.batch, rng), args.repeats)
            print(f"{'mlp fwd+bwd ' + label:<27} {t:>9.2f} us")
    finally:
        nets.ops = active
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
