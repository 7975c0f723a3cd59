"""Time the compiled and numpy kernel backends on pipeline-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Backend modules are called directly, bypassing the dispatcher (which sends
wide convolutions to numpy regardless of the active backend). Outputs are
checked for agreement before timing.
"""
import argparse
import importlib
import timeit

import numpy as np

from lrface import kernels
from lrface.lbp import neighbor_offsets

MODULES = {"cython": "lrface._ckernels", "python": "lrface._pykernels"}


def pad(a, r):
    return np.pad(a, [(0, 0)] * (a.ndim - 2) + [(r, r), (r, r)], mode="edge")


def cases(rng):
    dxs, dys = neighbor_offsets()
    return [
        ("lbp_codes 90x90", "lbp_codes", (pad(rng.random((90, 90)), 2), 2, dxs, dys)),
        ("lbp_codes 300x300", "lbp_codes", (pad(rng.random((300, 300)), 2), 2, dxs, dys)),
        ("conv 1->8 5x5 on 90x90", "conv2d_same",
         (pad(rng.random((1, 90, 90)), 2), rng.normal(size=(8, 1, 5, 5)), np.zeros(8))),
        ("conv 8->4 3x3 on 90x90", "conv2d_same",
         (pad(rng.random((8, 90, 90)), 1), rng.normal(size=(4, 8, 3, 3)), np.zeros(4))),
        ("conv 64->32 5x5 on 48x48", "conv2d_same",
         (pad(rng.random((64, 48, 48)), 2), rng.normal(size=(32, 64, 5, 5)), np.zeros(32))),
        ("chi2 20x20 x 5900", "chi2_matrix", (rng.random((20, 5900)), rng.random((20, 5900)))),
        ("chi2 20x20 x 127440", "chi2_matrix", (rng.random((20, 127440)), rng.random((20, 127440)))),
    ]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    backends = kernels.available()
    mods = {b: importlib.import_module(MODULES[b]) for b in backends}
    print(f"{'kernel':28s}" + "".join(f"{b + ' ms':>14s}" for b in backends)
          + (f"{'speedup':>10s}" if len(backends) > 1 else ""))
    for label, fname, fargs in cases(np.random.default_rng(0)):
        times, outs = {}, {}
        for b, mod in mods.items():
            fn = getattr(mod, fname)
            outs[b] = fn(*fargs)
            times[b] = min(timeit.repeat(lambda: fn(*fargs), number=1, repeat=args.repeat)) * 1e3
        for b in backends:
            np.testing.assert_allclose(outs[b], outs["python"], rtol=1e-10, atol=1e-10)
        line = f"{label:28s}" + "".join(f"{times[b]:14.2f}" for b in backends)
        if "cython" in times:
            line += f"{times['python'] / times['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
