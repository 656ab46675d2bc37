"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 200,1000]

Both backends must agree on every input; the script exits non-zero if they do not.
"""
import argparse
import sys
import time

import numpy as np

from diarkit import _kernels


def _hmm_inputs(rng, T, S, loop=0.9):
    lls = rng.standard_normal((T, S)) * 5.0
    tr = np.full((S, S), (1 - loop) / S)
    tr[np.diag_indices(S)] += loop
    return lls, np.log(tr), np.full(S, -np.log(S))


def _similarity(rng, n, k=4):
    means = rng.standard_normal((k, 16))
    x = means[rng.integers(k, size=n)] + 0.7 * rng.standard_normal((n, 16))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    sim = x @ x.T
    sim = (sim + sim.T) / 2
    np.fill_diagonal(sim, 1.0)
    return sim


def _best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="200,1000", help="comma-separated problem sizes")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the python backend is available", file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{'kernel':<18}{'size':>8}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    ok = True
    for n in sizes:
        cases = {
            "forward_backward": (lambda be, a=_hmm_inputs(rng, 10 * n, 6): _kernels.forward_backward(*a, backend=be)),
            "ahc_average": (lambda be, s=_similarity(rng, n): _kernels.ahc_average(s, 0.3, backend=be)),
        }
        for name, fn in cases.items():
            times, outs = {}, {}
            for be in backends:
                times[be], outs[be] = _best_of(lambda: fn(be), args.repeat)
            if len(backends) == 2:
                a, b = outs["cython"], outs["python"]
                if name == "forward_backward":
                    same = np.allclose(a[0], b[0], atol=1e-10) and abs(a[1] - b[1]) <= 1e-8 * abs(b[1])
                else:
                    same = np.array_equal(a, b)
                ok &= same
                speed = f"{times['python'] / times['cython']:9.1f}x" + ("" if same else " MISMATCH")
            else:
                speed = "-"
            size = 10 * n if name == "forward_backward" else n
            print(f"{name:<18}{size:>8}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends) + f"{speed:>10}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
