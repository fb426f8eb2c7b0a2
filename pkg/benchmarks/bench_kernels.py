"""Compiled vs pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each row times one kernel on both implementations (best of N) and checks
that their outputs are identical.
"""

import argparse
import timeit

import numpy as np

from simulpolicy._kernels import _pure

try:
    from simulpolicy._kernels import _ext
except ImportError:
    _ext = None


def _cases(rng):
    cases = []
    for T, V, beam in ((100, 30, 8), (300, 30, 16), (300, 100, 32)):
        p = rng.dirichlet(np.full(V + 1, 0.1), size=T)
        p[:, -1] += 0.5
        p /= p.sum(axis=1, keepdims=True)
        logp = np.log(p)
        ranks = list(range(V))
        cases.append((f"prefix_beam_search T={T} V={V} beam={beam}", "prefix_beam_search", (logp, ranks, beam, min(beam, 8))))
    seqs = [tuple(f"w{i}" for i in range(400)) + (f"x{j}",) for j in range(5)]
    cases.append(("lcp_length 5 x 400 tokens", "lcp_length", (seqs,)))
    x = rng.standard_normal(16000 * 5)
    cases.append(("stretch_linear 5 s @ 16 kHz, speed 1.1", "stretch_linear", (x, 1.1, int(len(x) / 1.1 + 0.5))))
    return cases


def _same(a, b):
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ext is None:
        print("compiled extension not built; only the pure-Python kernels are available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<46} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}  same")
    for label, name, call_args in _cases(rng):
        py = getattr(_pure, name)
        t_py = min(timeit.repeat(lambda: py(*call_args), number=1, repeat=args.repeat)) * 1e3
        if _ext is None:
            print(f"{label:<46} {t_py:>10.2f} {'-':>12} {'-':>8}  -")
            continue
        cy = getattr(_ext, name)
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=1, repeat=args.repeat)) * 1e3
        same = _same(py(*call_args), cy(*call_args))
        print(f"{label:<46} {t_py:>10.2f} {t_cy:>12.3f} {t_py / t_cy:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
