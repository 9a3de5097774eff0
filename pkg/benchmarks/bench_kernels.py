"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --dim 1024 --keys 2000 --batch 64
"""

import argparse
import sys
import timeit

import numpy as np

from mqmqe import kernels


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dim", type=int, default=1024, help="embedding dimension")
    parser.add_argument("--keys", type=int, default=2000, help="feature keys to embed")
    parser.add_argument("--batch", type=int, default=64, help="sentences per ranking batch")
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions (best is reported)")
    args = parser.parse_args(argv)

    if kernels.compiled_backend is None:
        print("compiled kernels are not built; only the fallback can be timed", file=sys.stderr)
        return 1
    py, cy = kernels.python_backend, kernels.compiled_backend
    keys = [f"t:k{i}#".encode() for i in range(args.keys)]
    rng = np.random.default_rng(0)
    pred, gold = rng.random(args.batch), rng.random(args.batch)

    assert np.array_equal(py.embed_keys(keys[:50], 3, args.dim), cy.embed_keys(keys[:50], 3, args.dim))
    cases = {
        f"embed_keys ({args.keys} keys x {args.dim})": (
            lambda: py.embed_keys(keys, 3, args.dim),
            lambda: cy.embed_keys(keys, 3, args.dim),
        ),
        f"rank_hinge (batch {args.batch})": (
            lambda: py.rank_hinge(pred, gold, 0.03),
            lambda: cy.rank_hinge(pred, gold, 0.03),
        ),
        "fnv1a64 (2000 keys)": (
            lambda: [py.fnv1a64(k) for k in keys[:2000]],
            lambda: [cy.fnv1a64(k) for k in keys[:2000]],
        ),
    }
    print(f"{'kernel':<36}{'python (ms)':>14}{'compiled (ms)':>16}{'speedup':>10}")
    for name, (slow, fast) in cases.items():
        t_py, t_cy = _best(slow, args.repeat), _best(fast, args.repeat)
        print(f"{name:<36}{t_py * 1e3:>14.3f}{t_cy * 1e3:>16.3f}{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
