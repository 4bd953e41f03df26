"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py --repeat 5
"""

from __future__ import annotations

import argparse
import random
import timeit

from chainref import kernels


def _workload(seed: int):
    rng = random.Random(seed)
    seqs = [([rng.randrange(6) for _ in range(8)], [rng.randrange(6) for _ in range(8)]) for _ in range(2000)]
    rows = [tuple(rng.uniform(-3, 3) for _ in range(3)) + tuple(rng.uniform(0.1, 2) for _ in range(3))
            for _ in range(52)]
    return seqs, rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    seqs, rows = _workload(args.seed)
    found = kernels.backends()

    cases = {
        "edit_distance x2000 (len 8)": lambda m: [m.edit_distance(a, b) for a, b in seqs],
        "predicate_scores x220 (52 boxes, all relations)": lambda m: [
            m.predicate_scores(code, rows, rows[0], rows[1] if code == 10 else None, 0.15, 1.0, 0.0)
            for _ in range(20) for code in range(11)
        ],
    }
    print(f"active backend: {kernels.BACKEND}")
    for name, fn in cases.items():
        timings = {}
        for backend, mod in found.items():
            timings[backend] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        line = "  ".join(f"{b}={t * 1e3:8.2f} ms" for b, t in timings.items())
        if "cython" in timings:
            line += f"  speedup x{timings['python'] / timings['cython']:.1f}"
        print(f"{name:50s} {line}")


if __name__ == "__main__":
    main()
