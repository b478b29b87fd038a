"""Compare the numba and pure-numpy paths of both counting kernels.

    python benchmarks/bench_kernels.py --pairs 37500 --patients 1128 --reps 5

Every backend must produce identical counts; the script exits non-zero if not.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from epimdr import kernels
from epimdr._accel import HAVE_NUMBA


def _time(fn, reps: int) -> tuple[float, np.ndarray]:
    out = fn()  # warm-up, includes numba compilation or cache load
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples), out


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0],
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("--pairs", type=int, default=37_500, help="variant pairs to count")
    ap.add_argument("--patients", type=int, default=1128, help="patients")
    ap.add_argument("--variants", type=int, default=250, help="distinct variants to draw pairs from")
    ap.add_argument("--folds", type=int, default=5, help="fold groups")
    ap.add_argument("--missing", type=float, default=0.02, help="missing genotype rate")
    ap.add_argument("--reps", type=int, default=5, help="timed repetitions (median reported)")
    ap.add_argument("--seed", type=int, default=0, help="data seed")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    codes = rng.integers(0, 3, size=(args.variants, args.patients)).astype(np.int8)
    codes[rng.random(codes.shape) < args.missing] = kernels.MISSING
    status = rng.integers(0, 2, size=args.patients).astype(np.int8)
    groups = np.arange(args.patients, dtype=np.int64) % args.folds
    pairs = rng.integers(0, args.variants, size=(args.pairs, 2)).astype(np.int64)
    packed = kernels.pack_codes(codes)
    masks = kernels.pack_groups(groups, status, args.folds)

    cases = {
        "scalar": lambda nb: kernels.count_pairs_scalar(codes, codes, pairs, groups, status, args.folds, use_numba=nb),
        "bitpacked": lambda nb: kernels.count_pairs_bitpacked(packed, packed, pairs, masks, use_numba=nb),
    }
    backends = [False] + ([True] if HAVE_NUMBA else [])
    rows, reference = [], None
    for name, fn in cases.items():
        for nb in backends:
            seconds, out = _time(lambda: fn(nb), args.reps)
            if reference is None:
                reference = out
            rows.append((name, "numba" if nb else "numpy", seconds, np.array_equal(out, reference)))

    base = next(s for n, b, s, _ in rows if (n, b) == ("scalar", "numpy"))
    print(f"{args.pairs} pairs x {args.patients} patients, {args.folds} folds, median of {args.reps}")
    print(f"{'kernel':<10} {'backend':<7} {'seconds':>9} {'pairs/s':>12} {'speedup':>8}  match")
    for name, backend, seconds, match in rows:
        print(f"{name:<10} {backend:<7} {seconds:9.4f} {args.pairs / seconds:12.0f} {base / seconds:7.1f}x  {match}")
    if not HAVE_NUMBA:
        print("numba not importable; only the numpy backend was measured")
    return 0 if all(r[3] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
