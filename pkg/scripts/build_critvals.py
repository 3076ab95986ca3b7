"""Regenerate the critical-value tables shipped in src/sncpa/data/critvals.

Full scale (N=200,000 steps, M=10,000 replications) takes a few minutes per
family on one core, longer for larger q; pass --workers to fan out.
"""

import argparse
import time
from pathlib import Path

from sncpa import limit
from sncpa.cache import table_filename, write_table

FAMILIES = [
    limit.range_ratio(),
    limit.matrix_cusum(2),
    limit.matrix_cusum(3),
    limit.matrix_cusum(4),
    limit.matrix_cusum(5),
    limit.shao_scalar(),
    limit.component_range_sum(2),
    limit.matrix_cusum(1),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=limit.DEFAULT_STEPS)
    parser.add_argument("--reps", type=int, default=limit.DEFAULT_REPS)
    parser.add_argument("--seed", type=int, default=limit.DEFAULT_SEED)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", type=Path,
                        default=Path(__file__).resolve().parents[1] / "src/sncpa/data/critvals")
    args = parser.parse_args()
    for family in FAMILIES:
        start = time.time()
        table = limit.quantile_table(family, args.steps, args.reps, seed=args.seed,
                                     workers=args.workers)
        path = write_table(table, args.out / table_filename(table))
        print(f"{family.label}: {time.time() - start:.0f}s -> {path}", flush=True)


if __name__ == "__main__":
    main()
