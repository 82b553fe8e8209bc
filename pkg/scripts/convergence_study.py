"""Integration-by-parts refinement study for a Lagrangian file.

    python3 scripts/convergence_study.py src/varfield/data/wave.lag --variations 20
"""

import argparse
import sys
import time

import numpy as np

from varfield.numeric import AnalyticField, GridSpec, ibp_study, random_field, write_csv
from varfield.parser import parse_lagrangian


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("lag")
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--variations", type=int, default=20)
    ap.add_argument("--n", type=int, default=9, help="nodes per axis on the coarsest grid")
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()

    with open(args.lag, encoding="utf-8") as fh:
        L = parse_lagrangian(fh.read())
    rng = np.random.default_rng(args.seed)
    psi = AnalyticField.from_polys(random_field(rng, L, 4))
    variations = [random_field(rng, L, 2) for _ in range(args.variations)]

    start = time.perf_counter()
    study = ibp_study(L, GridSpec(n_t=args.n, n_x=args.n), psi, variations, levels=args.levels)
    elapsed = time.perf_counter() - start

    print(f"# seed: {args.seed}")
    write_csv(study.rows(), sys.stdout)
    print(f"# aggregate order {study.order:.3f}; per-variation "
          f"{min(study.orders):.3f}..{max(study.orders):.3f}; {elapsed:.1f} s", file=sys.stderr)
    return 0 if study.passed() else 1


if __name__ == "__main__":
    sys.exit(main())
