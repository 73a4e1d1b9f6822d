#!/usr/bin/env python3
"""Localization ratio of the cycle adjacency operator versus support diameter.

For each support diameter d the search finds the best ratio ||A eta|| / ||A||
over unit vectors eta supported on a set of diameter at most d.  The ratio is
nondecreasing in d and reaches 1 at the full diameter; the d = 0 value is the
best column norm divided by the operator norm.

Usage:
    python3 scripts/localization_sweep.py --points 100 --step 2 \
        --output-dir localization_out
"""

import argparse
from pathlib import Path

import numpy as np

from coarsekit.bandops import BandOperator
from coarsekit.onl import localization_search
from coarsekit.spaces import FiniteSpace


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=100,
                        help="number of cycle points")
    parser.add_argument("--step", type=int, default=2,
                        help="stride through support diameters")
    parser.add_argument("--output-dir", default="localization_out")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    if args.points < 3:
        raise SystemExit("need at least 3 points")
    space = FiniteSpace.cycle(args.points)
    op = BandOperator(space, space.adjacency().astype(np.complex128))
    full = space.diameter()
    diameters = sorted(set(range(0, full, max(1, args.step))) | {full})

    rows = []
    for d in diameters:
        _, ratio = localization_search(op, d)
        rows.append((d, ratio))

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dat = out / "localization.dat"
    with dat.open("w") as fh:
        fh.write("# diameter ratio\n")
        for d, ratio in rows:
            fh.write(f"{d} {ratio!r}\n")

    print(f"{'diameter':>9}  ratio")
    for d, ratio in rows:
        print(f"{d:>9}  {ratio:.9f}")
    print(f"ratio at 0           {rows[0][1]:.9f} (sqrt(2)/2 = {np.sqrt(2)/2:.9f})")
    print(f"ratio at diameter    {rows[-1][1]:.9f}")
    print(f"wrote {dat}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
