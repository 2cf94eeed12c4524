"""Efficiency over (1-alpha, N) with the fixture's measured systems overlaid.

Writes two CSV files into the output directory: the grid and the overlay points.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from parscale.measurements import efficiency_surface, load_fixture, surface_overlay
from parscale.scaling import ParallelizationFraction


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--points", type=int, default=41)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    u = np.geomspace(1e-9, 1e-1, args.points)
    n = np.unique(np.geomspace(2, 1e7, args.points).astype(int))
    surf = efficiency_surface([ParallelizationFraction.from_one_minus(x) for x in u], n)
    with open(args.out / "surface.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["alpha", "one_minus_alpha", "n", "efficiency"])
        w.writeheader()
        w.writerows(surf.rows())

    with open(args.out / "surface_overlay.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["system_name", "year", "benchmark", "one_minus_alpha", "n", "efficiency"])
        records = load_fixture().records
        for rec, (alpha, n_eff, e) in zip(records, surface_overlay(records)):
            w.writerow([rec.system_name, rec.year, rec.benchmark.value, repr(alpha.one_minus), n_eff, repr(e)])
    print(f"wrote {surf.efficiency.size} grid points and {len(records)} overlay points to {args.out}/")


if __name__ == "__main__":
    main()
