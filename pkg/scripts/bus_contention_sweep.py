"""Shared-bus versus direct wiring over hidden-layer width and depth.

Prints one CSV row per run: wall time, per-stage transfer check, and the
mean/max apparent processing ratio.  The affine fit of the max ratio against
width is printed per depth at the end.
"""

import argparse

import numpy as np

from parscale.bussim import BusTiming, SimTopology, Wiring, apparent_processing_ratio, parse_duration, simulate
from parscale.workloads import AnnTopology


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tb", default="5ns")
    ap.add_argument("--td", default="2ns")
    ap.add_argument("--tp", default="10ns")
    ap.add_argument("--x", default="0ps")
    ap.add_argument("--max-width-exp", type=int, default=10)
    args = ap.parse_args()
    timing = BusTiming(*(parse_duration(v) for v in (args.tb, args.td, args.tp, args.x)))

    widths = [2**i for i in range(args.max_width_exp + 1)]
    fits = {}
    print("wiring,h,m,total_time_ps,closed_form_ok,ratio_mean,ratio_max")
    for wiring in Wiring:
        for h in (1, 2, 4):
            maxes = []
            for m in widths:
                rep = simulate(SimTopology(AnnTopology(1, h, m, 1), wiring), timing, record_events=False)
                r = apparent_processing_ratio(rep)
                ok = all(s.duration == s.closed_form for s in rep.stages)
                maxes.append(r.max)
                print(f"{wiring.value},{h},{m},{rep.total_time_ps},{ok},{r.mean:.6f},{r.max:.6f}")
            fits[wiring.value, h] = np.polyfit(widths, maxes, 1)
    for (wiring, h), (slope, icpt) in fits.items():
        print(f"# {wiring} h={h}: max ratio ~ {slope:.4f}*m + {icpt:.4f}")


if __name__ == "__main__":
    main()
