"""Transfer share at which a k-fold faster processor only yields a given apparent speedup."""

import argparse

from parscale.workloads import accelerator_apparent_speedup, transfer_fraction_for_speedup


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=float, default=4.0)
    ap.add_argument("--target", type=float, default=3.01)
    args = ap.parse_args()
    f = transfer_fraction_for_speedup(args.target, args.k)
    print(f"k={args.k} target={args.target}: transfer fraction {f:.12f}")
    print("transfer_fraction,apparent_speedup")
    for share in (0.0001, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 0.9):
        print(f"{share},{accelerator_apparent_speedup(share, 1 - share, args.k):.6f}")


if __name__ == "__main__":
    main()
