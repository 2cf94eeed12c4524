"""Year-by-year leading performance gain on the fixture, with detected plateaus."""

import argparse

from parscale.measurements import gain_history, load_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--top-k", type=int, default=25)
    ap.add_argument("--threshold", type=float, default=0.10)
    args = ap.parse_args()
    for bench, hist in gain_history(load_fixture().records, args.top_k, plateau_threshold=args.threshold).items():
        print(f"# {bench} (normalized={hist.normalized}) plateaus: {hist.plateaus}")
        print("year,max_gain")
        for year, gain in sorted(hist.max_gain_by_year().items()):
            print(f"{year},{gain:.6g}")
        print()


if __name__ == "__main__":
    main()
