"""Payload-gain curves and peaks for the shipped calibration presets."""

import argparse

import numpy as np

from parscale.presets import peak_presets
from parscale.workloads import performance_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=1000)
    args = ap.parse_args()

    ns = np.unique(np.geomspace(1, args.n_max, 40).astype(int)).tolist()
    for name, preset in sorted(peak_presets().items()):
        peak = preset.find_peak(n_max=args.n_max)
        print(f"# {name}: peak N={peak.n_peak} gain={peak.gain:.4f} ({peak.note}, {peak.method})")
        print("n,gain,one_minus_alpha")
        for pt in performance_curve(1.0, preset.contributions, preset.comm_model, ns):
            print(f"{pt.n},{pt.performance:.6g},{pt.one_minus_alpha:.6g}")
        print()


if __name__ == "__main__":
    main()
