"""Detachment and sonic angles over a range of incident strengths.

Writes a CSV with the same columns as ``shockrefl curves`` and prints the
range of the gap between the two angles.

    python3 scripts/transition_sweep.py --start 1.5 --stop 4 --samples 50 --out sweep.csv
"""

import argparse
import math
import time

import numpy as np

from shockrefl.cli import write_curves
from shockrefl.local_states import transition_curve
from shockrefl.thermo import GasParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=1.4)
    ap.add_argument("--start", type=float, default=1.5)
    ap.add_argument("--stop", type=float, default=4.0)
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--by", choices=("rho1", "m1"), default="rho1")
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()
    t0 = time.perf_counter()
    rows = transition_curve(GasParams(gamma=args.gamma), np.linspace(args.start, args.stop, args.samples), args.by)
    write_curves(rows, args.out)
    gaps = [math.degrees(r.gap) for r in rows if r.ok]
    print(f"{len(gaps)}/{len(rows)} samples ok in {time.perf_counter() - t0:.1f} s")
    if gaps:
        print(f"theta_s - theta_d: {min(gaps):.4f} .. {max(gaps):.4f} deg")


if __name__ == "__main__":
    main()
