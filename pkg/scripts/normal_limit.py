"""W^{1,1} distance to normal reflection as the wedge angle approaches 90 degrees.

    python3 scripts/normal_limit.py --angles 88 89 89.5 89.9 90 --n 64
"""

import argparse
import math

from shockrefl.diagnostics import FieldData, w11_distance_to_normal
from shockrefl.elliptic_core import GridConfig
from shockrefl.free_boundary import SolveConfig, solve
from shockrefl.thermo import GasParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--angles", type=float, nargs="+", default=[88, 89, 89.5, 89.9, 90])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--rho1", type=float, default=2.0)
    args = ap.parse_args()
    cfg = SolveConfig(grid=GridConfig(n_x=args.n, n_y=args.n))
    fields = []
    for a in args.angles:
        tw = math.pi / 2 if a == 90 else math.radians(a)
        sol = solve(GasParams(), args.rho1, tw, cfg)
        print(f"{a:g} deg: {sol.report.message}, {sol.report.outer_iterations} iterations, "
              f"{sol.report.wall_clock:.1f} s", flush=True)
        fields.append(FieldData.from_solution(sol))
    for a, d in zip(args.angles, w11_distance_to_normal(fields)):
        print(f"{a:8g} {d:.6e}")


if __name__ == "__main__":
    main()
