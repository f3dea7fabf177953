"""One-way wave equation at 99% of each method's stability limit.

Double precision shows the rounding floors; pass ``--precision 40`` to
redo the study in 40-digit arithmetic, where the high-order slopes run on
well below 1e-16 (slower, about a minute per method).
"""

import argparse

from gbsopt import convergence_study, error_floor


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--precision", type=int)
    args = ap.parse_args()
    grids = [16, 32, 64, 128, 256] if args.precision else [8, 16, 32, 64, 128, 256, 512]
    runs = convergence_study(["GBS_8_6", "GBS_12_8", "RK4"], grids, precision=args.precision)
    for method in ("GBS_8_6", "GBS_12_8", "RK4"):
        rows = [r for r in runs if r.method == method]
        print(f"{method}: slope {rows[0].slope:.2f}, floor {error_floor([r.error for r in rows]):.1e}")
        for r in rows:
            print(f"  Nx={r.nx:4d}  dt/crit={r.dt_normalized:.3e}  error={r.error:.3e}")


if __name__ == "__main__":
    main()
