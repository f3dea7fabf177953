"""Tour of the published schemes: order, stability boundary and error constants.

Run with ``python3 demos/catalog_tour.py``.
"""

from gbsopt import CATALOG_CORES, CATALOG_NAMES, catalog_scheme, normalized_isb, partition_plan, verify_order


def main():
    print(f"{'scheme':10s} {'order':>5s} {'cores':>5s} {'crit':>4s} {'ISB':>9s} {'ISBn':>7s} {'vs RK4':>7s} {'a_p+1':>11s}")
    for name in CATALOG_NAMES:
        scheme = catalog_scheme(name)
        plan = partition_plan(scheme.step_counts, CATALOG_CORES[name])
        rep = normalized_isb(scheme, plan)
        print(f"{name:10s} {verify_order(scheme):5d} {plan.n_cores:5d} {plan.critical_path:4d} "
              f"{rep.isb:9.4f} {rep.isb_normalized:7.4f} {rep.rk4_ratio:7.3f} {rep.a_p1:11.3e}")
    # The folding rule pairs n with N_max - n, so every core costs N_max + 1.
    plan = partition_plan(catalog_scheme("GBS_8_6").step_counts, 6)
    print("\nGBS_8_6 on six cores:", [list(c) for c in plan.cores], "evaluations", plan.evaluations)


if __name__ == "__main__":
    main()
