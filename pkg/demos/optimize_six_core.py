"""Optimize an eighth-order, six-core scheme for the imaginary axis.

Bisects on the step size, solving a convex minimax problem over the free
weights at each trial, then rounds the weights to short rationals.
Takes a few seconds.
"""

from gbsopt import imaginary_axis, make_scheme, maximize_h, normalized_isb, rationalize_scheme, verify_order


def main():
    counts = list(range(2, 23, 2))
    opt = maximize_h(imaginary_axis(), counts, 8)
    square = normalized_isb(make_scheme(8, counts))
    print(f"optimized: h = {opt.h:.5f}, ISBn = {opt.isb_normalized:.5f} on critical path {opt.critical_path}")
    print(f"zero free weights: ISBn = {square.isb_normalized:.5f}")

    scheme, before, after = rationalize_scheme(opt)
    print(f"rationalized: ISBn {before:.5f} -> {after:.5f}, order still {verify_order(scheme)}")
    for n, c in zip(scheme.n_free, scheme.c_free):
        print(f"  c_{n:<2d} = {c}")


if __name__ == "__main__":
    main()
