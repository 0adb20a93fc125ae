"""Monte Carlo P(|X_t/m - 1| > eps) against the Chebyshev bound, for a clan and a non-clan."""

import argparse

from khinchin.sampler import concentration_test


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    runs = [("partition", [0.9, 0.99, 0.999], 0.1), ("geom", [0.9, 0.99, 0.999, 0.9999], 0.5)]
    print("family,eps,t,exceedance,chebyshev,consistent")
    for name, grid, eps in runs:
        rep = concentration_test(name, grid, eps, args.count, args.seed)
        for r in rep.rows:
            print(f"{name},{eps},{r.t!r},{r.exceedance!r},{r.chebyshev!r},{r.consistent}")


if __name__ == "__main__":
    main()
