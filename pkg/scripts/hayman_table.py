"""Saddle-point coefficient estimates against exact coefficients for growing n."""

import argparse
import sys

from khinchin.asymptotics import hayman_estimate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--families", default="exp,partition,bell")
    ap.add_argument("--n", default="5,10,20,40,60,80,100")
    args = ap.parse_args(argv)
    ns = [int(x) for x in args.n.split(",")]
    print("family,n,t_n,ratio")
    for name in args.families.split(","):
        for n in ns:
            e = hayman_estimate(name, n)
            print(f"{name},{n},{e.t_n!r},{e.ratio!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
