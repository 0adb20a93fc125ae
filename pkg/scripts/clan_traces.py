"""sigma/m traces and clan verdicts for the reference corpus, as CSV on stdout."""

import argparse
import csv
import sys
import warnings

from khinchin.diagnostics import clan_diagnose
from khinchin.family import family

CORPUS = ["exp", "partition", "bell", "1+z^3", "canon_pow2", "canon_squares",
          "1/(1-z)", "1/(1-z)^3", "1+log(1/(1-z))", "lacunary"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=CORPUS)
    args = ap.parse_args(argv)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["family", "t", "sigma_over_m", "verdict"])
    for name in args.names:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v = clan_diagnose(family(name))
        for t, r in zip(v.grid, v.ratio_series):
            w.writerow([name, repr(float(t)), repr(float(r)), v.verdict])
        print(f"{name}: {v.verdict} (final sigma/m {v.final_ratio:.4g})", file=sys.stderr)


if __name__ == "__main__":
    main()
