"""Convergence scan of the exponential family on the unit disk with per-mass critical estimates."""
import argparse
import math
import sys

from measurelab.cli import parse_list
from measurelab.reduced import threshold_scan


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--masses", default="1pi,2pi,3pi,3.5pi,4.5pi,5pi,6pi")
    ap.add_argument("--h", default="0.03125,0.015625,0.0078125")
    args = ap.parse_args(argv)
    res = threshold_scan("exp", parse_list(args.masses), parse_list(args.h))
    sys.stdout.write(res.csv())
    for c, est in res.estimates.items():
        sys.stderr.write(f"c = {c / math.pi:.3f}pi: critical estimate {est / math.pi:.3f}pi\n")
    sys.stderr.write(f"classification boundary {res.critical / math.pi:.3f}pi\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
