"""Capacity of a single node and of a 3x3 block in [-1, 1]^2 under refinement, with the equivalence mass."""
import argparse
import sys

import numpy as np

from measurelab.capacity import cap_equivalence_check, capacitary_potential
from measurelab.core import Domain


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", default="0.125,0.0625,0.03125,0.015625")
    ap.add_argument("--eps", type=float, default=0.5)
    args = ap.parse_args(argv)
    sys.stdout.write("K,h,cap,equivalence_mass,two_cap\n")
    for h in (float(x) for x in args.h.split(",")):
        dom = Domain.box(2, h, -1.0, 1.0)
        c = dom.nearest_interior((0.0, 0.0))
        block = np.flatnonzero(np.abs(dom.multi_index - dom.multi_index[c]).max(axis=1) <= 1)
        for name, K in (("center", [c]), ("block3", block)):
            res = capacitary_potential(dom, K)
            chk = cap_equivalence_check(res, args.eps)
            sys.stdout.write(f"{name},{h:.10g},{res.cap:.6g},{chk.lhs:.6g},{chk.rhs:.6g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
