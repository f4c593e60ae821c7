"""Refinement study of the discrete Green's function of the unit ball against (1/|x| - 1)/(N(N-2)omega_N)."""
import argparse
import math
import sys
import time

import numpy as np

from measurelab.core import DiscreteMeasure, Domain
from measurelab.geom import omega
from measurelab.linear import solve_linear


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=3, choices=[3])
    ap.add_argument("--h", default="0.125,0.0625,0.03125", help="comma list of grid spacings")
    args = ap.parse_args(argv)
    N = args.dim
    c = 1 / (N * (N - 2) * omega(N))
    out = sys.stdout
    out.write("h,nodes,rel_l1_error,seconds\n")
    for h in (float(x) for x in args.h.split(",")):
        t0 = time.perf_counter()
        dom = Domain.ball(N, h)
        u = solve_linear(dom, DiscreteMeasure.dirac(dom, (0.0,) * N)).u.values
        r = np.linalg.norm(dom.coords, axis=1)
        off = r > 0
        G = c * (r[off] ** (2 - N) - 1)
        err = np.abs(u[off] - G).sum() / np.abs(G).sum()
        out.write(f"{h:.10g},{dom.n_interior},{err:.6g},{time.perf_counter() - t0:.3f}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
