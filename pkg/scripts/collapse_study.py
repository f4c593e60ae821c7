"""Reduced measure of a unit Dirac mass at the center of the unit ball for g(t) = t^p.

Prints the defect and the size of the reduced solution on each grid, the raw
data behind the sub/supercritical classification.
"""
import argparse
import sys

from measurelab.core import DiscreteMeasure, Domain, polynomial
from measurelab.reduced import defect_slope, reduced_measure


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", default="2,3", help="comma list of exponents")
    ap.add_argument("--h", default="0.125,0.0625,0.03125", help="comma list of grid spacings")
    args = ap.parse_args(argv)
    hs = [float(x) for x in args.h.split(",")]
    sys.stdout.write("p,h,levels_used,l1_u_star,tv_mu_star,tv_gamma\n")
    slopes = {}
    for p in (float(x) for x in args.p.split(",")):
        defects = []
        for h in hs:
            dom = Domain.ball(3, h)
            mu = DiscreteMeasure.dirac(dom, (0.0, 0.0, 0.0), 1.0, singular=True)
            r = reduced_measure(dom, polynomial(p), mu)
            d = r.diagnostics
            defects.append(d["tv_gamma"])
            sys.stdout.write(f"{p:g},{h:.10g},{d['levels_used']:g},{d['l1_u_star']:.6g},"
                             f"{d['tv_mu_star']:.6g},{d['tv_gamma']:.6g}\n")
        slopes[p] = defect_slope(hs, defects)
    for p, s in slopes.items():
        sys.stderr.write(f"p = {p:g}: defect slope {s:.3f}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
