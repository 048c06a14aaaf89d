"""Closed-form growth map for constant velocity gradients.

For the strain u = diag(q, -q) x (so sqrt(delta) = q) the stress grows
exponentially iff q > kappa0 = epsilon / R^2.  The script sweeps q/kappa0 and
prints the late-time growth rate next to the predicted 2 (q - kappa0)+.
"""

import argparse
import csv
import sys

import numpy as np

from oldrlab.lagrangian import classify_growth, growth_rate
from oldrlab.oldroyd import ModelParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("--R", type=float, default=1.0)
    ap.add_argument("--ratios", type=float, nargs="*", default=list(np.linspace(0.25, 3.0, 12)))
    args = ap.parse_args()
    p = ModelParams(1.0, args.epsilon, args.R)
    kap = p.kappa0
    w = csv.writer(sys.stdout)
    w.writerow(["q_over_kappa0", "rate", "predicted", "grows"])
    for r in args.ratios:
        q = r * kap
        G = np.array([[q, 0.0], [0.0, -q]])
        T = 50.0 / kap
        rate = growth_rate(G, p, 0.5 * T, T)
        w.writerow([f"{r:.3f}", f"{rate:.5f}", f"{2 * max(q - kap, 0.0):.5f}", classify_growth(G, p)])


if __name__ == "__main__":
    main()
