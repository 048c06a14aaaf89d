"""Fitted decay rate of sup|tau| for small data, as a multiple of kappa0.

Sweeps the smallness level D * M_inf and prints the fitted rate and r^2
(first 10% of samples dropped).
"""

import argparse

import numpy as np

from oldrlab.diagnostics import fit_decay_rate
from oldrlab.initial import small_data_state
from oldrlab.oldroyd import ModelParams, SolverConfig, run
from oldrlab.spectral import Grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--targets", type=float, nargs="*", default=[0.2, 0.05, 0.01, 0.001])
    ap.add_argument("--t-end", type=float, default=5.0)
    ap.add_argument("--seed", type=int, default=2)
    args = ap.parse_args()
    p = ModelParams(1.0, 1.0)
    for target in args.targets:
        s = small_data_state(Grid(2, args.n), np.random.default_rng(args.seed), target, p.deborah)
        tr = run(s, p, SolverConfig(dt=0.01, t_end=args.t_end))
        t, L = tr.times, tr.series("Linf_tau")
        k0 = len(t) // 10
        rate, r2 = fit_decay_rate(t[k0:], L[k0:])
        print(f"D*Minf={target:<7g} rate/kappa0={rate / p.kappa0:.4f} r2={r2:.6f}")


if __name__ == "__main__":
    main()
