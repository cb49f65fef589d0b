"""Sweep one bath parameter and tabulate the relaxation rate.

Writes a CSV with the same columns the CLI sweep emits and prints the table.
Each point retabulates its own kernels, so sweeps over beta are as safe as
sweeps over eps/delta/q0.

    python3 scripts/rate_sweep.py q0 0.25 0.5 1.0 2.0 --beta 1.0
"""

import argparse
import csv

import numpy as np

import spinbath as sb


def point(spec):
    t_max = sb.default_time_horizon(spec)
    table = sb.tabulate_kernels(spec, t_max, 400, tol=1e-9)
    rate = sb.gamma_rate(spec, table)
    return rate.tau_inv, rate.tau0_inv, rate.p_inf, rate.err


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("param", choices=("beta", "eps", "delta", "q0"))
    ap.add_argument("values", type=float, nargs="+")
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--delta", type=float, default=0.2)
    ap.add_argument("--q0", type=float, default=1.0)
    ap.add_argument("--p", type=float, default=-0.5)
    ap.add_argument("--cutoff", choices=("exponential", "gaussian"),
                    default="exponential")
    ap.add_argument("--out", default="rate_sweep.csv")
    args = ap.parse_args()

    base = dict(beta=args.beta, eps=args.eps, delta=args.delta, q0=args.q0)
    h = sb.power_exp(args.p, args.cutoff)

    rows = []
    print("%-10s %-14s %-14s %-10s %-10s" % (args.param, "tau_inv",
                                             "tau0_inv", "p_inf", "err"))
    for v in args.values:
        params = dict(base, **{args.param: v})
        spec = sb.BathSpec(h=h, **params)
        tau_inv, tau0_inv, p_inf, err = point(spec)
        rows.append((v, tau_inv, tau0_inv, p_inf, err))
        print("%-10g %-14.6g %-14.6g %-10.4g %-10.2e"
              % (v, tau_inv, tau0_inv, p_inf, err))

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([args.param, "tau_inv", "tau0_inv", "p_inf", "err"])
        writer.writerows(rows)
    print("wrote %s" % args.out)


if __name__ == "__main__":
    main()
