"""Run the finite-model truncation ladder against the continuum quadrature.

Prints one row per rung with the level-shift entries and their distance to
the continuum values, then the Richardson extrapolation. Useful for picking
a schedule before trusting lso_finite on a new bath.

    python3 scripts/oracle_convergence.py --beta 4.0 --p 0.5 --cutoff gaussian
"""

import argparse
import json

import numpy as np

import spinbath as sb

KEYS = ("x_plus", "x_minus", "z")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beta", type=float, default=None,
                    help="inverse temperature (default: documented oracle bath)")
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--q0", type=float, default=1.0)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--cutoff", choices=("exponential", "gaussian"),
                    default="gaussian")
    ap.add_argument("--n-max", type=int, default=3)
    ap.add_argument("--schedule", type=float, nargs="*", default=None,
                    metavar="M ETA", help="flat m_pos/eta pairs, >= 3 of them")
    ap.add_argument("--json", default=None, help="also dump the report here")
    args = ap.parse_args()

    if args.beta is None:
        spec = sb.standard_oracle_bath()
    else:
        spec = sb.BathSpec(beta=args.beta, eps=args.eps, delta=args.delta,
                           q0=args.q0, h=sb.power_exp(args.p, args.cutoff))

    schedule = None
    if args.schedule:
        if len(args.schedule) % 2:
            ap.error("--schedule wants m_pos/eta pairs")
        it = iter(args.schedule)
        schedule = [(int(m), eta) for m, eta in zip(it, it)]

    report = sb.run_oracle_schedule(spec, schedule, n_max=args.n_max)

    t_max = sb.default_time_horizon(spec)
    table = sb.tabulate_kernels(spec, t_max, 400, tol=1e-9)
    x_plus, x_minus, z, err = sb.lso_entries(spec, table)
    continuum = dict(zip(KEYS, (x_plus, x_minus, z)))

    print("bath: beta=%g eps=%g delta=%g q0=%g" % (spec.beta, spec.eps,
                                                   spec.delta, spec.q0))
    print("continuum (quadrature err %.1e):" % err)
    for k in KEYS:
        print("  %-7s %s" % (k, continuum[k]))
    print()
    header = "%-6s %-6s" % ("m_pos", "eta")
    for k in KEYS:
        header += "  %-22s %-9s" % (k, "rel.dist")
    print(header)
    for i, (m_pos, eta) in enumerate(report.schedule):
        ent = report.entries(i)
        row = "%-6d %-6g" % (m_pos, eta)
        for k in KEYS:
            rel = abs(ent[k] - continuum[k]) / abs(continuum[k])
            row += "  %-22s %-9.2e" % ("%.4f%+.4fj" % (ent[k].real,
                                                       ent[k].imag), rel)
        print(row)
    print()
    print("extrapolated (observed order %s, monotone %s):"
          % ({k: "%.2f" % v for k, v in report.observed_order.items()},
             report.monotone))
    for k in KEYS:
        rel = abs(report.extrapolated[k] - continuum[k]) / abs(continuum[k])
        print("  %-7s %s  rel.dist %.2e" % (k, report.extrapolated[k], rel))

    if args.json:
        payload = {
            "schedule": [[m, eta] for m, eta in report.schedule],
            "rungs": [{k: [v.real, v.imag] for k, v in
                       report.entries(i).items()}
                      for i in range(len(report.schedule))],
            "extrapolated": {k: [v.real, v.imag]
                             for k, v in report.extrapolated.items()},
            "continuum": {k: [v.real, v.imag] for k, v in continuum.items()},
            "observed_order": report.observed_order,
            "monotone": report.monotone,
        }
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        print("\nwrote %s" % args.json)


if __name__ == "__main__":
    main()
