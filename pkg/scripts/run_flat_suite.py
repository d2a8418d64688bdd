#!/usr/bin/env python3
"""Run the flat inequality suite twice (quadrature and Monte Carlo) and
report the worst row-wise disagreement in standard-error units."""

import argparse

from kolmodiff import verifier as vf


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-paths", type=int, default=100000)
    ap.add_argument("--out-prefix", default="flat")
    args = ap.parse_args()

    exact = vf.run_suite(vf.default_config("flat-exact"))
    mc = vf.run_suite(vf.default_config("flat-mc", seed=args.seed,
                                        n_paths=args.n_paths))
    vf.emit_report(exact, f"{args.out_prefix}-exact.json")
    vf.emit_report(mc, f"{args.out_prefix}-mc.json")

    def key(r):
        return (r["inequality"], str(r["point"]), r["time"],
                r["provenance"].get("field"), r["provenance"].get("alpha"))

    lookup = {key(r): r for r in exact["reports"]}
    worst = 0.0
    for row in mc["reports"]:
        ref = lookup[key(row)]
        for side, se_key in (("lhs", "lhs_se"), ("rhs", "rhs_se")):
            se = row["provenance"][se_key]
            if se > 1e-12:
                worst = max(worst, abs(row[side] - ref[side]) / se)
    print(f"exact rows: {exact['summary']['rows']}  mc rows: {mc['summary']['rows']}")
    print(f"verdicts (mc): {mc['summary']['verdicts']}")
    print(f"worst |mc - exact| in SE units: {worst:.2f}")


if __name__ == "__main__":
    main()
