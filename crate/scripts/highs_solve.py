#!/usr/bin/env python3
"""Solve an MPS model with HiGHS and write a HiGHS solution file.

Usage:
    highs_solve.py MODEL.mps SOLUTION.sol [--time-limit SECONDS] [--mip-rel-gap GAP]

Meant as the external backend of the psps CLI:
    psps solve ... --solver 'external:python3 scripts/highs_solve.py {mps} {sol} --time-limit {time_limit} --mip-rel-gap {gap}'
"""

import argparse
import sys

import highspy


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("mps")
    parser.add_argument("sol")
    parser.add_argument("--time-limit", type=float, default=None)
    parser.add_argument("--mip-rel-gap", type=float, default=1e-9)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", args.threads)
    h.setOptionValue("mip_rel_gap", args.mip_rel_gap)
    h.setOptionValue("mip_abs_gap", 1e-9)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    if args.time_limit is not None:
        h.setOptionValue("time_limit", args.time_limit)

    if h.readModel(args.mps) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.mps}", file=sys.stderr)
        return 2
    if h.run() == highspy.HighsStatus.kError:
        print("HiGHS failed", file=sys.stderr)
        return 3
    h.writeSolution(args.sol, 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
