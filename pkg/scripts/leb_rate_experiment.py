#!/usr/bin/env python3
"""Lebesgue is rate-zero: basin fractions of the Leb target stay flat.

Runs the grid sweep at a configurable resolution and prints the per-epsilon
slopes and the verdict.  With the defaults this reproduces the registered
lebesgue-rate-zero acceptance experiment.
"""

import argparse

from toruslab.config import parse_config
from toruslab.runner import run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=512)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default="records")
    args = ap.parse_args()

    cfg = parse_config({
        "label": f"leb-rate-G{args.grid}",
        "map": {"matrix": [[2, 1], [1, 1]]},
        "family": {"truncation": 33},
        "grid": {"resolution": args.grid},
        "target": {"kind": "lebesgue"},
        "basin": {
            "epsilons": [0.2, 0.1],
            "n_values": list(range(100, 501, 50)),
            "window": [100, 500],
            "verdict_tol": 0.01,
        },
        "output_dir": args.out,
        "expect": {"verdict": "consistent_with_zero",
                   "max_abs_slope": 0.005},
    })
    record = run(cfg, threads=args.threads)
    st = record["stages"]["basin"]
    for r in st["rates"]:
        print(f"eps={r['epsilon']}: slope {r['slope']:+.6f} "
              f"(stderr {r['stderr']:.6f}, {r['rows_used']} rows)")
    print(f"verdict: {st['verdict']}")
    print(f"record: {record['record_path']}")


if __name__ == "__main__":
    main()
