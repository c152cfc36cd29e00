#!/usr/bin/env python3
"""Worker-scaling probe at the production configuration.

Times a short simulation (5 steps by default) serially and at each
requested worker count, printing the speedup/efficiency table. Absolute
seconds depend entirely on the machine; the scaling columns are the
comparable output. All rows are cross-checked to produce bit-identical
states before any timing is reported.

    python scripts/scaling_probe.py --workers 1,2,4 --order 2000 --prec-bits 8000
"""

import argparse
import sys

from mptaylor import builtin_system, run_benchmark
from mptaylor.bench import bench_table


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workers", default="2", help="comma-separated worker counts")
    parser.add_argument("--order", type=int, default=2000)
    parser.add_argument("--prec-bits", type=int, default=8000, dest="prec_bits")
    parser.add_argument("--probe-steps", type=int, default=5, dest="probe_steps")
    parser.add_argument("--tau", default="0.01")
    args = parser.parse_args()

    worker_counts = [int(w) for w in args.workers.split(",") if w.strip()]
    records = run_benchmark(
        lambda ctx: builtin_system("lorenz", ctx),
        ("-15.8", "-17.48", "35.64"),
        args.tau,
        order=args.order,
        prec_bits=args.prec_bits,
        worker_counts=worker_counts,
        probe_steps=args.probe_steps,
    )
    sys.stdout.write(bench_table(records))
    return 0


if __name__ == "__main__":
    sys.exit(main())
