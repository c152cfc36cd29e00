#!/usr/bin/env python3
"""Desk-scale critical-time diagrams: t_c against precision and order.

Runs paired verification integrations over a small sweep and writes two
TSV tables (t_c vs carried decimal digits at fixed order, and t_c vs
order at fixed precision). Raw values, no smoothing. Minutes of runtime
at the defaults.

    python scripts/tc_sweep.py --out-dir results/
"""

import argparse
import pathlib
import sys

from mptaylor import diagram_tsv, tc_diagram

INIT = ("-15.8", "-17.48", "35.64")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=".", dest="out_dir")
    parser.add_argument("--tau", default="0.02")
    parser.add_argument("--t-end", default="80", dest="t_end")
    parser.add_argument("--agree-digits", type=int, default=6, dest="agree_digits")
    args = parser.parse_args()
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    precision_sweep = [(64, 40), (96, 40), (128, 40), (192, 40), (256, 40)]
    rows = tc_diagram(
        "lorenz", INIT, precision_sweep,
        tau_text=args.tau, t_end_text=args.t_end, d=args.agree_digits,
        swept="precision",
    )
    path = out_dir / "tc_vs_digits.tsv"
    path.write_text(diagram_tsv(rows))
    print(f"wrote {path}")
    for param, t_c, _ in rows:
        print(f"  {param} digits -> t_c = {t_c}")

    order_sweep = [(512, 6), (512, 10), (512, 14), (512, 22), (512, 30)]
    rows = tc_diagram(
        "lorenz", INIT, order_sweep,
        tau_text=args.tau, t_end_text=args.t_end, d=args.agree_digits,
        swept="order",
    )
    path = out_dir / "tc_vs_order.tsv"
    path.write_text(diagram_tsv(rows))
    print(f"wrote {path}")
    for param, t_c, _ in rows:
        print(f"  order {param} -> t_c = {t_c}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
