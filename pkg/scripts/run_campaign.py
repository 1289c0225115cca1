"""Run every threshold-table cell (and the ergodic baselines) with the campaign stopping rule.

Cells whose CSV already exists next to a manifest with the same config are
skipped, so the script can be interrupted and restarted.

    python3 scripts/run_campaign.py --out-dir results [--only acceptance|table|all]
"""

import argparse
import sys
import time
from pathlib import Path

from polarofdm import cli, harness

INTERLEAVERS = harness.TABLE_INTERLEAVERS
CODED = ("convolutional", "polar_awgn", "polar_rayleigh")


def acceptance_cells():
    cells = [(ch, "uncoded", "none") for ch in "ABCD"]
    cells += [("ergodic", "polar_rayleigh", "none"), ("ergodic", "convolutional", "none")]
    cells += [("B", "convolutional", "block_bit_32x32"), ("A", "convolutional", "block_bit_32x32"),
              ("A", "polar_awgn", "none"), ("B", "polar_rayleigh", "random"),
              ("B", "polar_awgn", "none"), ("D", "convolutional", "none")]
    cells += [(ch, "convolutional", il) for ch in "AB" for il in INTERLEAVERS]
    cells += [(ch, fec, il) for ch in "CD" for fec in CODED for il in INTERLEAVERS]
    return list(dict.fromkeys(cells))


def table_cells():
    return [(ch, fec, il) for ch in "ABCD" for fec in harness.FEC_KINDS for il in INTERLEAVERS]


def run_cell(cell, out: Path, seed: int):
    t = time.time()
    recs, reused = cli.run_campaign_cell(cell, out, seed)
    return "cached" if reused else f"{harness.cell_value(recs)} dB in {time.time() - t:.0f} s"


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--only", choices=("acceptance", "table", "all"), default="all")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    cells = acceptance_cells() if args.only != "table" else []
    if args.only != "acceptance":
        cells += [c for c in table_cells() if c not in cells]
    out = Path(args.out_dir)
    for i, cell in enumerate(cells, 1):
        print(f"[{i}/{len(cells)}] {'_'.join(cell)}: {run_cell(cell, out, args.seed)}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
