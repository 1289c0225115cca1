"""Re-sweep one cell on a finer Eb/N0 grid around its threshold.

Same stopping rule as the campaign; output goes to <out-dir>/fine/ so the
campaign CSVs are left untouched.

    python3 scripts/fine_sweep.py ergodic polar_rayleigh none 4.0 5.5 0.25
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from polarofdm import cli, harness


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("channel")
    ap.add_argument("fec")
    ap.add_argument("interleaver")
    ap.add_argument("start", type=float)
    ap.add_argument("stop", type=float)
    ap.add_argument("step", type=float)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    pts = [round(float(x), 6) for x in np.arange(args.start, args.stop + 1e-9, args.step)]
    cfg = harness.campaign_config(args.channel, args.fec, args.interleaver, seed=args.seed, ebn0=pts)
    out = Path(args.out_dir) / "fine"
    name = cli.cell_name(cfg)
    csv_path = out / f"{name}.csv"
    cli.atomic_write(out / f"{name}.manifest", cli.manifest_text(cfg, [csv_path]))
    recs = harness.sweep(cfg, progress=lambda r: print(f"{r.ebn0_db:5.2f} dB  ber={r.ber:.3e}", flush=True))
    cli.atomic_write(csv_path, harness.records_to_csv(recs))
    print(f"{name}: BER {cfg.target_ber:g} at {harness.cell_value(recs, cfg.target_ber)} dB (fine grid)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
