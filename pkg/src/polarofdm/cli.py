"""polarofdm command line: sweep, construct, table, diag-corr."""

from __future__ import annotations

import argparse
import os
import re
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from . import channel as chan
from . import construction, harness

OUT_ENV = "POLAROFDM_OUT"
CELL_RE = re.compile(r"^(A|B|C|D|ergodic)_(uncoded|convolutional|polar_awgn|polar_rayleigh)_(\w+)\.csv$")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "results"))


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.chmod(tmp, 0o644)
    os.replace(tmp, path)


def cell_name(cfg: harness.SimConfig) -> str:
    return f"{cfg.channel}_{cfg.fec}_{cfg.interleaver}"


def build_config(args) -> harness.SimConfig:
    kv = {}
    if args.config:
        kv.update(harness.parse_config_text(Path(args.config).read_text()))
    for f in fields(harness.SimConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            kv[f.name] = v
    return harness.SimConfig.from_mapping(kv)


def manifest_text(cfg: harness.SimConfig, outputs) -> str:
    head = [f"# polarofdm {__version__}", "# reproduce: polarofdm sweep --config <this file>"]
    head += [f"# output: {p}" for p in outputs]
    return "\n".join(head) + "\n" + cfg.to_text()


def run_campaign_cell(cell, out: Path, seed: int = 1, workers: int = 1):
    """Sweep one (channel, fec, interleaver) cell with the campaign rule.

    Reuses an existing CSV when its manifest holds the same config.
    Returns (records, reused).
    """
    cfg = harness.campaign_config(*cell, seed=seed)
    name = cell_name(cfg)
    csv_path, man_path = Path(out) / f"{name}.csv", Path(out) / f"{name}.manifest"
    if csv_path.exists() and man_path.exists():
        if harness.SimConfig.from_text(man_path.read_text()) == cfg:
            return harness.records_from_csv(csv_path.read_text()), True
    atomic_write(man_path, manifest_text(cfg, [csv_path]))
    records = harness.sweep(cfg, workers=workers)
    atomic_write(csv_path, harness.records_to_csv(records))
    return records, False


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    out = Path(args.out_dir) if args.out_dir else default_out_dir()
    name = cell_name(cfg)
    csv_path = out / f"{name}.csv"
    man_path = out / f"{name}.manifest"
    atomic_write(man_path, manifest_text(cfg, [csv_path]))

    def progress(rec):
        if not args.quiet:
            print(f"{rec.ebn0_db:6.2f} dB  ber={rec.ber:.3e}  bits={rec.info_bits}  "
                  f"blocks={rec.blocks}", file=sys.stderr, flush=True)

    records = harness.sweep(cfg, workers=args.workers, progress=progress)
    atomic_write(csv_path, harness.records_to_csv(records))
    print(f"{name}: BER {cfg.target_ber:g} at {harness.cell_value(records, cfg.target_ber)} dB")
    print(csv_path)
    return 0


def cmd_construct(args) -> int:
    out = Path(args.out_dir) if args.out_dir else default_out_dir()
    base = construction.base_channel(args.channel, args.ebn0, args.mu, args.rate)
    frozen = construction.construct_frozen_set(base, args.n, args.k, args.mu)
    path = construction.cache_path(out, args.channel, args.ebn0, args.n, args.k, args.mu)
    construction.write_frozen_file(path, frozen, kind=args.channel, ebn0_db=args.ebn0,
                                   n=args.n, k=args.k, mu=args.mu)
    print(path)
    return 0


def load_cells(directory: Path) -> dict:
    sweeps = {}
    for p in sorted(directory.glob("*.csv")):
        m = CELL_RE.match(p.name)
        if m:
            sweeps[m.groups()] = harness.records_from_csv(p.read_text())
    return sweeps


def cmd_table(args) -> int:
    src = Path(args.results) if args.results else default_out_dir()
    out = Path(args.out_dir) if args.out_dir else src
    sweeps = load_cells(src)
    if not sweeps:
        print(f"no sweep CSVs found in {src}", file=sys.stderr)
        return 1
    text, csv_text = harness.table_report(sweeps, args.target_ber)
    atomic_write(out / "table.txt", text)
    atomic_write(out / "table.csv", csv_text)
    print(text, end="")
    return 0


def cmd_diag_corr(args) -> int:
    out = Path(args.out_dir) if args.out_dir else default_out_dir()
    rng = np.random.default_rng(args.seed)
    taus = np.arange(args.max_tau + 1)
    models = chan.MODELS if args.model == "all" else (args.model,)
    lines = ["model,tau,corr"] if len(models) > 1 else ["tau,corr"]
    for m in models:
        corr = chan.subcarrier_correlation(m, taus, args.draws, rng)
        prefix = f"{m}," if len(models) > 1 else ""
        lines += [f"{prefix}{t},{c:.6f}" for t, c in zip(taus, corr)]
    path = out / f"corr_{args.model}.csv"
    atomic_write(path, "\n".join(lines) + "\n")
    print(path)
    return 0


def add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("config overrides")
    for f in fields(harness.SimConfig):
        if f.name == "seed":
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.name == "ebn0":
            g.add_argument(flag, dest=f.name, metavar="DB[,DB...]",
                           help="explicit Eb/N0 points instead of the sweep rule")
        else:
            g.add_argument(flag, dest=f.name, metavar=f.type.upper())


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polarofdm")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help=f"output directory (default ${OUT_ENV} or ./results)")

    p = sub.add_parser("sweep", parents=[common], help="BER sweep for one table cell")
    p.add_argument("--config")
    p.add_argument("--seed", dest="seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("construct", parents=[common], help="write a frozen-set file")
    p.add_argument("--channel", choices=("awgn", "rayleigh"), default="awgn")
    p.add_argument("--ebn0", type=float, required=True)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--k", type=int, default=528)
    p.add_argument("--mu", type=int, default=512)
    p.add_argument("--rate", type=float, default=0.5)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("table", parents=[common], help="threshold table (channel x FEC x interleaver) from sweep CSVs")
    p.add_argument("--results", help="directory holding <channel>_<fec>_<interleaver>.csv files")
    p.add_argument("--target-ber", type=float, default=1e-5)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("diag-corr", parents=[common], help="subcarrier |H| correlation vs spacing")
    p.add_argument("--model", choices=chan.MODELS + ("all",), default="all")
    p.add_argument("--max-tau", type=int, default=128)
    p.add_argument("--draws", type=int, default=20000)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_diag_corr)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"polarofdm {args.cmd}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
