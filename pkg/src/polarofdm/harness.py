"""Monte-Carlo BER engine: block pipeline, Eb/N0 sweeps, threshold read-off."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import integrate, special

from . import channel as chan
from . import construction, convcode, interleave, ofdm, polar

FEC_KINDS = ("uncoded", "convolutional", "polar_awgn", "polar_rayleigh")
CHANNELS = ("A", "B", "C", "D", "ergodic")
BLOCK_BITS = 1024
N_INFO_CODED = 512
CSV_HEADER = ["ebn0_db", "info_bits", "bit_errors", "ber", "block_errors", "blocks"]


@dataclass
class SimConfig:
    channel: str = "A"
    fec: str = "polar_awgn"
    interleaver: str = "none"
    list_size: int = 8
    n_sub: int = 256
    n_guard: int = 15
    # sweep: start, 1 dB steps below step_switch_db, 2 dB steps from there on
    ebn0_start: float = 1.0
    step_low: float = 1.0
    step_high: float = 2.0
    step_switch_db: float = 20.0
    ebn0_max: float = 60.0
    target_ber: float = 1e-5
    # explicit point list (comma separated in config files); overrides the sweep rule
    ebn0: list = field(default_factory=list)
    # per-point stopping rule
    min_bit_errors: int = 100
    min_block_errors: int = 0
    max_info_bits: int = 20_000_000
    blocks: int = 0
    chunk_blocks: int = 100
    # code construction
    mu: int = 512
    awgn_cap_db: float = 17.0
    cache_dir: str = ""
    seed: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}")
        if self.fec not in FEC_KINDS:
            raise ValueError(f"fec must be one of {FEC_KINDS}")
        interleave.make_interleaver(self.interleaver, np.random.default_rng(0))
        if self.n_guard < chan.N_TAPS - 1:
            raise ValueError("guard interval shorter than the channel memory")
        if 2 * 2 * self.n_sub != BLOCK_BITS:
            raise ValueError("two QPSK-OFDM symbols must carry exactly 1024 bits")
        if self.chunk_blocks < 1 or self.list_size < 1:
            raise ValueError("chunk_blocks and list_size must be positive")

    @property
    def rate(self) -> float:
        return 1.0 if self.fec == "uncoded" else N_INFO_CODED / BLOCK_BITS

    @property
    def info_bits_per_block(self) -> int:
        return BLOCK_BITS if self.fec == "uncoded" else N_INFO_CODED

    # -- flat "key = value" text form --------------------------------------
    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(repr(float(x)) for x in v)
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_mapping(cls, kv: dict) -> "SimConfig":
        types = {f.name: f for f in fields(cls)}
        args = {}
        for key, raw in kv.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            args[key] = parse_value(types[key], raw)
        return cls(**args)

    @classmethod
    def from_text(cls, text: str) -> "SimConfig":
        return cls.from_mapping(parse_config_text(text))

    def replace(self, **changes) -> "SimConfig":
        d = asdict(self)
        d.update(changes)
        return SimConfig(**d)


def parse_config_text(text: str) -> dict:
    kv = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected 'key = value'")
        k, v = line.split("=", 1)
        kv[k.strip()] = v.strip()
    return kv


def parse_value(f, raw):
    """Convert a config string to the type of field f."""
    if not isinstance(raw, str):
        return raw
    if f.name == "ebn0":
        return [float(t) for t in raw.split(",") if t.strip()]
    kind = {"int": int, "float": float, "str": str}[f.type]
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            value = float(raw)   # accepts 2e7
            if not value.is_integer():
                raise ValueError(f"{f.name} must be an integer, got {raw!r}") from None
            return int(value)
    return kind(raw)


@dataclass
class BerRecord:
    ebn0_db: float
    info_bits: int = 0
    bit_errors: int = 0
    block_errors: int = 0
    blocks: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.info_bits if self.info_bits else float("nan")

    def merge(self, bit_errors: int, block_errors: int, blocks: int, info_bits: int):
        self.bit_errors += int(bit_errors)
        self.block_errors += int(block_errors)
        self.blocks += int(blocks)
        self.info_bits += int(info_bits)


# ---------------------------------------------------------------------------
# block pipeline
# ---------------------------------------------------------------------------

_CODE_CACHE: dict = {}


def design_ebn0(cfg: SimConfig, ebn0_db: float) -> float:
    if cfg.fec == "polar_awgn" or not np.isfinite(ebn0_db):
        return min(ebn0_db, cfg.awgn_cap_db)
    return ebn0_db


def polar_code_for(cfg: SimConfig, ebn0_db: float) -> polar.PolarCodeSpec:
    kind = "awgn" if cfg.fec == "polar_awgn" else "rayleigh"
    d = round(design_ebn0(cfg, ebn0_db), 6)
    key = (kind, d, cfg.mu, cfg.list_size, cfg.cache_dir)
    if key not in _CODE_CACHE:
        frozen = construction.cached_frozen_set(kind, d, BLOCK_BITS, N_INFO_CODED + polar.CRC_LEN,
                                                cfg.mu, cfg.cache_dir or None)
        _CODE_CACHE[key] = polar.PolarCodeSpec(BLOCK_BITS, N_INFO_CODED + polar.CRC_LEN, frozen,
                                               systematic=True, bit_reversed=False,
                                               list_size=cfg.list_size)
    return _CODE_CACHE[key]


def block_rng(seed: int, ebn0_db: float, block_index: int) -> np.random.Generator:
    key = int(round(ebn0_db * 1000)) if np.isfinite(ebn0_db) else 10 ** 9
    return np.random.default_rng(np.random.SeedSequence([seed, key & 0xFFFFFFFF, block_index]))


def encode_blocks(cfg: SimConfig, ebn0_db: float, info) -> np.ndarray:
    """(blocks, info bits) -> (blocks, 1024) channel bits; convolutional blocks form one stream."""
    info = np.asarray(info, dtype=np.uint8)
    if cfg.fec == "uncoded":
        return info.copy()
    if cfg.fec == "convolutional":
        stream, _ = convcode.conv_encode(info.ravel())
        return stream.reshape(info.shape[0], BLOCK_BITS)
    code = polar_code_for(cfg, ebn0_db)
    return np.stack([polar.encode(row, code) for row in info])


def simulate_blocks(cfg: SimConfig, ebn0_db: float, rngs) -> tuple[np.ndarray, np.ndarray]:
    """Run consecutive blocks, one generator each; returns per-block (bit errors, info bits).

    For the convolutional code the blocks form one continuous stream.
    """
    nb = len(rngs)
    n_info = cfg.info_bits_per_block
    sigma = chan.ebn0_to_sigma(ebn0_db, cfg.rate)
    ergodic = cfg.channel == "ergodic"
    n_sym = BLOCK_BITS // (2 * cfg.n_sub)

    info = np.empty((nb, n_info), dtype=np.uint8)
    perms = np.empty((nb, BLOCK_BITS), dtype=np.int64)
    taps = np.empty((nb, chan.N_TAPS), dtype=np.complex128)
    stream_len = n_sym * (cfg.n_sub + cfg.n_guard)
    noise = np.zeros((nb, stream_len), dtype=np.complex128)
    erg = []
    for b, rng in enumerate(rngs):
        info[b] = rng.integers(0, 2, n_info, dtype=np.uint8)
        perms[b] = interleave.make_interleaver(cfg.interleaver, rng)
        if ergodic:
            erg.append(rng)
        else:
            taps[b] = chan.draw_taps(cfg.channel, rng)
            if sigma > 0:
                noise[b] = rng.standard_normal(stream_len) + 1j * rng.standard_normal(stream_len)

    coded = encode_blocks(cfg, ebn0_db, info)
    code = polar_code_for(cfg, ebn0_db) if cfg.fec.startswith("polar") else None
    tx = np.take_along_axis(coded, perms, axis=1)

    if ergodic:
        d_hat = np.empty((nb, BLOCK_BITS))
        h_mag = np.empty((nb, BLOCK_BITS))
        for b, rng in enumerate(erg):
            out = chan.ergodic_rayleigh_outputs(tx[b], sigma, rng)
            d_hat[b], h_mag[b] = out.d_hat, out.h_mag
        soft = ofdm.SoftChannelOutput(d_hat, h_mag)
    else:
        X = ofdm.qpsk_map(tx).reshape(nb, n_sym, cfg.n_sub)
        x_time = ofdm.ofdm_modulate(X, cfg.n_guard).reshape(nb, stream_len)
        y = chan.apply_channel(x_time, taps, sigma, n_sub=cfg.n_sub, noise=noise)
        Y = ofdm.ofdm_demodulate(chan.split_symbols(y, n_sym, cfg.n_sub, cfg.n_guard), cfg.n_guard)
        H = chan.frequency_response(taps, cfg.n_sub)[:, None, :]
        soft = ofdm.soft_demod(ofdm.zf_equalize(Y, H), H)

    soft = ofdm.SoftChannelOutput(_deint(soft.d_hat, perms), _deint(soft.h_mag, perms))
    # noiseless: any positive scale gives the same decisions
    llr = ofdm.llr_from_soft(soft, sigma if sigma > 0 else 1.0)

    if cfg.fec == "uncoded":
        decoded = (llr < 0).astype(np.uint8)
    elif cfg.fec == "convolutional":
        dec = convcode.StreamingViterbi()
        head = dec.decode(llr.ravel())
        decoded = np.concatenate([head[dec.traceback:], dec.flush()]).reshape(nb, n_info)
    else:
        decoded = np.stack([polar.ca_scl_decode(llr[b], code, cfg.list_size)[0]
                            for b in range(nb)])
    errors = np.count_nonzero(decoded != info, axis=1)
    return errors, np.full(nb, n_info)


def _deint(data, perms):
    out = np.empty_like(data)
    np.put_along_axis(out, perms, data, axis=1)
    return out


def run_block(cfg: SimConfig, ebn0_db: float, rng: np.random.Generator) -> tuple[int, bool]:
    errors, _ = simulate_blocks(cfg, ebn0_db, [rng])
    return int(errors[0]), bool(errors[0] > 0)


def _run_chunk(args):
    cfg, ebn0_db, start, count = args
    rngs = [block_rng(cfg.seed, ebn0_db, start + i) for i in range(count)]
    errors, bits = simulate_blocks(cfg, ebn0_db, rngs)
    return int(errors.sum()), int(np.count_nonzero(errors)), count, int(bits.sum())


def _done(cfg: SimConfig, rec: BerRecord) -> bool:
    if cfg.blocks:
        return rec.blocks >= cfg.blocks
    if rec.bit_errors >= cfg.min_bit_errors and rec.block_errors >= cfg.min_block_errors:
        return True
    return rec.info_bits >= cfg.max_info_bits


def run_point(cfg: SimConfig, ebn0_db: float, workers: int = 1, pool=None) -> BerRecord:
    """Simulate chunk after chunk until the stopping rule holds.

    Chunks are merged strictly in order and the rule is checked after every
    merge, so the record does not depend on the number of workers.
    """
    rec = BerRecord(float(ebn0_db))
    chunk = cfg.chunk_blocks
    next_chunk = 0

    def job(c):
        start = c * chunk
        count = chunk if not cfg.blocks else min(chunk, cfg.blocks - start)
        return (cfg, ebn0_db, start, count)

    while not _done(cfg, rec):
        n_jobs = max(1, workers)
        if cfg.blocks:
            remaining = -(-(cfg.blocks - next_chunk * chunk) // chunk)
            n_jobs = min(n_jobs, remaining)
        jobs = [job(next_chunk + j) for j in range(n_jobs)]
        next_chunk += n_jobs
        results = pool.map(_run_chunk, jobs) if pool is not None else map(_run_chunk, jobs)
        for be, blk, n, bits in results:
            rec.merge(be, blk, n, bits)
            if _done(cfg, rec):
                break
    return rec


def sweep_points(cfg: SimConfig):
    if cfg.ebn0:
        yield from cfg.ebn0
        return
    e = cfg.ebn0_start
    while e <= cfg.ebn0_max + 1e-9:
        yield e
        e += cfg.step_low if e < cfg.step_switch_db - 1e-9 else cfg.step_high


def sweep(cfg: SimConfig, workers: int = 1, progress=None) -> list[BerRecord]:
    """Points from ebn0_start upward until the first point with BER below target."""
    records = []
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for e in sweep_points(cfg):
            rec = run_point(cfg, e, workers, pool)
            records.append(rec)
            if progress is not None:
                progress(rec)
            if not cfg.ebn0 and rec.ber < cfg.target_ber:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return records


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([f"{r.ebn0_db:g}", r.info_bits, r.bit_errors, f"{r.ber:.6e}",
                    r.block_errors, r.blocks])
    return buf.getvalue()


def records_from_csv(text: str) -> list[BerRecord]:
    rows = csv.DictReader(io.StringIO(text))
    return [BerRecord(float(r["ebn0_db"]), int(r["info_bits"]), int(r["bit_errors"]),
                      int(r["block_errors"]), int(r["blocks"])) for r in rows]


# ---------------------------------------------------------------------------
# thresholds and analytic reference
# ---------------------------------------------------------------------------

class NoStraddle(ValueError):
    """The records never cross the target BER."""


def threshold_interpolate(records, target_ber: float = 1e-5) -> float:
    """Eb/N0 where the waterfall crosses target_ber, linear in (dB, log10 BER).

    A zero-error point is read as half an error over its bit count.
    """
    pts = []
    for r in records:
        if isinstance(r, BerRecord):
            x, b = r.ebn0_db, r.ber
            if r.bit_errors == 0 and r.info_bits:
                b = 0.5 / r.info_bits
        else:
            x, b = r
        pts.append((float(x), float(b)))
    for (x0, b0), (x1, b1) in zip(pts, pts[1:]):
        if b0 == target_ber:
            return x0
        if b0 > target_ber >= b1:
            if b1 == target_ber:
                return x1
            t = (math.log10(target_ber) - math.log10(b0)) / (math.log10(b1) - math.log10(b0))
            return x0 + t * (x1 - x0)
    if pts and pts[-1][1] == target_ber:
        return pts[-1][0]
    raise NoStraddle(f"no pair of points straddles BER {target_ber:g}")


def uncoded_ber_closed_form(ebn0_db):
    """1/2 (1 - sqrt(g / (1 + g))), g = mean Eb/N0, written without cancellation."""
    g = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    r = np.sqrt(g / (1.0 + g))
    return 0.5 / (1.0 + g) / (1.0 + r)


def uncoded_ber_analytic(ebn0_db: float) -> float:
    """Quadrature of the Rayleigh average of Q(alpha / sigma_w)."""
    sigma = chan.ebn0_to_sigma(ebn0_db, 1.0)
    s2 = sigma * sigma

    # substitute t = alpha / sigma; Rayleigh density 2 alpha exp(-alpha^2)
    def integrand(t):
        return 2.0 * s2 * t * np.exp(-s2 * t * t) * 0.5 * special.erfc(t / np.sqrt(2.0))

    val, _ = integrate.quad(integrand, 0.0, 40.0, epsabs=1e-16, epsrel=1e-13, limit=400)
    return float(val)


# ---------------------------------------------------------------------------
# threshold table: one sub-table per channel, FEC rows, interleaver columns
# ---------------------------------------------------------------------------

TABLE_INTERLEAVERS = ("random", "block_symbol_32x16", "block_bit_32x32", "reverse_shuffle", "none")
TABLE_FEC_LABELS = {"uncoded": "Uncoded", "convolutional": "Convolutional",
                    "polar_awgn": "Polar for AWGN", "polar_rayleigh": "Polar for Rayleigh"}


def cell_value(records, target_ber: float = 1e-5) -> str:
    try:
        return f"{threshold_interpolate(records, target_ber):.1f}"
    except NoStraddle:
        if not records:
            return "-"
        # open interval: the target lies beyond the last simulated point
        return f">{records[-1].ebn0_db:g}"


def table_report(sweeps: dict, target_ber: float = 1e-5,
                 channels=("A", "B", "C", "D")) -> tuple[str, str]:
    """Text and CSV tables keyed by (channel, fec, interleaver) -> records."""
    text = io.StringIO()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["channel", "fec"] + [str(i + 1) for i in range(len(TABLE_INTERLEAVERS))])
    for ch in channels:
        text.write(f"Channel {ch}  (Eb/N0 in dB for BER {target_ber:g}; "
                   "1=random 2=block symbol 32x16 3=block bit 32x32 4=reverse shuffle 5=none)\n")
        text.write(f"{'':<20}" + "".join(f"{i + 1:>8}" for i in range(5)) + "\n")
        for fec in FEC_KINDS:
            vals = [cell_value(sweeps[(ch, fec, il)], target_ber) if (ch, fec, il) in sweeps else "-"
                    for il in TABLE_INTERLEAVERS]
            text.write(f"{TABLE_FEC_LABELS[fec]:<20}" + "".join(f"{v:>8}" for v in vals) + "\n")
            w.writerow([ch, fec] + vals)
        text.write("\n")
    return text.getvalue(), buf.getvalue()


# ---------------------------------------------------------------------------
# campaign preset
# ---------------------------------------------------------------------------

# Polar and convolutional errors arrive in bursts of tens of bits per failed
# block, so the 100-bit rule alone can rest on one or two events.
CAMPAIGN_RULE = dict(min_bit_errors=100, min_block_errors=30, max_info_bits=200_000_000,
                     chunk_blocks=200)


def campaign_config(channel: str, fec: str, interleaver: str, seed: int = 1, **extra) -> SimConfig:
    return SimConfig(channel=channel, fec=fec, interleaver=interleaver, seed=seed,
                     **{**CAMPAIGN_RULE, **extra})
