"""Systematic / non-systematic polar codes with CRC-aided list decoding.

Index conventions: all bit indices are 0-based. A code of length N = 2**m uses
the natural-order kernel x = u F^{(x)m}; the bit-reversed variant transmits
x permuted by the bit-reversal operator. LLRs are ln p(y|0)/p(y|1), so a
positive LLR favours bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

# x^16+x^14+x^13+x^12+x^10+x^8+x^6+x^4+x^3+x+1, full 17-bit coefficient mask
CRC16_POLY = 0x1755B
CRC_LEN = 16


def _log2_exact(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise ValueError(f"length must be a power of two >= 2, got {n}")
    return n.bit_length() - 1


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

@njit(cache=True)
def _transform_inplace(c):
    n = c.size
    d = 1
    while d < n:
        for i in range(0, n, 2 * d):
            for j in range(i, i + d):
                c[j] ^= c[j + d]
        d *= 2


def polar_transform(u) -> np.ndarray:
    """Return u F^{(x)m} over GF(2) by the O(N log N) butterfly."""
    c = np.array(u, dtype=np.uint8, copy=True)
    _log2_exact(c.size)
    _transform_inplace(c)
    return c


def bit_reversal_indices(n: int) -> np.ndarray:
    m = _log2_exact(n)
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(m):
        rev |= ((idx >> b) & 1) << (m - 1 - b)
    return rev


def bit_reversal_permute(v) -> np.ndarray:
    v = np.asarray(v)
    return v[bit_reversal_indices(v.size)]


# ---------------------------------------------------------------------------
# CRC
# ---------------------------------------------------------------------------

@njit(cache=True)
def _crc_kernel(bits, poly_low, width):
    mask = (1 << width) - 1
    reg = 0
    for b in bits:
        top = ((reg >> (width - 1)) & 1) ^ (b & 1)
        reg = (reg << 1) & mask
        if top:
            reg ^= poly_low
    out = np.empty(width, dtype=np.uint8)
    for k in range(width):
        out[k] = (reg >> (width - 1 - k)) & 1
    return out


def crc16(bits, poly: int = CRC16_POLY) -> np.ndarray:
    """Remainder of bits(x)*x^16 mod poly, MSB first, zero init, no reflection/xor."""
    width = poly.bit_length() - 1
    return _crc_kernel(np.asarray(bits, dtype=np.uint8), poly & ((1 << width) - 1), width)


# ---------------------------------------------------------------------------
# LLR primitives
# ---------------------------------------------------------------------------

@njit(cache=True)
def _f_exact(a, b):
    # 2 atanh(tanh(a/2) tanh(b/2)) written so that no term can overflow
    aa = abs(a)
    ab = abs(b)
    s = 1.0 if (a >= 0.0) == (b >= 0.0) else -1.0
    m = aa if aa < ab else ab
    if m == 0.0:
        return 0.0
    out = s * m
    # correction terms vanish below double precision past |.| ~ 40
    x = abs(a + b)
    if x < 40.0:
        out += np.log1p(np.exp(-x))
    x = abs(a - b)
    if x < 40.0:
        out -= np.log1p(np.exp(-x))
    return out


@njit(cache=True)
def _f_minsum(a, b):
    aa = abs(a)
    ab = abs(b)
    m = aa if aa < ab else ab
    if (a >= 0.0) == (b >= 0.0):
        return m
    return -m


def llr_combine_exact(a: float, b: float) -> float:
    return float(_f_exact(float(a), float(b)))


def llr_combine_minsum(a: float, b: float) -> float:
    return float(np.sign(a) * np.sign(b) * min(abs(a), abs(b)))


def llr_g(a, b, u_prev):
    return b + (1 - 2 * u_prev) * a


def path_metric_update(mu, lam, u):
    """mu + ln(1 + exp(-(1-2u) lam)), evaluated as a softplus."""
    return mu + np.logaddexp(0.0, -(1 - 2 * np.asarray(u)) * lam)


# ---------------------------------------------------------------------------
# Code specification
# ---------------------------------------------------------------------------

@dataclass
class PolarCodeSpec:
    n_bits: int
    k_bits: int
    frozen_set: tuple
    crc_poly: int | None = CRC16_POLY
    bit_reversed: bool = False
    systematic: bool = True
    list_size: int = 8
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.m = _log2_exact(self.n_bits)
        self.frozen_set = tuple(sorted(int(i) for i in self.frozen_set))
        if not 0 < self.k_bits <= self.n_bits:
            raise ValueError("need 0 < K <= N")
        if len(set(self.frozen_set)) != self.n_bits - self.k_bits:
            raise ValueError("frozen set must hold exactly N - K distinct indices")
        if self.frozen_set and not (0 <= self.frozen_set[0] and self.frozen_set[-1] < self.n_bits):
            raise ValueError("frozen index out of range")
        if self.crc_len >= self.k_bits:
            raise ValueError("CRC length must be smaller than K")
        mask = np.zeros(self.n_bits, dtype=np.uint8)
        mask[list(self.frozen_set)] = 1
        self.frozen_mask = mask
        self.info_indices = np.flatnonzero(mask == 0)

    @property
    def crc_len(self) -> int:
        return 0 if self.crc_poly is None else self.crc_poly.bit_length() - 1

    @property
    def n_info(self) -> int:
        return self.k_bits - self.crc_len

    @classmethod
    def from_info_set(cls, n_bits, info_set, **kw):
        info = set(int(i) for i in info_set)
        frozen = [i for i in range(n_bits) if i not in info]
        return cls(n_bits, len(info), tuple(frozen), **kw)

    # -- text form: "key value" lines, frozen indices space separated ---------
    def to_text(self) -> str:
        lines = [
            f"n_bits {self.n_bits}",
            f"k_bits {self.k_bits}",
            f"list_size {self.list_size}",
            f"crc_poly {'none' if self.crc_poly is None else hex(self.crc_poly)}",
            f"bit_reversed {int(self.bit_reversed)}",
            f"systematic {int(self.systematic)}",
            "frozen " + " ".join(str(i) for i in self.frozen_set),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolarCodeSpec":
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition(" ")
            kv[key] = val.strip()
        poly = kv.get("crc_poly", "none")
        return cls(
            n_bits=int(kv["n_bits"]),
            k_bits=int(kv["k_bits"]),
            frozen_set=tuple(int(t) for t in kv.get("frozen", "").split()),
            crc_poly=None if poly == "none" else int(poly, 16),
            bit_reversed=bool(int(kv.get("bit_reversed", 0))),
            systematic=bool(int(kv.get("systematic", 1))),
            list_size=int(kv.get("list_size", 8)),
        )

    # -- systematic encoder helpers ------------------------------------------
    def _two_pass_ok(self) -> bool:
        if "two_pass" not in self._cache:
            a = self.info_indices
            g = ((a[:, None] & a[None, :]) == a[None, :]).astype(np.int64)
            sq = (g @ g) & 1
            self._cache["two_pass"] = bool(np.array_equal(sq, np.eye(a.size, dtype=np.int64)))
        return self._cache["two_pass"]

    def _gaa_inverse(self) -> np.ndarray:
        if "gaa_inv" not in self._cache:
            a = self.info_indices
            g = ((a[:, None] & a[None, :]) == a[None, :]).astype(np.uint8)
            self._cache["gaa_inv"] = _gf2_inverse(g)
        return self._cache["gaa_inv"]


def _gf2_inverse(g: np.ndarray) -> np.ndarray:
    k = g.shape[0]
    aug = np.concatenate([g.copy(), np.eye(k, dtype=np.uint8)], axis=1)
    for col in range(k):
        piv = col + int(np.argmax(aug[col:, col]))
        if aug[piv, col] == 0:
            raise ValueError("matrix is singular over GF(2)")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        rows = np.flatnonzero(aug[:, col])
        rows = rows[rows != col]
        aug[rows] ^= aug[col]
    return aug[:, k:]


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

def _with_crc(info, spec: PolarCodeSpec) -> np.ndarray:
    info = np.asarray(info, dtype=np.uint8)
    if info.size != spec.n_info:
        raise ValueError(f"expected {spec.n_info} information bits, got {info.size}")
    if spec.crc_poly is None:
        return info.copy()
    return np.concatenate([info, crc16(info, spec.crc_poly)])


def encode(info, spec: PolarCodeSpec) -> np.ndarray:
    """Encode K - crc_len information bits into an N-bit codeword."""
    data = _with_crc(info, spec)
    u = np.zeros(spec.n_bits, dtype=np.uint8)
    if spec.systematic:
        if spec._two_pass_ok():
            u[spec.info_indices] = data
            _transform_inplace(u)
            u[spec.frozen_mask == 1] = 0
        else:
            u[spec.info_indices] = (data.astype(np.int64) @ spec._gaa_inverse()) & 1
    else:
        u[spec.info_indices] = data
    _transform_inplace(u)
    if spec.bit_reversed:
        u = bit_reversal_permute(u)
    return u


# ---------------------------------------------------------------------------
# SC decoder
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ctz(i):
    t = 0
    while (i & 1) == 0:
        i >>= 1
        t += 1
    return t


@njit(cache=True)
def _sc_kernel(llr, frozen, minsum):
    n = llr.size
    m = 0
    while (1 << m) < n:
        m += 1
    alpha = np.zeros((m + 1, n))
    beta_l = np.zeros((m + 1, n), dtype=np.uint8)
    beta_r = np.zeros((m + 1, n), dtype=np.uint8)
    alpha[0, :] = llr
    u = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        if i == 0:
            d0 = 0
        else:
            d0 = m - 1 - _ctz(i)
            h = n >> (d0 + 1)
            for j in range(h):
                if beta_l[d0 + 1, j]:
                    alpha[d0 + 1, j] = alpha[d0, j + h] - alpha[d0, j]
                else:
                    alpha[d0 + 1, j] = alpha[d0, j + h] + alpha[d0, j]
            d0 += 1
        for d in range(d0, m):
            h = n >> (d + 1)
            for j in range(h):
                if minsum:
                    alpha[d + 1, j] = _f_minsum(alpha[d, j], alpha[d, j + h])
                else:
                    alpha[d + 1, j] = _f_exact(alpha[d, j], alpha[d, j + h])
        lam = alpha[m, 0]
        bit = 0
        if frozen[i] == 0 and lam < 0.0:
            bit = 1
        u[i] = bit
        # partial sums upward
        beta_r[m, 0] = bit
        d = m
        idx = i
        while d > 0 and (idx & 1) == 1:
            h = n >> d
            for j in range(h):
                beta_r[d - 1, j] = beta_l[d, j] ^ beta_r[d, j]
                beta_r[d - 1, j + h] = beta_r[d, j]
            d -= 1
            idx >>= 1
        if d > 0:
            h = n >> d
            for j in range(h):
                beta_l[d, j] = beta_r[d, j]
    return u, beta_r[0, :].copy()


# ---------------------------------------------------------------------------
# SCL decoder (LLR based, min-sum f, exact softplus path metric)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _scl_kernel(llr, frozen, list_size, minsum):
    n = llr.size
    m = 0
    while (1 << m) < n:
        m += 1
    L = list_size
    alpha = np.zeros((L, m + 1, n))
    beta_l = np.zeros((L, m + 1, n), dtype=np.uint8)
    beta_r = np.zeros((L, m + 1, n), dtype=np.uint8)
    u = np.zeros((L, n), dtype=np.uint8)
    pm = np.zeros(L)
    for s in range(L):
        alpha[s, 0, :] = llr
    active = np.zeros(L, dtype=np.int64)   # slot ids in path order
    n_act = 1
    active[0] = 0
    free = np.zeros(L, dtype=np.int64)
    lam = np.zeros(L)
    cand_pm = np.zeros(2 * L)
    keep = np.zeros(2 * L, dtype=np.uint8)
    new_active = np.zeros(L, dtype=np.int64)
    new_bits = np.zeros(L, dtype=np.uint8)
    for i in range(n):
        if i == 0:
            d_start = 0
        else:
            d_start = m - 1 - _ctz(i)
        # LLRs down to leaf i for every active path
        for p in range(n_act):
            s = active[p]
            d0 = d_start
            if i > 0:
                h = n >> (d0 + 1)
                for j in range(h):
                    if beta_l[s, d0 + 1, j]:
                        alpha[s, d0 + 1, j] = alpha[s, d0, j + h] - alpha[s, d0, j]
                    else:
                        alpha[s, d0 + 1, j] = alpha[s, d0, j + h] + alpha[s, d0, j]
                d0 += 1
            for d in range(d0, m):
                h = n >> (d + 1)
                for j in range(h):
                    if minsum:
                        alpha[s, d + 1, j] = _f_minsum(alpha[s, d, j], alpha[s, d, j + h])
                    else:
                        alpha[s, d + 1, j] = _f_exact(alpha[s, d, j], alpha[s, d, j + h])
            lam[p] = alpha[s, m, 0]

        if frozen[i]:
            for p in range(n_act):
                s = active[p]
                lp = lam[p]
                pm[s] += np.log1p(np.exp(-abs(lp))) + (abs(lp) if lp < 0.0 else 0.0)
                new_active[p] = s
                new_bits[p] = 0
            n_new = n_act
        else:
            # candidate 2p: hard decision, 2p+1: its complement
            for p in range(n_act):
                s = active[p]
                lp = abs(lam[p])
                base = pm[s] + np.log1p(np.exp(-lp))
                cand_pm[2 * p] = base
                cand_pm[2 * p + 1] = base + lp
            nc = 2 * n_act
            for c in range(nc):
                keep[c] = 0
            if nc <= L:
                for c in range(nc):
                    keep[c] = 1
            else:
                order = np.argsort(cand_pm[:nc], kind="mergesort")
                for r in range(L):
                    keep[order[r]] = 1
            # release slots whose both children died
            n_free = 0
            for p in range(n_act):
                if keep[2 * p] == 0 and keep[2 * p + 1] == 0:
                    free[n_free] = active[p]
                    n_free += 1
            for s in range(L):
                used = False
                for p in range(n_act):
                    if active[p] == s:
                        used = True
                        break
                if not used:
                    free[n_free] = s
                    n_free += 1
            # rows still read after this leaf
            d_next = m - 1 - _ctz(i + 1) if i + 1 < n else 0
            n_new = 0
            fptr = 0
            for p in range(n_act):
                s = active[p]
                hd = 1 if lam[p] < 0.0 else 0
                k0 = keep[2 * p]
                k1 = keep[2 * p + 1]
                if k0 == 0 and k1 == 0:
                    continue
                if k0 and k1:
                    t = free[fptr]
                    fptr += 1
                    for d in range(1, d_next + 1):
                        h = n >> d
                        for j in range(h):
                            alpha[t, d, j] = alpha[s, d, j]
                    for d in range(1, m + 1):
                        if ((i >> (m - d)) & 1) == 1:
                            h = n >> d
                            for j in range(h):
                                beta_l[t, d, j] = beta_l[s, d, j]
                    for j in range(i):
                        u[t, j] = u[s, j]
                    pm[t] = cand_pm[2 * p + 1]
                    pm[s] = cand_pm[2 * p]
                    new_active[n_new] = s
                    new_bits[n_new] = hd
                    n_new += 1
                    new_active[n_new] = t
                    new_bits[n_new] = 1 - hd
                    n_new += 1
                elif k0:
                    pm[s] = cand_pm[2 * p]
                    new_active[n_new] = s
                    new_bits[n_new] = hd
                    n_new += 1
                else:
                    pm[s] = cand_pm[2 * p + 1]
                    new_active[n_new] = s
                    new_bits[n_new] = 1 - hd
                    n_new += 1
        # commit bit and propagate partial sums
        for p in range(n_new):
            s = new_active[p]
            active[p] = s
            bit = new_bits[p]
            u[s, i] = bit
            beta_r[s, m, 0] = bit
            d = m
            idx = i
            while d > 0 and (idx & 1) == 1:
                h = n >> d
                for j in range(h):
                    beta_r[s, d - 1, j] = beta_l[s, d, j] ^ beta_r[s, d, j]
                    beta_r[s, d - 1, j + h] = beta_r[s, d, j]
                d -= 1
                idx >>= 1
            if d > 0:
                h = n >> d
                for j in range(h):
                    beta_l[s, d, j] = beta_r[s, d, j]
        n_act = n_new

    us = np.zeros((n_act, n), dtype=np.uint8)
    xs = np.zeros((n_act, n), dtype=np.uint8)
    pms = np.zeros(n_act)
    for p in range(n_act):
        s = active[p]
        us[p, :] = u[s, :]
        xs[p, :] = beta_r[s, 0, :]
        pms[p] = pm[s]
    return us, xs, pms


# ---------------------------------------------------------------------------
# Public decoders
# ---------------------------------------------------------------------------

def _prepare_llr(llrs, spec: PolarCodeSpec) -> np.ndarray:
    llr = np.asarray(llrs, dtype=np.float64)
    if llr.shape != (spec.n_bits,):
        raise ValueError(f"expected {spec.n_bits} LLRs, got shape {llr.shape}")
    if spec.bit_reversed:
        llr = bit_reversal_permute(llr)
    return np.ascontiguousarray(llr)


def _extract(u, x, spec: PolarCodeSpec):
    data = (x if spec.systematic else u)[spec.info_indices]
    info = data[: spec.n_info]
    if spec.crc_poly is None:
        return info.copy(), True
    ok = bool(np.array_equal(crc16(info, spec.crc_poly), data[spec.n_info:]))
    return info.copy(), ok


def sc_decode(llrs, spec: PolarCodeSpec, minsum: bool = False):
    """Successive cancellation; returns (info bits, crc_ok)."""
    u, x = _sc_kernel(_prepare_llr(llrs, spec), spec.frozen_mask, minsum)
    return _extract(u, x, spec)


def scl_list(llrs, spec: PolarCodeSpec, list_size: int, minsum: bool = True):
    """Surviving list as (u rows, codeword rows, metrics), in path order."""
    if list_size < 1:
        raise ValueError("list_size must be >= 1")
    return _scl_kernel(_prepare_llr(llrs, spec), spec.frozen_mask, int(list_size), minsum)


def scl_decode(llrs, spec: PolarCodeSpec, list_size: int | None = None, minsum: bool = True):
    """List decoding; the lowest-metric CRC-passing path wins, else the best path."""
    us, xs, pms = scl_list(llrs, spec, spec.list_size if list_size is None else list_size, minsum)
    order = np.argsort(pms, kind="stable")
    best = None
    for r in order:
        info, ok = _extract(us[r], xs[r], spec)
        if ok:
            return info, True
        if best is None:
            best = info
    return best, False


def ca_scl_decode(llrs, spec: PolarCodeSpec, list_size: int | None = None):
    """SC first; falls back to list decoding when the CRC fails.

    Returns (info bits, used_list).
    """
    info, ok = sc_decode(llrs, spec)
    if ok:
        return info, False
    info, _ = scl_decode(llrs, spec, list_size)
    return info, True
