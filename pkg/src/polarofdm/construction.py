"""Frozen-set construction by degrading quantization (Tal/Vardy, lower half).

A binary memoryless symmetric channel is stored as conjugate output pairs:
pair k stands for two outputs y, y' with W(y|0) = W(y'|1) = a_k and
W(y|1) = W(y'|0) = b_k, a_k >= b_k. Probabilities are kept as natural logs
so that bit-channel error bounds far below 1e-308 still order correctly.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from numba import njit
from scipy.special import log_ndtr

LN2 = np.log(2.0)


@dataclass
class DiscreteBms:
    log_a: np.ndarray
    log_b: np.ndarray

    @classmethod
    def from_pairs(cls, pairs) -> "DiscreteBms":
        p = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
        hi = np.maximum(p[:, 0], p[:, 1])
        lo = np.minimum(p[:, 0], p[:, 1])
        with np.errstate(divide="ignore"):
            return cls(np.log(hi), np.log(lo))

    @classmethod
    def bsc(cls, p: float) -> "DiscreteBms":
        return cls.from_pairs([(1.0 - p, p)])

    @property
    def a(self) -> np.ndarray:
        return np.exp(self.log_a)

    @property
    def b(self) -> np.ndarray:
        return np.exp(self.log_b)

    @property
    def n_outputs(self) -> int:
        return 2 * self.log_a.size

    def output_pairs(self) -> np.ndarray:
        """All outputs as rows (p(y|0), p(y|1)), each column summing to one."""
        a, b = self.a, self.b
        return np.concatenate([np.stack([a, b], 1), np.stack([b, a], 1)])

    def capacity(self) -> float:
        return float(np.sum(_pair_capacity_vec(self.log_a, self.log_b)))

    def log_error_probability(self) -> float:
        lb = self.log_b[np.isfinite(self.log_b)]
        if lb.size == 0:
            return -np.inf
        top = lb.max()
        return float(top + np.log(np.sum(np.exp(lb - top))))

    def error_probability(self) -> float:
        return float(np.exp(self.log_error_probability()))


def _pair_capacity_vec(la, lb):
    d = la - lb
    a = np.exp(la)
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp(-d)
        s = np.log1p(e) / LN2
        c = a * (1.0 - s + np.where(e > 0, e * (1.0 - d / LN2 - s), 0.0))
    return np.where(np.isfinite(la), c, 0.0)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _logadd(x, y):
    if x == -np.inf:
        return y
    if y == -np.inf:
        return x
    if x > y:
        return x + np.log1p(np.exp(y - x))
    return y + np.log1p(np.exp(x - y))


@njit(cache=True)
def _cap(la, lb):
    if la == -np.inf:
        return 0.0
    d = la - lb
    a = np.exp(la)
    if d == np.inf:
        return a
    e = np.exp(-d)
    s = np.log1p(e) / LN2
    return a * (1.0 - s + e * (1.0 - d / LN2 - s))


@njit(cache=True)
def _heap_push(hk, hi, hv, size, key, idx, ver):
    pos = size
    hk[pos] = key
    hi[pos] = idx
    hv[pos] = ver
    while pos > 0:
        par = (pos - 1) >> 1
        if hk[par] < hk[pos] or (hk[par] == hk[pos] and hi[par] <= hi[pos]):
            break
        hk[par], hk[pos] = hk[pos], hk[par]
        hi[par], hi[pos] = hi[pos], hi[par]
        hv[par], hv[pos] = hv[pos], hv[par]
        pos = par
    return size + 1


@njit(cache=True)
def _heap_pop(hk, hi, hv, size):
    key, idx, ver = hk[0], hi[0], hv[0]
    size -= 1
    hk[0], hi[0], hv[0] = hk[size], hi[size], hv[size]
    pos = 0
    while True:
        l = 2 * pos + 1
        if l >= size:
            break
        c = l
        r = l + 1
        if r < size and (hk[r] < hk[l] or (hk[r] == hk[l] and hi[r] < hi[l])):
            c = r
        if hk[pos] < hk[c] or (hk[pos] == hk[c] and hi[pos] <= hi[c]):
            break
        hk[c], hk[pos] = hk[pos], hk[c]
        hi[c], hi[pos] = hi[pos], hi[c]
        hv[c], hv[pos] = hv[pos], hv[c]
        pos = c
    return key, idx, ver, size


@njit(cache=True)
def _merge_kernel(la_in, lb_in, n_pairs):
    """Greedy adjacent merging (in LLR order) by least capacity loss."""
    keep = np.flatnonzero(la_in > -np.inf)
    la = la_in[keep].copy()
    lb = lb_in[keep].copy()
    n = la.size
    if n <= n_pairs:
        order = np.argsort(la - lb)
        return la[order], lb[order]
    order = np.argsort(la - lb)
    la = la[order]
    lb = lb[order]
    cap = np.empty(n)
    for i in range(n):
        cap[i] = _cap(la[i], lb[i])
    nxt = np.arange(1, n + 1)
    prv = np.arange(-1, n - 1)
    alive = np.ones(n, dtype=np.uint8)
    ver = np.zeros(n, dtype=np.int64)
    hsize_max = 3 * n + 4
    hk = np.empty(hsize_max)
    hi = np.empty(hsize_max, dtype=np.int64)
    hv = np.empty(hsize_max, dtype=np.int64)
    hs = 0
    for i in range(n - 1):
        j = i + 1
        loss = cap[i] + cap[j] - _cap(_logadd(la[i], la[j]), _logadd(lb[i], lb[j]))
        if loss < 0.0:
            loss = 0.0
        hs = _heap_push(hk, hi, hv, hs, loss, i, 0)
    count = n
    while count > n_pairs and hs > 0:
        key, i, v, hs = _heap_pop(hk, hi, hv, hs)
        if alive[i] == 0 or v != ver[i]:
            continue
        j = nxt[i]
        if j >= n:
            continue
        la[i] = _logadd(la[i], la[j])
        lb[i] = _logadd(lb[i], lb[j])
        cap[i] = _cap(la[i], lb[i])
        alive[j] = 0
        nxt[i] = nxt[j]
        if nxt[j] < n:
            prv[nxt[j]] = i
        count -= 1
        ver[i] += 1
        k = nxt[i]
        if k < n:
            loss = cap[i] + cap[k] - _cap(_logadd(la[i], la[k]), _logadd(lb[i], lb[k]))
            if loss < 0.0:
                loss = 0.0
            hs = _heap_push(hk, hi, hv, hs, loss, i, ver[i])
        p = prv[i]
        if p >= 0:
            ver[p] += 1
            loss = cap[p] + cap[i] - _cap(_logadd(la[p], la[i]), _logadd(lb[p], lb[i]))
            if loss < 0.0:
                loss = 0.0
            hs = _heap_push(hk, hi, hv, hs, loss, p, ver[p])
    out = np.flatnonzero(alive)
    return la[out], lb[out]


@njit(cache=True)
def _prebin_kernel(la, lb, edges):
    nb = edges.size - 1
    oa = np.full(nb, -np.inf)
    ob = np.full(nb, -np.inf)
    for i in range(la.size):
        if la[i] == -np.inf:
            continue
        k = np.searchsorted(edges, la[i] - lb[i], side="right") - 1
        if k >= nb:
            k = nb - 1
        oa[k] = _logadd(oa[k], la[i])
        ob[k] = _logadd(ob[k], lb[i])
    keep = np.flatnonzero(oa > -np.inf)
    return oa[keep], ob[keep]


@njit(cache=True)
def _minus_kernel(la, lb):
    n = la.size
    tot = n * (n + 1) // 2
    oa = np.empty(tot)
    ob = np.empty(tot)
    k = 0
    for i in range(n):
        for j in range(i, n):
            x = _logadd(la[i] + la[j], lb[i] + lb[j])
            y = _logadd(la[i] + lb[j], lb[i] + la[j])
            if i != j:
                x += LN2
                y += LN2
            oa[k] = x
            ob[k] = y
            k += 1
    return oa, ob


@njit(cache=True)
def _plus_kernel(la, lb):
    n = la.size
    tot = n * (n + 1)
    oa = np.empty(tot)
    ob = np.empty(tot)
    k = 0
    for i in range(n):
        for j in range(i, n):
            w = LN2 if i != j else 0.0
            oa[k] = la[i] + la[j] + w
            ob[k] = lb[i] + lb[j] + w
            k += 1
            x = la[i] + lb[j]
            y = lb[i] + la[j]
            if x >= y:
                oa[k] = x + w
                ob[k] = y + w
            else:
                oa[k] = y + w
                ob[k] = x + w
            k += 1
    return oa, ob


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def _check_mu(mu: int):
    if mu < 2 or mu % 2:
        raise ValueError("mu must be an even integer >= 2")


def degrading_merge(ch: DiscreteBms, mu: int) -> DiscreteBms:
    """Reduce ch to at most mu outputs; the result is degraded w.r.t. ch."""
    _check_mu(mu)
    if ch.n_outputs <= mu:
        return ch
    la, lb = _merge_kernel(ch.log_a, ch.log_b, mu // 2)
    return DiscreteBms(la, lb)


# fine pre-binning ahead of the greedy merge; bins per output pair of the target
PREBIN_FACTOR = 16


def _reduce(la, lb, mu):
    n_pairs = mu // 2
    if la.size > PREBIN_FACTOR * n_pairs:
        la, lb = _prebin_kernel(la, lb, _llr_boundaries(PREBIN_FACTOR * n_pairs))
    return DiscreteBms(*_merge_kernel(la, lb, n_pairs))


def polarize(ch: DiscreteBms, mu: int) -> tuple[DiscreteBms, DiscreteBms]:
    """The two synthesized channels (worse, better), each merged back to mu outputs."""
    minus = _reduce(*_minus_kernel(ch.log_a, ch.log_b), mu)
    plus = _reduce(*_plus_kernel(ch.log_a, ch.log_b), mu)
    return minus, plus


def _capacity_level(l):
    # 1 - h2(1/(1+e^l)) for an output pair with LLR magnitude l
    p = 1.0 / (1.0 + np.exp(l))
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return 1.0 - np.nan_to_num(h)


@lru_cache(maxsize=8)
def _llr_boundaries(n_bins: int) -> np.ndarray:
    """LLR magnitudes splitting [0, inf) into bins of equal capacity increments."""
    targets = np.arange(n_bins) / n_bins
    lo = np.zeros(n_bins)
    hi = np.full(n_bins, 60.0)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        below = _capacity_level(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    edges = 0.5 * (lo + hi)
    edges[0] = 0.0
    return np.append(edges, np.inf)


def _log_interval(x1, x2):
    """log P(x1 <= Z < x2) for standard normal Z, elementwise, x1 < x2."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    upper = x1 >= 0
    # lower-tail form: log(Phi(x2) - Phi(x1)); upper-tail form via symmetry
    hi = np.where(upper, log_ndtr(-x1), log_ndtr(x2))
    lo = np.where(upper, log_ndtr(-x2), log_ndtr(x1))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = hi + np.log1p(-np.exp(lo - hi))
    return np.where(hi > lo, out, -np.inf)


def _binned_llr_channel(alphas, log_w, sigma_w: float, n_bins: int) -> DiscreteBms:
    """Bin the LLR of a known-amplitude Gaussian mixture into n_bins output pairs."""
    edges = _llr_boundaries(n_bins)
    lo_e, hi_e = edges[:-1], edges[1:]
    alphas = np.asarray(alphas, float)[:, None]
    mean = 2.0 * alphas ** 2 / sigma_w ** 2   # LLR ~ N(mean, 2 mean) given bit 0
    la = np.full((alphas.shape[0], n_bins), -np.inf)
    lb = np.full_like(la, -np.inf)
    pos = mean[:, 0] > 0
    if np.any(pos):
        mu_ = mean[pos]
        sd = np.sqrt(2.0 * mu_)
        la[pos] = _log_interval((lo_e - mu_) / sd, (hi_e - mu_) / sd)
        lb[pos] = _log_interval((-hi_e - mu_) / sd, (-lo_e - mu_) / sd)
    if np.any(~pos):
        la[~pos, 0] = np.log(0.5)
        lb[~pos, 0] = np.log(0.5)
    log_w = np.asarray(log_w, float)[:, None]

    def lse(x):
        top = np.max(x, axis=0)
        safe = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(divide="ignore"):
            return safe + np.log(np.sum(np.exp(x - safe), axis=0))

    return DiscreteBms(lse(la + log_w), lse(lb + log_w))


def quantize_awgn(sigma_w: float, mu: int = 512) -> DiscreteBms:
    """Degraded mu-output version of the BI-AWGN channel (+-1 inputs, noise var sigma_w^2)."""
    if not sigma_w > 0:
        raise ValueError("sigma_w must be positive")
    _check_mu(mu)
    fine = _binned_llr_channel([1.0], [0.0], sigma_w, mu)
    return degrading_merge(fine, mu)


def rayleigh_alpha_grid(n_points: int = 512, alpha_max: float = 5.0):
    """Cell midpoints and log Rayleigh masses (E[alpha^2] = 1); tail mass folded into the last cell."""
    edges = np.linspace(0.0, alpha_max, n_points + 1)
    cdf = -np.expm1(-edges ** 2)
    w = np.diff(cdf)
    w[-1] += np.exp(-alpha_max ** 2)
    return 0.5 * (edges[:-1] + edges[1:]), np.log(w)


def quantize_rayleigh(sigma_w: float, mu: int = 512, n_alpha: int = 512) -> DiscreteBms:
    """Ergodic Rayleigh channel with receiver-known fading, quantized to mu outputs."""
    if not sigma_w > 0:
        raise ValueError("sigma_w must be positive")
    _check_mu(mu)
    alphas, log_w = rayleigh_alpha_grid(n_alpha)
    fine = _binned_llr_channel(alphas, log_w, sigma_w, mu)
    return degrading_merge(fine, mu)


def bit_channel_log_bounds(base: DiscreteBms, n: int, mu: int = 512) -> np.ndarray:
    """Natural-log upper bounds on the error probability of each synthesized channel."""
    if n < 1 or n & (n - 1):
        raise ValueError("N must be a power of two")
    _check_mu(mu)
    chans = [degrading_merge(base, mu)]
    while len(chans) < n:
        nxt = []
        for c in chans:
            nxt.extend(polarize(c, mu))
        chans = nxt
    return np.array([c.log_error_probability() for c in chans])


def select_info_set(log_bounds, k: int) -> np.ndarray:
    order = np.lexsort((np.arange(len(log_bounds)), log_bounds))
    return np.sort(order[:k])


def construct_frozen_set(base: DiscreteBms, n: int, k: int, mu: int = 512) -> tuple:
    """Frozen indices (0-based): the N-K synthesized channels with the largest bounds."""
    if n < 1 or n & (n - 1) or not 0 < k <= n:
        raise ValueError("need N a power of two and 0 < K <= N")
    if k == n:
        return ()
    info = set(select_info_set(bit_channel_log_bounds(base, n, mu), k).tolist())
    return tuple(i for i in range(n) if i not in info)


# ---------------------------------------------------------------------------
# Genie-aided Monte-Carlo oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BitChannelReliability:
    index: int
    error_prob_upper: float


def _boxplus(a, b):
    with np.errstate(over="ignore", invalid="ignore"):
        s = np.sign(a) * np.sign(b)
        return s * np.minimum(np.abs(a), np.abs(b)) + np.log1p(np.exp(-np.abs(a + b))) \
            - np.log1p(np.exp(-np.abs(a - b)))


def _genie_leaf_llrs(llr):
    n = llr.shape[1]
    if n == 1:
        return llr
    h = n // 2
    left = _boxplus(llr[:, :h], llr[:, h:])
    right = llr[:, :h] + llr[:, h:]
    return np.concatenate([_genie_leaf_llrs(left), _genie_leaf_llrs(right)], axis=1)


def monte_carlo_reliabilities(sigma_w: float, channel_kind: str, n: int, trials: int,
                              seed: int = 0, batch: int = 20000):
    """Per-bit-channel error rates by genie-aided SC on the all-zero codeword."""
    rng = np.random.default_rng(seed)
    errors = np.zeros(n)
    done = 0
    while done < trials:
        t = min(batch, trials - done)
        if channel_kind == "awgn":
            alpha = np.ones((t, n))
        elif channel_kind in ("rayleigh", "ergodic"):
            alpha = rng.rayleigh(scale=np.sqrt(0.5), size=(t, n))
        else:
            raise ValueError(f"unknown channel kind {channel_kind!r}")
        if sigma_w == 0:
            llr = np.where(alpha > 0, np.inf, 0.0)
        else:
            y = alpha + sigma_w * rng.standard_normal((t, n))
            llr = 2.0 * alpha * y / sigma_w ** 2
        leaf = _genie_leaf_llrs(llr)
        errors += np.sum(leaf < 0, axis=0) + 0.5 * np.sum(leaf == 0, axis=0)
        done += t
    return [BitChannelReliability(i, float(e / trials)) for i, e in enumerate(errors)]


# ---------------------------------------------------------------------------
# Design SNR and file cache
# ---------------------------------------------------------------------------

def design_sigma(ebn0_db: float, rate: float = 0.5) -> float:
    return float(np.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))))


def base_channel(kind: str, ebn0_db: float, mu: int = 512, rate: float = 0.5) -> DiscreteBms:
    sigma = design_sigma(ebn0_db, rate)
    if kind == "awgn":
        return quantize_awgn(sigma, mu)
    if kind == "rayleigh":
        return quantize_rayleigh(sigma, mu)
    raise ValueError(f"unknown construction channel {kind!r}")


def cache_path(cache_dir, kind: str, ebn0_db: float, n: int, k: int, mu: int) -> Path:
    return Path(cache_dir) / f"frozen_{kind}_{ebn0_db:.2f}dB_N{n}_K{k}_mu{mu}.txt"


def write_frozen_file(path, frozen, *, kind, ebn0_db, n, k, mu):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = f"# kind={kind} ebn0_db={ebn0_db:.2f} n={n} k={k} mu={mu}\n"
    body += "".join(f"{i}\n" for i in sorted(frozen))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(body)
    os.chmod(tmp, 0o644)
    os.replace(tmp, path)


def read_frozen_file(path) -> tuple:
    lines = Path(path).read_text().splitlines()
    return tuple(int(s) for s in lines if s.strip() and not s.startswith("#"))


def cached_frozen_set(kind: str, ebn0_db: float, n: int = 1024, k: int = 528,
                      mu: int = 512, cache_dir=None) -> tuple:
    """Frozen set for (kind, Eb/N0, N, K, mu), constructed once and kept on disk."""
    if cache_dir is None:
        cache_dir = os.environ.get("POLAROFDM_CACHE", Path.home() / ".cache" / "polarofdm")
    path = cache_path(cache_dir, kind, ebn0_db, n, k, mu)
    if path.exists():
        return read_frozen_file(path)
    frozen = construct_frozen_set(base_channel(kind, ebn0_db, mu), n, k, mu)
    write_frozen_file(path, frozen, kind=kind, ebn0_db=ebn0_db, n=n, k=k, mu=mu)
    return frozen
