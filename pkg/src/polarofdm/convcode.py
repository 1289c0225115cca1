"""Rate-1/2, K=7 convolutional code (octal 133, 171) with soft-input Viterbi.

Tap convention: the 7-bit register holds the newest input bit in its MSB, and
generator 133 = 1011011b is ANDed against it, so the impulse response of the
first output is the generator read MSB first. Output order per input bit is
(g0 output, g1 output).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

TRACEBACK_DEPTH = 64


@dataclass(frozen=True)
class ConvSpec:
    constraint_len: int = 7
    generators: tuple = (0o133, 0o171)

    def __post_init__(self):
        for g in self.generators:
            if g <= 0 or g.bit_length() > self.constraint_len:
                raise ValueError(f"generator {oct(g)} does not fit constraint length")

    @property
    def n_states(self) -> int:
        return 1 << (self.constraint_len - 1)

    @property
    def rate(self) -> float:
        return 1.0 / len(self.generators)


DEFAULT_SPEC = ConvSpec()


@njit(cache=True)
def _parity(x):
    p = 0
    while x:
        p ^= x & 1
        x >>= 1
    return p


@njit(cache=True)
def _encode_kernel(bits, state, g0, g1, k):
    out = np.empty(2 * bits.size, dtype=np.uint8)
    for t in range(bits.size):
        reg = (np.int64(bits[t]) << (k - 1)) | state
        out[2 * t] = _parity(reg & g0)
        out[2 * t + 1] = _parity(reg & g1)
        state = reg >> 1
    return out, state


def conv_encode(info, spec: ConvSpec = DEFAULT_SPEC, initial_state: int = 0):
    """Encode, returning (coded bits, final state) so streams can be continued."""
    g0, g1 = spec.generators
    out, state = _encode_kernel(np.asarray(info, dtype=np.uint8), int(initial_state),
                                g0, g1, spec.constraint_len)
    return out, int(state)


@njit(cache=True)
def _branch_outputs(g0, g1, k):
    ns = 1 << (k - 1)
    # outputs of the transition entering state `nxt` from predecessor with dropped bit x
    o0 = np.empty((ns, 2), dtype=np.int64)
    o1 = np.empty((ns, 2), dtype=np.int64)
    for nxt in range(ns):
        for x in range(2):
            reg = (nxt << 1) | x
            o0[nxt, x] = _parity(reg & g0)
            o1[nxt, x] = _parity(reg & g1)
    return o0, o1


@njit(cache=True)
def _acs_step(l0, l1, metric, new, hist, pos, o0, o1):
    """One add-compare-select step; decisions are written to ring slot pos."""
    ns = metric.size
    top = -np.inf
    for nxt in range(ns):
        p0 = (nxt << 1) & (ns - 1)
        m0 = metric[p0] + (l0 if o0[nxt, 0] == 0 else -l0) + (l1 if o1[nxt, 0] == 0 else -l1)
        m1 = metric[p0 | 1] + (l0 if o0[nxt, 1] == 0 else -l0) + (l1 if o1[nxt, 1] == 0 else -l1)
        if m1 > m0:
            new[nxt] = m1
            hist[pos, nxt] = 1
        else:
            new[nxt] = m0
            hist[pos, nxt] = 0
        if new[nxt] > top:
            top = new[nxt]
    for s in range(ns):
        metric[s] = new[s] - top


@njit(cache=True)
def _traceback(hist, last, state, steps, ns):
    """Walk back `steps` decisions from ring slot `last`; bits returned oldest first."""
    depth = hist.shape[0]
    out = np.empty(steps, dtype=np.uint8)
    shift = 0
    while (1 << shift) < ns:
        shift += 1
    pos = last
    for r in range(steps):
        out[steps - 1 - r] = state >> (shift - 1)
        x = hist[pos, state]
        state = ((state << 1) & (ns - 1)) | x
        pos = (pos - 1) % depth
    return out


@njit(cache=True)
def _stream_kernel(llrs, metric, hist, pos, filled, o0, o1, delay):
    ns = metric.size
    depth = hist.shape[0]
    shift = 0
    while (1 << shift) < ns:
        shift += 1
    n_steps = llrs.size // 2
    out = np.zeros(n_steps, dtype=np.uint8)
    new = np.empty(ns)
    for t in range(n_steps):
        _acs_step(llrs[2 * t], llrs[2 * t + 1], metric, new, hist, pos, o0, o1)
        pos = (pos + 1) % depth
        filled += 1
        if filled > delay:
            state = 0
            for s in range(1, ns):
                if metric[s] > metric[state]:
                    state = s
            p = (pos - 1) % depth
            for r in range(delay):
                state = ((state << 1) & (ns - 1)) | hist[p, state]
                p = p - 1 if p > 0 else depth - 1
            out[t] = state >> (shift - 1)
    return out, pos, filled


class StreamingViterbi:
    """Continuous-mode soft Viterbi decoder.

    Each call returns one decision per input pair, delayed by ``traceback``
    steps; the first ``traceback`` outputs of a fresh decoder are zeros.
    """

    def __init__(self, spec: ConvSpec = DEFAULT_SPEC, traceback: int = TRACEBACK_DEPTH):
        self.spec = spec
        self.traceback = traceback
        self._o0, self._o1 = _branch_outputs(spec.generators[0], spec.generators[1],
                                             spec.constraint_len)
        self.reset()

    def reset(self):
        ns = self.spec.n_states
        self.metric = np.full(ns, -1e300)
        self.metric[0] = 0.0
        self.hist = np.zeros((self.traceback + 1, ns), dtype=np.uint8)
        self.pos = 0
        self.filled = 0

    def decode(self, llrs) -> np.ndarray:
        llrs = np.asarray(llrs, dtype=np.float64)
        if llrs.size % 2:
            raise ValueError("LLR count must be even")
        out, self.pos, self.filled = _stream_kernel(llrs, self.metric, self.hist, self.pos,
                                                    self.filled, self._o0, self._o1,
                                                    self.traceback)
        return out

    def flush(self, state: int | None = None) -> np.ndarray:
        """Decisions for the last ``traceback`` steps, traced back from the best
        state (or from ``state`` when the stream was terminated)."""
        steps = min(self.traceback, self.filled)
        if steps == 0:
            return np.zeros(0, dtype=np.uint8)
        start = int(np.argmax(self.metric)) if state is None else state
        last = (self.pos - 1) % self.hist.shape[0]
        return _traceback(self.hist, last, start, steps, self.spec.n_states)


def viterbi_decode_soft(llrs, spec: ConvSpec = DEFAULT_SPEC,
                        traceback_depth: int = TRACEBACK_DEPTH) -> np.ndarray:
    """One-shot streaming decode: len(llrs)/2 outputs delayed by traceback_depth."""
    return StreamingViterbi(spec, traceback_depth).decode(llrs)


@njit(cache=True)
def _block_kernel(llrs, o0, o1, ns, end_state):
    n_steps = llrs.size // 2
    hist = np.zeros((n_steps, ns), dtype=np.uint8)
    metric = np.full(ns, -1e300)
    metric[0] = 0.0
    new = np.empty(ns)
    for t in range(n_steps):
        _acs_step(llrs[2 * t], llrs[2 * t + 1], metric, new, hist, t, o0, o1)
    if end_state < 0:
        end_state = 0
        for s in range(1, ns):
            if metric[s] > metric[end_state]:
                end_state = s
    return _traceback(hist, n_steps - 1, end_state, n_steps, ns)


def viterbi_decode_block(llrs, spec: ConvSpec = DEFAULT_SPEC, terminated: bool = True):
    """Full-traceback ML decode of a finite block (ends in state 0 if terminated)."""
    llrs = np.asarray(llrs, dtype=np.float64)
    o0, o1 = _branch_outputs(spec.generators[0], spec.generators[1], spec.constraint_len)
    return _block_kernel(llrs, o0, o1, spec.n_states, 0 if terminated else -1)
