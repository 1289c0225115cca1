"""Channel-bit interleavers over one 1024-bit codeword.

A permutation ``perm`` acts as ``interleaved = block[perm]`` at the
transmitter; the receiver undoes it on both soft values and fading magnitudes.
"""

from __future__ import annotations

import re

import numpy as np

from .ofdm import SoftChannelOutput

BLOCK_BITS = 1024
KINDS = ("random", "block_symbol_32x16", "block_bit_32x32", "reverse_shuffle", "none")


def shuffle(n: int) -> np.ndarray:
    """(0, n/2, 1, n/2 + 1, ..., n/2 - 1, n - 1)."""
    h = n // 2
    out = np.empty(n, dtype=np.int64)
    out[0::2] = np.arange(h)
    out[1::2] = np.arange(h, n)
    return out


def inverse(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def block_permutation(rows: int, cols: int, cell: int, n: int = BLOCK_BITS) -> np.ndarray:
    """Cells of `cell` consecutive bits written column-major, read row-major."""
    if rows * cols * cell != n:
        raise ValueError(f"{rows}x{cols} array of {cell}-bit cells does not hold {n} bits")
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    cells = (c * rows + r).ravel()
    return (cells[:, None] * cell + np.arange(cell)[None, :]).ravel()


def make_interleaver(kind: str, rng: np.random.Generator | None = None,
                     n: int = BLOCK_BITS) -> np.ndarray:
    if kind == "none":
        return np.arange(n)
    if kind == "random":
        if rng is None:
            raise ValueError("random interleaver needs an rng")
        return rng.permutation(n)
    if kind == "reverse_shuffle":
        return inverse(shuffle(n))
    m = re.fullmatch(r"block_(symbol|bit)_(\d+)x(\d+)", kind)
    if m:
        cell = 2 if m.group(1) == "symbol" else 1
        return block_permutation(int(m.group(2)), int(m.group(3)), cell, n)
    raise ValueError(f"unknown interleaver {kind!r}")


def apply(perm, block) -> np.ndarray:
    return np.asarray(block)[..., perm]


def deinterleave(perm, data) -> np.ndarray:
    data = np.asarray(data)
    out = np.empty_like(data)
    out[..., perm] = data
    return out


def invert(perm, soft: SoftChannelOutput) -> SoftChannelOutput:
    return SoftChannelOutput(deinterleave(perm, soft.d_hat), deinterleave(perm, soft.h_mag))
