"""QPSK-OFDM modulation, zero-forcing equalization and per-bit LLRs.

Transforms use asymmetric scaling: 1/N_S on the inverse DFT, none on the
forward DFT, so that Y[k] = H[k] X[k] + W[k] with H[k] the unscaled DFT of h.
Functions accept a leading batch axis where it is natural to do so.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_SUBCARRIERS = 256
GUARD = 15
# below this |H[k]| a subcarrier is treated as erased
ERASURE_EPS = 1e-12


@dataclass
class SoftChannelOutput:
    d_hat: np.ndarray
    h_mag: np.ndarray

    def __post_init__(self):
        if self.d_hat.shape != self.h_mag.shape:
            raise ValueError("d_hat and h_mag must have equal shapes")


def qpsk_map(bits) -> np.ndarray:
    """(b0, b1) -> (2 b0 - 1) + j (2 b1 - 1), along the last axis."""
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise ValueError("QPSK needs an even number of bits")
    b = bits.astype(np.float64)
    return (2.0 * b[..., 0::2] - 1.0) + 1j * (2.0 * b[..., 1::2] - 1.0)


def ofdm_modulate(X, n_guard: int = GUARD) -> np.ndarray:
    """IDFT with 1/N_S scaling, then the last n_guard samples prepended."""
    x = np.fft.ifft(np.asarray(X, dtype=np.complex128), axis=-1)
    if n_guard == 0:
        return x
    return np.concatenate([x[..., -n_guard:], x], axis=-1)


def ofdm_demodulate(y, n_guard: int = GUARD) -> np.ndarray:
    """Drop the prefix and take the unscaled forward DFT."""
    return np.fft.fft(np.asarray(y)[..., n_guard:], axis=-1)


def zf_equalize(Y, H) -> np.ndarray:
    """Z'[k] = Y[k] |H[k]| / H[k]; erased subcarriers give 0."""
    H = np.asarray(H)
    mag = np.abs(H)
    ok = mag >= ERASURE_EPS
    rot = np.where(ok, mag / np.where(ok, H, 1.0), 0.0)
    return np.asarray(Y) * rot


def soft_demod(zprime, H) -> SoftChannelOutput:
    """Split Z' into per-bit soft values with the matching |H|.

    zprime and H may carry several OFDM symbols along the second-to-last axis
    (shape (..., n_symbols, N_S)); bits of symbol s occupy the block slice
    [2 N_S s, 2 N_S (s + 1)).
    """
    zprime = np.asarray(zprime)
    mag = np.abs(np.broadcast_to(H, zprime.shape))
    mag = np.where(mag >= ERASURE_EPS, mag, 0.0)
    d = np.empty(zprime.shape[:-1] + (2 * zprime.shape[-1],))
    d[..., 0::2] = zprime.real
    d[..., 1::2] = zprime.imag
    h = np.repeat(mag, 2, axis=-1)
    if zprime.ndim >= 2:
        shape = zprime.shape[:-2] + (-1,)
        d = d.reshape(shape)
        h = h.reshape(shape)
    return SoftChannelOutput(d, h)


def llr_from_soft(out: SoftChannelOutput, sigma_w: float) -> np.ndarray:
    """L = -2 y alpha / sigma_w^2; positive favours bit 0."""
    return -2.0 * out.d_hat * out.h_mag / sigma_w ** 2
