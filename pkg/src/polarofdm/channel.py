"""Quasi-static multipath Rayleigh channels A-D and the ergodic Rayleigh IT channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ofdm import GUARD, N_SUBCARRIERS, SoftChannelOutput

N_TAPS = 15
MODELS = ("A", "B", "C", "D")


def tap_variances(model: str) -> np.ndarray:
    """Per-real-dimension tap variances, summing to 1/2."""
    n = np.arange(N_TAPS)
    if model == "A":
        v = np.exp(-n / 5.12)
        return 0.5 * v / v.sum()
    if model == "B":
        return np.full(N_TAPS, 1.0 / 30.0)
    if model == "C":
        v = np.zeros(N_TAPS)
        v[0], v[14] = 10.0 / 22.0, 1.0 / 22.0
        return v
    if model == "D":
        v = np.zeros(N_TAPS)
        v[0] = v[14] = 0.25
        return v
    raise ValueError(f"unknown channel model {model!r}")


@dataclass
class ChannelRealization:
    h: np.ndarray
    H: np.ndarray


def frequency_response(h, n_sub: int = N_SUBCARRIERS) -> np.ndarray:
    return np.fft.fft(h, n=n_sub, axis=-1)


def draw_taps(model: str, rng: np.random.Generator, size=()) -> np.ndarray:
    sd = np.sqrt(tap_variances(model))
    shape = tuple(np.atleast_1d(size)) + (N_TAPS,) if size != () else (N_TAPS,)
    return sd * rng.standard_normal(shape) + 1j * sd * rng.standard_normal(shape)


def draw_realization(model: str, rng: np.random.Generator,
                     n_sub: int = N_SUBCARRIERS) -> ChannelRealization:
    h = draw_taps(model, rng)
    return ChannelRealization(h, frequency_response(h, n_sub))


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    """Per-real-dimension frequency-domain noise std for Eb/N0 per information bit."""
    if np.isinf(ebn0_db) and ebn0_db > 0:
        return 0.0
    return float(np.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))))


def apply_channel(x_time, h, sigma_w: float, rng: np.random.Generator | None = None,
                  n_sub: int = N_SUBCARRIERS, noise=None) -> np.ndarray:
    """Linear convolution with h plus complex AWGN of per-dimension variance sigma_w^2 / N_S.

    x_time may hold a batch of streams along the leading axes; the output is
    truncated to the input length (the FIR tail spills past the last symbol).
    ``noise`` optionally supplies the standard-normal complex draws.
    """
    x_time = np.asarray(x_time, dtype=np.complex128)
    h = np.asarray(h)
    n = x_time.shape[-1]
    y = np.zeros_like(x_time)
    for k in range(h.shape[-1]):
        y[..., k:] += h[..., k:k + 1] * x_time[..., : n - k]
    if sigma_w > 0:
        if noise is None:
            noise = rng.standard_normal(x_time.shape) + 1j * rng.standard_normal(x_time.shape)
        y = y + (sigma_w / np.sqrt(n_sub)) * noise
    return y


def split_symbols(y, n_symbols: int, n_sub: int = N_SUBCARRIERS, n_guard: int = GUARD):
    return np.asarray(y).reshape(np.shape(y)[:-1] + (n_symbols, n_sub + n_guard))


def ergodic_rayleigh_outputs(bits, sigma_w: float, rng: np.random.Generator) -> SoftChannelOutput:
    """Each bit sees its own alpha ~ Rayleigh(E[alpha^2]=1): y = (2b-1) alpha + N(0, sigma_w^2)."""
    bits = np.asarray(bits)
    alpha = rng.rayleigh(scale=np.sqrt(0.5), size=bits.shape)
    noise = rng.standard_normal(bits.shape)
    y = (2.0 * bits - 1.0) * alpha + sigma_w * noise
    return SoftChannelOutput(y, alpha)


def subcarrier_correlation(model: str, taus, draws: int, rng: np.random.Generator,
                           n_sub: int = N_SUBCARRIERS, batch: int = 10000) -> np.ndarray:
    """Pearson correlation of |H[n]| and |H[(n + tau) mod N_S]|, pooled over n and draws."""
    taus = np.asarray(taus, dtype=int)
    s1 = np.zeros(taus.size)
    sxy = np.zeros(taus.size)
    sx = 0.0
    sxx = 0.0
    count = 0
    done = 0
    while done < draws:
        b = min(batch, draws - done)
        mag = np.abs(frequency_response(draw_taps(model, rng, b), n_sub))
        sx += mag.sum()
        sxx += np.sum(mag ** 2)
        count += mag.size
        for i, t in enumerate(taus):
            sxy[i] += np.sum(mag * np.roll(mag, -t, axis=-1))
        done += b
    mean = sx / count
    var = sxx / count - mean ** 2
    corr = (sxy / count - mean ** 2) / var
    corr[taus % n_sub == 0] = 1.0
    return corr
