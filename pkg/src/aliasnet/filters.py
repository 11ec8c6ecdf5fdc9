"""Binomial low-pass kernels, their spectra, and how they get applied."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .spectral import subsample

__all__ = [
    "Kernel",
    "binomial_taps",
    "binomial_kernel",
    "binomial_psd_closed_form",
    "tap_response",
    "outer2d",
    "convolve_same",
    "convolve2d_direct",
    "blur_subsample",
    "psd_sweep",
    "ideal_lowpass",
]


@dataclass(frozen=True)
class Kernel:
    """Fixed, symmetric 1-D filter taps; 2-D use is the outer product with itself."""

    taps: tuple[float, ...]
    normalized: bool = False

    def __post_init__(self):
        taps = tuple(float(t) for t in self.taps)
        object.__setattr__(self, "taps", taps)
        if len(taps) % 2 != 1:
            raise ValueError(f"kernel length must be odd, got {len(taps)}")
        if taps != taps[::-1]:
            raise ValueError("kernel taps must be symmetric")
        if self.normalized and abs(sum(taps) - 1.0) > 1e-12:
            raise ValueError("normalized kernel taps must sum to 1")

    @property
    def size(self) -> int:
        return len(self.taps)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.taps)

    def normalize(self) -> "Kernel":
        if self.normalized:
            return self
        total = sum(self.taps)
        return Kernel(tuple(t / total for t in self.taps), normalized=True)

    def separable2d(self) -> np.ndarray:
        return outer2d(self)


def binomial_taps(k: int) -> Kernel:
    """Raw binomial taps: row ``k-1`` of Pascal's triangle."""
    if int(k) != k or k < 3 or k % 2 == 0:
        raise ValueError(f"binomial kernel size must be odd and >= 3, got {k!r}")
    return Kernel(tuple(comb(k - 1, i) for i in range(k)))


def binomial_kernel(k: int) -> Kernel:
    """Binomial taps divided by ``2**(k-1)`` (unit DC gain)."""
    raw = binomial_taps(k)
    scale = 2.0 ** (k - 1)
    return Kernel(tuple(t / scale for t in raw.taps), normalized=True)


# Cosine series of the raw taps.  "printed" keeps two known transcription
# slips (cos(w) standing in for cos(2w) at k=5, cos(3w) missing its factor 2
# at k=7) so the discrepancy stays checkable; "corrected" is the true DTFT.
_CORRECTED_SERIES = {3: (2.0, 2.0), 5: (6.0, 8.0, 2.0), 7: (20.0, 30.0, 12.0, 2.0)}


def binomial_psd_closed_form(k: int, w, form: str = "corrected"):
    """Closed-form frequency response of the raw k-tap binomial filter at ``w``."""
    w = np.asarray(w, dtype=float)
    if form == "printed":
        if k == 3:
            return 2 + 2 * np.cos(w)
        if k == 5:
            return 6 + 8 * np.cos(w) + 2 * np.cos(w)
        if k == 7:
            return 20 + 30 * np.cos(w) + 12 * np.cos(2 * w) + np.cos(3 * w)
        raise ValueError(f"no closed form for k={k}")
    if form != "corrected":
        raise ValueError(f"unknown form {form!r}")
    try:
        coeffs = _CORRECTED_SERIES[k]
    except KeyError:
        raise ValueError(f"no closed form for k={k}") from None
    out = np.full_like(w, coeffs[0])
    for m, c in enumerate(coeffs[1:], start=1):
        out = out + c * np.cos(m * w)
    return out


def tap_response(kern, w) -> np.ndarray:
    """DTFT of centered taps, ``sum_n taps[n] exp(-1j*w*n)`` with n running from -(k-1)/2."""
    taps = np.asarray(getattr(kern, "taps", kern), dtype=float)
    half = len(taps) // 2
    n = np.arange(len(taps)) - half
    w = np.asarray(w, dtype=float)
    return np.exp(-1j * np.multiply.outer(w, n)) @ taps


def outer2d(kern: Kernel) -> np.ndarray:
    t = kern.array
    return np.outer(t, t)


def _pad(x: np.ndarray, pad: int, axis: int, padding: str) -> np.ndarray:
    widths = [(0, 0)] * x.ndim
    widths[axis] = (pad, pad)
    if padding == "reflect":
        return np.pad(x, widths, mode="reflect")
    if padding == "zero":
        return np.pad(x, widths, mode="constant")
    raise ValueError(f"unknown padding {padding!r}")


def _correlate_axis(x: np.ndarray, taps: np.ndarray, axis: int, padding: str) -> np.ndarray:
    n = x.shape[axis]
    half = len(taps) // 2
    xp = np.moveaxis(_pad(x, half, axis, padding), axis, -1)
    out = np.zeros(xp.shape[:-1] + (n,))
    for j, t in enumerate(taps):
        out += t * xp[..., j : j + n]
    return np.moveaxis(out, -1, axis)


def convolve_same(x, kern, padding: str = "reflect") -> np.ndarray:
    """Same-size filtering with a symmetric kernel.

    A 1-D input is filtered along its only axis.  Higher-rank inputs are
    filtered separably along the last two axes (rows, then columns).
    """
    taps = np.asarray(getattr(kern, "taps", kern), dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return _correlate_axis(x, taps, -1, padding)
    return _correlate_axis(_correlate_axis(x, taps, -1, padding), taps, -2, padding)


def convolve2d_direct(x, taps2d, padding: str = "reflect") -> np.ndarray:
    """Non-separable same-size 2-D filtering over the last two axes (test oracle)."""
    x = np.asarray(x, dtype=float)
    taps2d = np.asarray(taps2d, dtype=float)
    kh, kw = taps2d.shape
    ph, pw = kh // 2, kw // 2
    xp = _pad(_pad(x, ph, -2, padding), pw, -1, padding)
    h, w = x.shape[-2:]
    out = np.zeros(x.shape)
    for i in range(kh):
        for j in range(kw):
            out += taps2d[i, j] * xp[..., i : i + h, j : j + w]
    return out


def blur_subsample(x, kern: Kernel, stride: int, padding: str = "reflect") -> np.ndarray:
    """Fixed anti-aliasing downsampler: normalized blur, then keep every stride-th sample."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return subsample(convolve_same(x, kern.normalize(), padding), stride)


def ideal_lowpass(w, stride: int = 2) -> np.ndarray:
    """Brick-wall reference response with cutoff pi/stride."""
    w = np.abs(np.asarray(w, dtype=float))
    return (w <= np.pi / stride).astype(float)


def psd_sweep(ks: Sequence[int], samples: int, stride: int = 2) -> list[tuple[str, float, float]]:
    """Normalized magnitude response of each binomial size on ``samples`` points of [0, pi].

    Rows are ``(series, w, magnitude)``; the ideal stride low-pass is appended
    as its own series for reference.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    w = np.linspace(0.0, np.pi, samples)
    rows: list[tuple[str, float, float]] = []
    for k in ks:
        mag = np.abs(tap_response(binomial_kernel(k), w))
        rows.extend((f"k{k}", float(wi), float(m)) for wi, m in zip(w, mag))
    ideal = ideal_lowpass(w, stride)
    rows.extend((f"ideal_stride{stride}", float(wi), float(m)) for wi, m in zip(w, ideal))
    return rows
