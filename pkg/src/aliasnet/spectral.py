"""Discrete Fourier primitives and the subsampling/folding simulator.

Transforms operate on the last axis (1-D) or the last two axes (2-D), so a
batch of images ``(B, C, H, W)`` can be pushed through in one call.  Spectra
are kept in the natural DFT order (DC first) unless a function says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Spectrum",
    "dft_direct",
    "fft_radix2",
    "dft1d",
    "idft1d",
    "dft2d",
    "idft2d",
    "psd",
    "subsample",
    "fold_spectrum",
    "fold_spectrum2d",
    "signed_frequencies",
    "aliasing_energy",
    "radial_band_index",
    "notch_filter",
]


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def dft_direct(x, inverse: bool = False) -> np.ndarray:
    """O(N^2) DFT along the last axis.

    Used as the reference oracle and for lengths that are not a power of two.
    The phase index ``k*n`` is reduced mod N before taking the exponential to
    keep the twiddles accurate for larger N.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("length must be >= 1")
    idx = np.arange(n)
    kn = np.outer(idx, idx) % n
    sign = 1.0 if inverse else -1.0
    mat = np.exp(sign * 2j * np.pi * kn / n)
    out = x @ mat.T
    return out / n if inverse else out


def fft_radix2(x, inverse: bool = False) -> np.ndarray:
    """Iterative decimation-in-time radix-2 FFT along the last axis."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise ValueError(f"radix-2 FFT needs a power-of-two length, got {n}")
    levels = n.bit_length() - 1
    # bit-reversal permutation
    rev = np.zeros(n, dtype=np.intp)
    for b in range(levels):
        rev |= ((np.arange(n) >> b) & 1) << (levels - 1 - b)
    out = x[..., rev]
    lead = out.shape[:-1]
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        blocks = out.reshape(*lead, n // m, m)
        even = blocks[..., :half]
        odd = blocks[..., half:] * tw
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        m *= 2
    return out / n if inverse else out


def _transform(x, inverse: bool) -> np.ndarray:
    x = np.asarray(x)
    _check_finite(x)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ValueError("signal must have at least one sample")
    if _is_pow2(x.shape[-1]):
        return fft_radix2(x, inverse=inverse)
    return dft_direct(x, inverse=inverse)


def dft1d(x) -> np.ndarray:
    """Forward DFT ``X[k] = sum_n x[n] exp(-2j*pi*k*n/N)`` along the last axis."""
    return _transform(x, inverse=False)


def idft1d(spec) -> np.ndarray:
    """Inverse of :func:`dft1d` (includes the 1/N factor)."""
    return _transform(spec, inverse=True)


def dft2d(img) -> np.ndarray:
    """Row-column 2-D DFT over the last two axes."""
    rows = dft1d(img)
    return np.swapaxes(dft1d(np.swapaxes(rows, -1, -2)), -1, -2)


def idft2d(spec) -> np.ndarray:
    rows = idft1d(spec)
    return np.swapaxes(idft1d(np.swapaxes(rows, -1, -2)), -1, -2)


@dataclass(frozen=True)
class Spectrum:
    """DFT coefficients plus the origin convention they are stored in."""

    coefficients: np.ndarray
    centered: bool = False

    @classmethod
    def of(cls, signal) -> "Spectrum":
        return cls(dft1d(signal))

    @property
    def n(self) -> int:
        return self.coefficients.shape[-1]

    def magnitude(self) -> np.ndarray:
        return np.abs(self.coefficients)

    def psd(self) -> np.ndarray:
        return self.magnitude()

    def frequencies(self) -> np.ndarray:
        """Angular frequency of each stored bin, in radians/sample."""
        w = 2 * np.pi * signed_frequencies(self.n)
        return np.roll(w, self.n // 2) if self.centered else w

    def to_centered(self) -> "Spectrum":
        if self.centered:
            return self
        return Spectrum(np.roll(self.coefficients, self.n // 2, axis=-1), True)

    def to_dc_first(self) -> "Spectrum":
        if not self.centered:
            return self
        return Spectrum(np.roll(self.coefficients, -(self.n // 2), axis=-1), False)

    def inverse(self) -> np.ndarray:
        return idft1d(self.to_dc_first().coefficients)


def psd(spec) -> np.ndarray:
    """Elementwise magnitude of a spectrum, used here as the power spectral density."""
    if isinstance(spec, Spectrum):
        return spec.psd()
    return np.abs(np.asarray(spec))


def subsample(x, stride: int) -> np.ndarray:
    """Keep samples 0, stride, 2*stride, ... along the last axis (1-D) or last two axes."""
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    x = np.asarray(x)
    if x.ndim == 1:
        return x[::stride]
    return x[..., ::stride, ::stride]


def fold_spectrum(spec, stride: int, axis: int = -1) -> np.ndarray:
    """Predicted spectrum of ``subsample(signal, stride)`` from the signal's spectrum.

    ``out[k] = (1/stride) * sum_r spec[k + r*N/stride]``: the stride shifted
    copies of the spectrum are averaged, which is exactly where aliasing
    corruption comes from.
    """
    if isinstance(spec, Spectrum):
        spec = spec.to_dc_first().coefficients
    spec = np.moveaxis(np.asarray(spec, dtype=np.complex128), axis, -1)
    n = spec.shape[-1]
    if stride < 1 or n % stride:
        raise ValueError(f"length {n} is not divisible by stride {stride}")
    m = n // stride
    folded = spec.reshape(*spec.shape[:-1], stride, m).mean(axis=-2)
    return np.moveaxis(folded, -1, axis)


def fold_spectrum2d(spec, stride: int) -> np.ndarray:
    return fold_spectrum(fold_spectrum(spec, stride, axis=-1), stride, axis=-2)


def signed_frequencies(n: int) -> np.ndarray:
    """Frequency of each DC-first bin in cycles/sample, mapped into [-0.5, 0.5)."""
    k = np.arange(n)
    k = np.where(k >= (n + 1) // 2, k - n, k)
    return k / n


def _above_nyquist(n: int, stride: int) -> np.ndarray:
    # |k|/n > 1/(2*stride), compared in integers
    k = np.abs(np.rint(signed_frequencies(n) * n).astype(int))
    return 2 * stride * k > n


def _circular_prefilter(x: np.ndarray, taps: np.ndarray, ndim: int) -> np.ndarray:
    taps = np.asarray(taps, dtype=float)
    half = len(taps) // 2

    def response(n):
        h = np.zeros(n)
        for j, t in enumerate(taps):
            h[(j - half) % n] += t
        return dft1d(h)

    if ndim == 1:
        return idft1d(dft1d(x) * response(x.shape[-1])).real
    hy = response(x.shape[-2])[:, None]
    hx = response(x.shape[-1])[None, :]
    return idft2d(dft2d(x) * (hy * hx)).real


def aliasing_energy(x, stride: int, prefilter=None) -> float:
    """Energy above pi/stride, i.e. the part a stride subsampling would fold, over total input energy.

    1-D inputs use the last axis; anything with two or more dimensions is
    treated as a stack of images over the last two axes, with both axes
    subsampled.  ``prefilter`` (a Kernel or tap sequence, rescaled to unit DC
    gain) is applied by circular convolution before measuring; the
    denominator stays the unfiltered energy, so filtering can only lower the
    value.  A zero-energy input returns 0.
    """
    if stride < 2:
        raise ValueError("aliasing is only defined for stride >= 2")
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    ndim = 1 if x.ndim == 1 else 2
    spec = dft1d(x) if ndim == 1 else dft2d(x)
    total = float(np.sum(np.abs(spec) ** 2))
    if total == 0:
        return 0.0
    if prefilter is not None:
        taps = np.asarray(getattr(prefilter, "taps", prefilter), dtype=float)
        xf = _circular_prefilter(x, taps / taps.sum(), ndim)
        spec = dft1d(xf) if ndim == 1 else dft2d(xf)
    power = np.abs(spec) ** 2
    if ndim == 1:
        mask = _above_nyquist(x.shape[-1], stride)
    else:
        my = _above_nyquist(x.shape[-2], stride)[:, None]
        mx = _above_nyquist(x.shape[-1], stride)[None, :]
        mask = my | mx
    return float(power[..., mask].sum() / total)


R_MAX = 0.5 * np.sqrt(2.0)


def radial_band_index(h: int, w: int, n_bands: int) -> np.ndarray:
    """Band label of every DC-first 2-D bin for equal-width radial bands on [0, r_max]."""
    fy = signed_frequencies(h)[:, None]
    fx = signed_frequencies(w)[None, :]
    r = np.sqrt(fy**2 + fx**2)
    idx = np.floor(r / (R_MAX / n_bands)).astype(int)
    return np.clip(idx, 0, n_bands - 1)


def notch_filter(img, band_index: int, n_bands: int = 16) -> np.ndarray:
    """Zero one radial frequency band of an image (or stack of images)."""
    if n_bands < 1 or not 0 <= band_index < n_bands:
        raise ValueError(f"band index {band_index} outside [0, {n_bands})")
    img = np.asarray(img, dtype=float)
    if img.ndim < 2:
        raise ValueError("notch_filter needs at least a 2-D image")
    keep = radial_band_index(img.shape[-2], img.shape[-1], n_bands) != band_index
    return idft2d(dft2d(img) * keep).real
