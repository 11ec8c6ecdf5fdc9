"""Pointwise nonlinearities and the harmonics they add to a pure tone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .spectral import dft1d

KINDS = ("relu", "gelu", "swish")

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Activation:
    kind: str = "relu"
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation {self.kind!r}; expected one of {KINDS}")

    def __call__(self, x):
        return apply(self, x)


def _as_activation(a) -> Activation:
    return a if isinstance(a, Activation) else Activation(a)


def apply(a, x) -> np.ndarray:
    """relu = max(0, x); gelu = x * Phi(x) with the exact normal CDF; swish = x * sigmoid(beta x)."""
    a = _as_activation(a)
    x = np.asarray(x, dtype=float)
    if a.kind == "relu":
        return np.maximum(x, 0.0)
    if a.kind == "gelu":
        return x * ndtr(x)
    return x * expit(a.beta * x)


def derivative(a, x) -> np.ndarray:
    # relu'(0) is taken as 0
    a = _as_activation(a)
    x = np.asarray(x, dtype=float)
    if a.kind == "relu":
        return (x > 0).astype(float)
    if a.kind == "gelu":
        return ndtr(x) + x * np.exp(-0.5 * x * x) / _SQRT_2PI
    s = expit(a.beta * x)
    return s + a.beta * x * s * (1.0 - s)


@dataclass(frozen=True)
class HarmonicProfile:
    """Power of an activated sinusoid at each harmonic of its fundamental."""

    activation: str
    freq: float
    n: int
    harmonics: np.ndarray
    power: np.ndarray

    def tail_power(self, start: int) -> float:
        return float(self.power[self.harmonics >= start].sum())

    def rows(self):
        return [(self.activation, int(m), float(p)) for m, p in zip(self.harmonics, self.power)]


def spectral_leakage(
    a,
    freq: float = 4 / 256,
    n: int = 256,
    amplitude: float = 1.0,
    offset: float = 0.0,
    n_harmonics: int | None = None,
) -> HarmonicProfile:
    """Apply ``a`` to ``offset + amplitude*sin(2*pi*freq*t)`` and read off harmonic powers.

    The tone must complete a whole number of cycles over ``n`` samples so
    every harmonic lands exactly on a DFT bin.  Harmonic ``m`` sits at
    ``m*freq`` folded into [0, 0.5]; power is ``|X|^2 / n^2``.
    """
    a = _as_activation(a)
    if not 0 < freq < 0.5:
        raise ValueError("freq must lie strictly between 0 and 0.5 cycles/sample")
    cycles = freq * n
    if abs(cycles - round(cycles)) > 1e-9:
        raise ValueError(f"freq*n = {cycles} is not an integer (non-coherent sampling)")
    cycles = int(round(cycles))
    if n_harmonics is None:
        n_harmonics = n // (2 * cycles)
    t = np.arange(n)
    x = offset + amplitude * np.sin(2 * np.pi * cycles * t / n)
    power = np.abs(dft1d(apply(a, x))) ** 2 / n**2
    m = np.arange(n_harmonics + 1)
    bins = (m * cycles) % n
    bins = np.minimum(bins, n - bins)
    return HarmonicProfile(a.kind, cycles / n, n, m, power[bins])


def decay_exponent(profile: HarmonicProfile, m_range=(3, 8), floor: float = 1e-20) -> float:
    """Slope of log power against log harmonic index over ``m_range``.

    Harmonics that are zero by symmetry (below ``floor`` times the peak power)
    are left out of the fit.  More negative means faster decay.
    """
    lo, hi = m_range
    sel = (profile.harmonics >= lo) & (profile.harmonics <= hi)
    sel &= profile.power > floor * profile.power.max()
    if sel.sum() < 2:
        raise ValueError("fewer than two usable harmonics in the fitting range")
    slope, _ = np.polyfit(np.log(profile.harmonics[sel]), np.log(profile.power[sel]), 1)
    return float(slope)
