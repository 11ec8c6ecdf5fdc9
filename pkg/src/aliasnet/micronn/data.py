"""Procedural 10-class grayscale image datasets."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..spectral import R_MAX, signed_frequencies

N_CLASSES = 10
KINDS = ("textures", "shapes")

# textures: class c lives in radial band c + 1 of a 16-band partition
TEXTURE_BANDS = 16
TEXTURE_BAND_OFFSET = 1
TEXTURE_AMPLITUDE = (0.12, 0.3)
TEXTURE_NOISE = 0.3
TEXTURE_EDGE_MARGIN = 0.15


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (n, 1, size, size)
    labels: np.ndarray  # (n,)
    kind: str
    seed: int

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.images[idx], self.labels[idx], self.kind, self.seed)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.images, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        return h.hexdigest()


def _balanced_labels(n: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.arange(n) % N_CLASSES
    rng.shuffle(labels)
    return labels


def texture_frequencies(size: int, cls: int) -> np.ndarray:
    """Integer frequency vectors ``(fy, fx)`` (cycles per image) eligible for a texture class.

    Vectors sit inside the class's radial band, away from its edges, and off
    the Nyquist row and column.  Only one of each ``+-`` pair is listed.
    """
    band_width = R_MAX / TEXTURE_BANDS
    band = cls + TEXTURE_BAND_OFFSET
    f = np.rint(signed_frequencies(size) * size).astype(int)
    fy, fx = np.meshgrid(f, f, indexing="ij")
    pos = np.hypot(fy, fx) / size / band_width - band
    ok = (pos >= TEXTURE_EDGE_MARGIN) & (pos <= 1 - TEXTURE_EDGE_MARGIN)
    ok &= (np.abs(fy) < size // 2) & (np.abs(fx) < size // 2)
    ok &= (fy > 0) | ((fy == 0) & (fx > 0))
    return np.stack([fy[ok], fx[ok]], axis=1)


def texture_class_frequency(cls: int) -> float:
    """Centre radius (cycles/pixel) of the band a texture class is drawn from."""
    return (cls + TEXTURE_BAND_OFFSET + 0.5) * R_MAX / TEXTURE_BANDS


def _textures(labels, size, rng):
    n = len(labels)
    yy, xx = np.mgrid[0:size, 0:size]
    table = [texture_frequencies(size, c) for c in range(N_CLASSES)]
    images = np.empty((n, 1, size, size))
    for i, c in enumerate(labels):
        fy, fx = table[c][rng.integers(len(table[c]))]
        amp = rng.uniform(*TEXTURE_AMPLITUDE)
        phase = rng.uniform(0, 2 * np.pi)
        grating = amp * np.cos(2 * np.pi * (fy * yy + fx * xx) / size + phase)
        images[i, 0] = 0.5 + grating + rng.normal(0.0, TEXTURE_NOISE * amp, size=(size, size))
    return images


def _polygon_mask(px, py, verts):
    inside = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        cross = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (x1 - x0) * (py - y0) / (y1 - y0) + x0
        inside ^= cross & (px < xint)
    return inside


def _regular(n_sides, r, rot):
    a = rot + 2 * np.pi * np.arange(n_sides) / n_sides
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)


def _star(r, rot):
    a = rot + np.pi * np.arange(10) / 5
    rad = np.where(np.arange(10) % 2 == 0, r, 0.45 * r)
    return np.stack([rad * np.cos(a), rad * np.sin(a)], axis=1)


def _shape_mask(cls, px, py, r, rot):
    if cls == 0:
        return px**2 + py**2 <= r**2
    if cls == 1:
        d = np.hypot(px, py)
        return (d <= r) & (d >= 0.6 * r)
    if cls in (2, 3, 4, 5):
        return _polygon_mask(px, py, _regular({2: 3, 3: 4, 4: 5, 5: 6}[cls], r, rot))
    if cls == 6:
        return _polygon_mask(px, py, _star(r, rot))
    c, s = np.cos(rot), np.sin(rot)
    u, v = c * px + s * py, -s * px + c * py
    if cls == 7:
        return ((np.abs(u) <= r) & (np.abs(v) <= 0.3 * r)) | ((np.abs(v) <= r) & (np.abs(u) <= 0.3 * r))
    if cls == 8:
        return (u / r) ** 2 + (v / (0.5 * r)) ** 2 <= 1
    return (np.abs(u) <= r) & (np.abs(v) <= 0.25 * r)


def _shapes(labels, size, rng, supersample=4):
    n = len(labels)
    fine = (np.arange(size * supersample) + 0.5) / supersample
    gy, gx = np.meshgrid(fine, fine, indexing="ij")
    images = np.empty((n, 1, size, size))
    for i, c in enumerate(labels):
        r = rng.uniform(0.22, 0.38) * size
        cx, cy = rng.uniform(r, size - r, size=2)
        rot = rng.uniform(0, 2 * np.pi)
        fg, bg = rng.uniform(0.55, 1.0), rng.uniform(0.0, 0.45)
        mask = _shape_mask(c, gx - cx, gy - cy, r, rot).astype(float)
        cover = mask.reshape(size, supersample, size, supersample).mean(axis=(1, 3))
        images[i, 0] = bg + (fg - bg) * cover + rng.normal(0.0, 0.05, size=(size, size))
    return images


def make_dataset(kind: str = "textures", n: int = 1000, size: int = 32, seed: int = 0) -> Dataset:
    """Labelled grayscale images, exactly balanced when 10 divides n, reproducible by seed.

    ``textures`` are oriented sinusoidal gratings whose radial frequency band
    encodes the class; ``shapes`` are discs, polygons and bars at random pose.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind not in KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(n, rng)
    images = _textures(labels, size, rng) if kind == "textures" else _shapes(labels, size, rng)
    return Dataset(images, labels, kind, seed)


def train_test_split(kind: str, n_train: int, n_test: int, size: int = 32, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Independent train and test draws; the test draw uses a seed derived from ``seed``."""
    return make_dataset(kind, n_train, size, seed), make_dataset(kind, n_test, size, seed + 10_000)
