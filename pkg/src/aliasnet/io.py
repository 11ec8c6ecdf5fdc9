"""CSV readers and writers for images, spectra, kernels and datasets."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .filters import Kernel


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_image(path, img) -> Path:
    """One CSV row per image row, preceded by a ``# shape: HxW`` comment."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# shape: {img.shape[0]}x{img.shape[1]}\n")
        w = csv.writer(fh, lineterminator="\n")
        for row in img:
            w.writerow([repr(float(v)) for v in row])
    return path


def read_image(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    shape = None
    if lines and lines[0].startswith("# shape:"):
        h, w = lines[0].split(":", 1)[1].strip().split("x")
        shape = (int(h), int(w))
        lines = lines[1:]
    img = np.array([[float(v) for v in ln.split(",")] for ln in lines if ln.strip()])
    if shape is not None and img.shape != shape:
        raise ValueError(f"{path}: header says {shape}, data is {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError(f"{path}: non-finite pixel values")
    return img


def write_spectrum(path, coefficients) -> Path:
    c = np.asarray(coefficients, dtype=complex).ravel()
    return write_csv(path, ["bin", "re", "im", "magnitude"], ((k, z.real, z.imag, abs(z)) for k, z in enumerate(c)))


def read_spectrum(path) -> np.ndarray:
    _, rows = read_csv(path)
    return np.array([complex(float(r[1]), float(r[2])) for r in rows])


def write_kernel(path, kern: Kernel) -> Path:
    return write_csv(path, ["index", "tap"], enumerate(kern.taps))


def read_kernel(path) -> Kernel:
    _, rows = read_csv(path)
    return Kernel(tuple(float(r[1]) for r in rows))


def write_dataset(directory, data) -> tuple[Path, Path]:
    """``images.csv`` (one flattened image per row) and ``labels.csv``."""
    directory = Path(directory)
    n, c, h, w = data.images.shape
    img_path = write_csv(directory / "images.csv", [f"p{i}" for i in range(c * h * w)], data.images.reshape(n, -1))
    lab_path = write_csv(directory / "labels.csv", ["label"], ([int(v)] for v in data.labels))
    return img_path, lab_path


def read_dataset(directory, size: int, kind: str = "cached", seed: int = -1):
    from .micronn.data import Dataset

    directory = Path(directory)
    _, rows = read_csv(directory / "images.csv")
    images = np.array(rows, dtype=float)
    _, lrows = read_csv(directory / "labels.csv")
    labels = np.array([int(r[0]) for r in lrows])
    if len(images) != len(labels):
        raise ValueError("image and label counts differ")
    return Dataset(images.reshape(len(images), -1, size, size), labels, kind, seed)
