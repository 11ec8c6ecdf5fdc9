"""Robustness harnesses: notch-band removal, synthetic corruptions (CE/mCE), shift consistency."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
from scipy import ndimage

from .micronn import checkpoint, ops
from .micronn.data import Dataset
from .micronn.model import Model
from .spectral import aliasing_energy, dft2d, idft2d, radial_band_index

# severity 1..5 parameter tables; each row is monotone in strength
SEVERITY_TABLES = {
    "gaussian_noise": (0.08, 0.12, 0.18, 0.26, 0.38),  # noise std
    "defocus_blur": (1.0, 1.5, 2.0, 2.5, 3.0),  # disc radius, pixels
    "contrast": (0.4, 0.3, 0.2, 0.1, 0.05),  # contrast factor
    "pixelate": (1.5, 2.0, 2.5, 3.0, 4.0),  # downsampling factor
    "quantize": (5, 4, 3, 2, 1),  # bits per pixel
}
CORRUPTIONS = tuple(SEVERITY_TABLES)

REFERENCE_CHECKPOINT = "baseline_textures_seed7"


def load_reference(name: str = REFERENCE_CHECKPOINT) -> Model:
    """A bundled checkpoint; the default baseline micro-ResNet normalizes corruption errors."""
    path = resources.files("aliasnet") / "reference" / f"{name}.json"
    with resources.as_file(path) as p:
        model, _ = checkpoint.load(p)
    return model


@dataclass(frozen=True)
class Corruption:
    kind: str
    severity: int

    def __post_init__(self):
        if self.kind not in SEVERITY_TABLES:
            raise ValueError(f"unknown corruption {self.kind!r}; expected one of {CORRUPTIONS}")
        if not 1 <= self.severity <= 5:
            raise ValueError(f"severity must be in 1..5, got {self.severity}")

    @property
    def parameter(self):
        return SEVERITY_TABLES[self.kind][self.severity - 1]


def _disc(radius: float) -> np.ndarray:
    r = int(np.ceil(radius))
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    k = (yy**2 + xx**2 <= radius**2).astype(float)
    return k / k.sum()


def pixelate_indices(size: int, factor: float) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbour sample positions for downsampling, and the map back up."""
    m = max(1, int(round(size / factor)))
    down = np.floor(np.arange(m) * size / m).astype(int)
    up = np.floor(np.arange(size) * m / size).astype(int)
    return down, up


def pixelate_downsample(img, factor: float) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    dy, _ = pixelate_indices(img.shape[-2], factor)
    dx, _ = pixelate_indices(img.shape[-1], factor)
    return img[..., dy, :][..., dx]


def corrupt(img, c: Corruption, seed: int = 0) -> np.ndarray:
    """Apply one corruption to an image or a stack of images (last two axes are spatial)."""
    img = np.asarray(img, dtype=float)
    p = c.parameter
    if c.kind == "gaussian_noise":
        return img + np.random.default_rng(seed).normal(0.0, p, size=img.shape)
    if c.kind == "defocus_blur":
        k = _disc(p).reshape((1,) * (img.ndim - 2) + _disc(p).shape)
        return ndimage.convolve(img, k, mode="mirror")
    if c.kind == "contrast":
        mean = img.mean(axis=(-2, -1), keepdims=True)
        return (img - mean) * p + mean
    if c.kind == "pixelate":
        small = pixelate_downsample(img, p)
        _, uy = pixelate_indices(img.shape[-2], p)
        _, ux = pixelate_indices(img.shape[-1], p)
        return small[..., uy, :][..., ux]
    levels = 2**p - 1
    return np.round(np.clip(img, 0.0, 1.0) * levels) / levels


def corruption_error(err_model, err_ref) -> float:
    """Summed per-severity error of a model over the same sum for the reference model."""
    err_model = np.asarray(err_model, dtype=float)
    err_ref = np.asarray(err_ref, dtype=float)
    if err_model.shape != err_ref.shape:
        raise ValueError("model and reference need errors for the same severities")
    denom = err_ref.sum()
    if denom <= 0:
        raise ValueError("reference error sum is zero; CE is undefined")
    return float(err_model.sum() / denom)


def mce(ces) -> float:
    ces = list(ces.values()) if isinstance(ces, dict) else list(ces)
    if not ces:
        raise ValueError("no corruption errors to average")
    return float(np.mean(ces))


def _accuracy(model: Model, images, labels) -> float:
    return float((model.predict(images).argmax(axis=1) == labels).mean())


def corruption_errors(model: Model, data: Dataset, seed: int = 0, kinds=CORRUPTIONS) -> dict[str, list[float]]:
    """Top-1 error for every (corruption, severity) pair; noise draws are seeded per severity."""
    out = {}
    for kind in kinds:
        errs = []
        for s in range(1, 6):
            x = corrupt(data.images, Corruption(kind, s), seed=seed * 100 + s)
            errs.append(1.0 - _accuracy(model, x, data.labels))
        out[kind] = errs
    return out


def notch_images(images, n_bands: int = 16):
    """Yield ``(band, filtered_images)`` for every band, sharing one forward transform."""
    spec = dft2d(images)
    bands = radial_band_index(images.shape[-2], images.shape[-1], n_bands)
    for b in range(n_bands):
        yield b, idft2d(spec * (bands != b)).real


def notch_eval(model: Model, data: Dataset, n_bands: int = 16, baseline=None) -> dict:
    """Accuracy with each radial band removed at inference time.

    ``baseline`` may be another model or a precomputed per-band accuracy
    sequence; when given, per-band differences (model minus baseline) are
    included.
    """
    acc = np.array([_accuracy(model, x, data.labels) for _, x in notch_images(data.images, n_bands)])
    out = {"accuracy": acc.tolist()}
    if baseline is not None:
        if isinstance(baseline, Model):
            base = np.array(notch_eval(baseline, data, n_bands)["accuracy"])
        else:
            base = np.asarray(baseline, dtype=float)
        out["baseline_accuracy"] = base.tolist()
        out["delta"] = (acc - base).tolist()
    return out


def shift_consistency(model: Model, data: Dataset, max_shift: int = 4, seed: int = 0, draws: int = 1) -> float:
    """Fraction of (image, circular shift) pairs whose predicted class does not change."""
    if max_shift <= 0:
        return 1.0
    rng = np.random.default_rng(seed)
    base = model.predict(data.images).argmax(axis=1)
    n = len(data)
    agree = 0
    for _ in range(draws):
        shifts = rng.integers(1, max_shift + 1, size=(n, 2))
        for dy, dx in np.unique(shifts, axis=0):
            idx = np.flatnonzero((shifts[:, 0] == dy) & (shifts[:, 1] == dx))
            moved = np.roll(data.images[idx], (int(dy), int(dx)), axis=(-2, -1))
            agree += int((model.predict(moved).argmax(axis=1) == base[idx]).sum())
    return agree / (n * draws)


def site_aliasing(model: Model, images, node_id: str) -> float:
    """Aliasing energy of the feature map a strided node is about to subsample.

    Strided convs and max-pools are re-run at stride 1 and measured at their
    own stride.  For a fixed strided blur the blurred map is measured against
    the energy of the blur's input, so the value shows what the filter let
    through.
    """
    node = model.graph[node_id]
    if node.stride < 2:
        raise ValueError(f"{node_id} does not subsample")
    _, tape = model.forward(images, keep=True)
    src = tape["outputs"][model.graph.predecessors(node_id)[0]]
    if node.kind == "blur":
        return aliasing_energy(src, node.stride, model.fixed_kernels[node_id])
    if node.kind == "conv":
        p = model.params[node_id]
        full, _ = ops.conv2d_forward(src, p["weight"], p["bias"], 1)
    else:
        full, _ = ops.maxpool_forward(src, node.kernel_size, 1)
    return aliasing_energy(full, node.stride)


@dataclass
class EvalReport:
    clean_accuracy: float
    per_band_accuracy: list[float] = field(default_factory=list)
    per_band_delta: list[float] | None = None
    corruption_errors: dict[str, list[float]] = field(default_factory=dict)
    per_corruption_ce: dict[str, float] = field(default_factory=dict)
    mce: float | None = None
    shift_consistency: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


SUITES = ("notch", "corrupt", "shift")


def evaluate(
    model: Model,
    data: Dataset,
    suites=SUITES,
    reference: Model | dict | None = None,
    baseline=None,
    n_bands: int = 16,
    seed: int = 0,
    max_shift: int = 4,
) -> EvalReport:
    """Run the requested suites and collect an :class:`EvalReport`.

    ``reference`` normalizes CE (a model, or its ``corruption_errors`` table);
    without one only raw errors are reported.
    """
    report = EvalReport(clean_accuracy=_accuracy(model, data.images, data.labels))
    if "notch" in suites:
        notch = notch_eval(model, data, n_bands, baseline)
        report.per_band_accuracy = notch["accuracy"]
        report.per_band_delta = notch.get("delta")
    if "corrupt" in suites:
        report.corruption_errors = corruption_errors(model, data, seed)
        if reference is not None:
            ref = corruption_errors(reference, data, seed) if isinstance(reference, Model) else reference
            report.per_corruption_ce = {k: corruption_error(v, ref[k]) for k, v in report.corruption_errors.items()}
            report.mce = mce(report.per_corruption_ce)
    if "shift" in suites:
        report.shift_consistency = shift_consistency(model, data, max_shift, seed)
    return report
