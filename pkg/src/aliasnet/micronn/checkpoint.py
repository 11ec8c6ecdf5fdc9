"""Checkpoints: raw little-endian float64 parameters plus a JSON sidecar."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..graphlint import parse_graph
from .model import Model

FORMAT = "aliasnet-checkpoint/1"


def save(model: Model, path, metadata: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>.bin`` and ``<path>.json``; returns both paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bin_path, meta_path = path.with_suffix(".bin"), path.with_suffix(".json")
    layout, offset = [], 0
    for nid, name in model.param_keys():
        arr = model.params[nid][name]
        layout.append({"node": nid, "param": name, "offset": offset, "shape": list(arr.shape)})
        offset += arr.size
    blob = model.parameter_vector().astype("<f8").tobytes()
    bin_path.write_bytes(blob)
    sidecar = {
        "format": FORMAT,
        "graph": model.graph.to_dict(),
        "params": layout,
        "n_values": offset,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "metadata": metadata or {},
    }
    meta_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return bin_path, meta_path


def load(path) -> tuple[Model, dict]:
    """Inverse of :func:`save`; accepts the stem, the ``.bin`` or the ``.json`` path."""
    path = Path(path)
    meta_path, bin_path = path.with_suffix(".json"), path.with_suffix(".bin")
    sidecar = json.loads(meta_path.read_text())
    if sidecar.get("format") != FORMAT:
        raise ValueError(f"{meta_path}: unsupported checkpoint format {sidecar.get('format')!r}")
    blob = bin_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != sidecar["sha256"]:
        raise ValueError(f"{bin_path}: checksum mismatch")
    flat = np.frombuffer(blob, dtype="<f8").astype(float)
    if flat.size != sidecar["n_values"]:
        raise ValueError(f"{bin_path}: expected {sidecar['n_values']} values, found {flat.size}")
    params: dict[str, dict[str, np.ndarray]] = {}
    for entry in sidecar["params"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape))
        params.setdefault(entry["node"], {})[entry["param"]] = flat[entry["offset"] : entry["offset"] + n].reshape(shape).copy()
    return Model(parse_graph(sidecar["graph"]), params), sidecar.get("metadata", {})
