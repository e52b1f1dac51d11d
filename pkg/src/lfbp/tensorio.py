"""Sidecar tensor file format and dataset/filter persistence.

A tensor is stored as two sibling files: ``<base>.json``, a small header with
``dtype`` ("f32" or "f64"), ``shape``, ``byte_order`` ("little"), a semantic
``tag`` and optional ``meta`` dict; and ``<base>.bin``, the raw contiguous
row-major little-endian payload. The header fully describes the payload, so
the format is trivially readable from any language.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .filters import FilterParams
from .geometry import Geometry, GeometryKind
from .phantom import Dataset

_DTYPES = {"f32": "<f4", "f64": "<f8"}


def write_tensor(base, array: np.ndarray, tag: str, dtype: str = "f64",
                 meta: dict | None = None) -> None:
    """Write ``<base>.json`` + ``<base>.bin`` for a real array."""
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be one of {sorted(_DTYPES)}")
    base = Path(base)
    payload = np.ascontiguousarray(np.asarray(array), dtype=_DTYPES[dtype])
    header = {
        "dtype": dtype,
        "shape": list(payload.shape),
        "byte_order": "little",
        "tag": tag,
    }
    if meta:
        header["meta"] = meta
    base.with_suffix(".bin").write_bytes(payload.tobytes())
    base.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n")


def read_tensor(base) -> tuple[np.ndarray, dict]:
    """Read a tensor pair; returns (array, header)."""
    base = Path(base)
    header = json.loads(base.with_suffix(".json").read_text())
    if header.get("byte_order") != "little":
        raise ValueError("unsupported byte order")
    dt = _DTYPES.get(header.get("dtype"))
    if dt is None:
        raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
    raw = base.with_suffix(".bin").read_bytes()
    shape = tuple(int(s) for s in header["shape"])
    expect = int(np.prod(shape)) * int(dt[-1])
    if len(raw) != expect:
        raise ValueError(f"payload length {len(raw)} does not match header ({expect})")
    array = np.frombuffer(raw, dtype=dt).reshape(shape).astype(np.float64)
    return array, header


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_filter_params(base, params: FilterParams) -> None:
    """Persist a :class:`FilterParams` as ``<base>_filter`` and, when present,
    ``<base>_weights`` tensor pairs."""
    base = Path(base)
    meta = {"kind": params.kind.value, "filter_shape": list(params.filter_shape)}
    write_tensor(str(base) + "_filter", params.filter_half, "filter-half-spectrum", meta=meta)
    if params.weights is not None:
        write_tensor(str(base) + "_weights", params.weights, "filter-weights", meta=meta)


def load_filter_params(base) -> FilterParams:
    base = Path(base)
    half, header = read_tensor(str(base) + "_filter")
    meta = header.get("meta", {})
    kind = GeometryKind(meta["kind"])
    filter_shape = tuple(int(s) for s in meta["filter_shape"])
    weights = None
    wpath = Path(str(base) + "_weights.json")
    if wpath.exists():
        weights, _ = read_tensor(str(base) + "_weights")
    return FilterParams(kind=kind, filter_shape=filter_shape, filter_half=half, weights=weights)


def save_dataset(outdir, dataset: Dataset) -> None:
    """Write per-sample tensor pairs plus a checksum manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, (x, y) in enumerate(zip(dataset.xs, dataset.ys)):
        for name, arr, tag in ((f"x_{i:04d}", x, "volume"), (f"y_{i:04d}", y, "stack")):
            write_tensor(outdir / name, arr, tag)
            files.append({"name": name, "tag": tag,
                          "sha256": sha256_of(outdir / f"{name}.bin")})
    manifest = {
        "k": len(dataset),
        "snr_db": dataset.snr_db if np.isfinite(dataset.snr_db) else "inf",
        "seed": dataset.seed,
        "files": files,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_dataset(outdir, geom: Geometry) -> Dataset:
    outdir = Path(outdir)
    manifest = json.loads((outdir / "manifest.json").read_text())
    k = int(manifest["k"])
    xs, ys = [], []
    for i in range(k):
        x, _ = read_tensor(outdir / f"x_{i:04d}")
        y, _ = read_tensor(outdir / f"y_{i:04d}")
        if x.shape != geom.vol_shape or y.shape != geom.stack_shape:
            raise ValueError(f"sample {i} does not match the geometry")
        xs.append(x)
        ys.append(y)
    snr = manifest["snr_db"]
    snr_db = float("inf") if snr == "inf" else float(snr)
    return Dataset(geometry=geom, xs=xs, ys=ys, snr_db=snr_db, seed=int(manifest["seed"]))
