"""Experiment configuration: a single JSON file describing a full run.

Schema (all blocks except ``geometry`` optional where noted)::

    {
      "geometry": {            # passed to make_geometry
        "kind": "parallel2d" | "fan2d" | "elliptical_fan2d" | "laminography3d",
        "n_angles": int, "det_shape": int | [d1, d2],
        "det_pixel_size": float, "vol_shape": [..], "vol_voxel_size": float,
        "sod": float, "sdd": float, "sod_major": float, "sdd_major": float,
        "tilt_phi": float
      },
      "phantom": {"n_circles": [lo, hi], "radius_range": [lo, hi],
                   "n_layers": int, "value": float},
      "dataset": {"k": int, "snr_db": float | "inf", "seed": int},
      "train":   {"lam", "lr", "n_iters", "batch_size", "seed", "beta1",
                   "beta2", "eps", "init"},
      "eval":    {"filter_kind": "ram-lak" | "shepp-logan" | "hann" | "hamming",
                   "nag_iters": int}
    }

Parsing then re-serializing a config is idempotent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import Geometry, make_geometry
from .phantom import PhantomSpec
from .training import TrainConfig


@dataclass(frozen=True)
class EvalConfig:
    filter_kind: str = "ram-lak"
    nag_iters: int = 50

    def __post_init__(self):
        if self.nag_iters < 1:
            raise ValueError("nag_iters must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: Geometry
    phantom: PhantomSpec
    k: int
    snr_db: float
    seed: int
    train: TrainConfig
    eval: EvalConfig
    raw: dict = field(repr=False, default_factory=dict)


def _phantom_from(block: dict, geom: Geometry) -> PhantomSpec:
    return PhantomSpec(
        shape=geom.vol_shape,
        n_circles=tuple(block.get("n_circles", (3, 12))),
        radius_range=tuple(block.get("radius_range", (0.02, 0.15))),
        n_layers=int(block.get("n_layers", 1)),
        value=float(block.get("value", 1.0)),
        seed=0,
    )


def parse_config(data: dict) -> ExperimentConfig:
    if "geometry" not in data:
        raise ValueError("config needs a 'geometry' block")
    geom = make_geometry(**data["geometry"])
    phantom = _phantom_from(data.get("phantom", {}), geom)
    ds = data.get("dataset", {})
    snr = ds.get("snr_db", "inf")
    snr_db = float("inf") if snr == "inf" else float(snr)
    k = int(ds.get("k", 1))
    if k < 1:
        raise ValueError("dataset.k must be >= 1")
    tr = dict(data.get("train", {}))
    if tr.get("batch_size") is not None and "batch_size" in tr:
        tr["batch_size"] = int(tr["batch_size"])
    train = TrainConfig(**tr)
    ev = EvalConfig(**data.get("eval", {}))
    return ExperimentConfig(geometry=geom, phantom=phantom, k=k, snr_db=snr_db,
                            seed=int(ds.get("seed", 0)), train=train, eval=ev, raw=data)


def load_config(path) -> ExperimentConfig:
    return parse_config(json.loads(Path(path).read_text()))


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Canonical dict form; parse(serialize(parse(x))) == parse(x)."""
    g = cfg.geometry
    geometry = {
        "kind": g.kind.value,
        "n_angles": g.n_angles,
        "det_shape": list(g.det_shape),
        "det_pixel_size": g.det_pixel_size,
        "vol_shape": list(g.vol_shape),
        "vol_voxel_size": g.vol_voxel_size,
    }
    if g.sod or g.sdd:
        geometry["sod"] = g.sod
        geometry["sdd"] = g.sdd
    if g.sod_major or g.sdd_major:
        geometry["sod_major"] = g.sod_major
        geometry["sdd_major"] = g.sdd_major
    if g.tilt_phi:
        geometry["tilt_phi"] = g.tilt_phi
    t = cfg.train
    return {
        "geometry": geometry,
        "phantom": {
            "n_circles": list(cfg.phantom.n_circles),
            "radius_range": list(cfg.phantom.radius_range),
            "n_layers": cfg.phantom.n_layers,
            "value": cfg.phantom.value,
        },
        "dataset": {"k": cfg.k,
                    "snr_db": "inf" if cfg.snr_db == float("inf") else cfg.snr_db,
                    "seed": cfg.seed},
        "train": {"lam": t.lam, "lr": t.lr, "n_iters": t.n_iters,
                  "batch_size": t.batch_size, "seed": t.seed, "beta1": t.beta1,
                  "beta2": t.beta2, "eps": t.eps, "init": t.init},
        "eval": {"filter_kind": cfg.eval.filter_kind, "nag_iters": cfg.eval.nag_iters},
    }
