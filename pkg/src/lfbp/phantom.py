"""Synthetic phantoms, measurement noise, and training datasets.

Phantoms are binary images/volumes of random circles. 3D phantoms are flat
volumes with ``n_layers`` equal-thickness bands along the slice axis, each band
carrying an independent circle pattern constant across its slices, separated
by empty gaps.

Reproducibility: every derived random stream uses
``derive_seed(master_seed, index, tag)``, a SHA-256 based 64-bit split. The
rule is fixed so datasets are identical across platforms and regenerations.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Geometry
from .projector import forward_project


@dataclass(frozen=True)
class PhantomSpec:
    """Parameters of the random-circle phantom family.

    ``shape`` is (n, n) for 2D or (slices, n, n) for 3D; radii are fractions of
    the image width. Circle counts are drawn uniformly from the inclusive range
    ``n_circles``.
    """

    shape: tuple[int, ...]
    n_circles: tuple[int, int] = (3, 12)
    radius_range: tuple[float, float] = (0.02, 0.15)
    n_layers: int = 1
    value: float = 1.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.n_circles
        if lo < 0 or hi < lo:
            raise ValueError("n_circles range must satisfy 0 <= lo <= hi")
        rlo, rhi = self.radius_range
        if not (0.0 < rlo <= rhi < 0.5):
            raise ValueError("radii must lie in (0, 0.5) as fractions of width")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if len(self.shape) == 3 and self.n_layers > self.shape[0]:
            raise ValueError("more layers than slices")


@dataclass(frozen=True)
class Dataset:
    """K (volume, projection-stack) pairs sharing one geometry."""

    geometry: Geometry
    xs: list[np.ndarray]
    ys: list[np.ndarray]
    snr_db: float
    seed: int

    def __len__(self) -> int:
        return len(self.xs)

    def __post_init__(self):
        if len(self.xs) < 1 or len(self.xs) != len(self.ys):
            raise ValueError("dataset needs K >= 1 matched pairs")


def derive_seed(master: int, index: int, tag: str) -> int:
    """Fixed 64-bit seed-splitting rule (SHA-256 of ``"master:index:tag"``)."""
    digest = hashlib.sha256(f"{master}:{index}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _circle_mask(n: int, rng: np.random.Generator, n_circles: tuple[int, int],
                 radius_range: tuple[float, float]) -> np.ndarray:
    count = int(rng.integers(n_circles[0], n_circles[1], endpoint=True))
    mask = np.zeros((n, n), dtype=bool)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    for _ in range(count):
        r = rng.uniform(*radius_range) * n
        # keep the circle fully inside the image
        ci = rng.uniform(r, n - 1 - r)
        cj = rng.uniform(r, n - 1 - r)
        mask |= (ii - ci) ** 2 + (jj - cj) ** 2 <= r**2
    return mask


def _layer_bands(n_slices: int, n_layers: int) -> list[slice]:
    # 2L+1 near-equal segments [gap, band, gap, band, ..., gap]; bands at odd slots
    edges = np.linspace(0, n_slices, 2 * n_layers + 2).round().astype(int)
    return [slice(edges[2 * i + 1], edges[2 * i + 2]) for i in range(n_layers)]


def generate_phantom(spec: PhantomSpec) -> np.ndarray:
    """Deterministic binary phantom for ``spec`` (union of circles)."""
    if len(spec.shape) == 2:
        rng = np.random.default_rng(derive_seed(spec.seed, 0, "circles"))
        mask = _circle_mask(spec.shape[0], rng, spec.n_circles, spec.radius_range)
        return mask.astype(np.float64) * spec.value

    n_slices, n, _ = spec.shape
    vol = np.zeros(spec.shape)
    for layer, band in enumerate(_layer_bands(n_slices, spec.n_layers)):
        rng = np.random.default_rng(derive_seed(spec.seed, layer, "circles"))
        mask = _circle_mask(n, rng, spec.n_circles, spec.radius_range)
        vol[band] = mask.astype(np.float64) * spec.value
    return vol


def add_gaussian_noise(stack: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise at the requested SNR.

    The noise std is ``(||y||_2 / sqrt(M)) * 10**(-snr_db / 20)``, i.e. signal
    power is the mean square of the clean stack. ``snr_db = inf`` returns the
    stack unchanged.
    """
    stack = np.asarray(stack, dtype=np.float64)
    if not np.isfinite(stack).all():
        raise ValueError("stack must be finite")
    if math.isinf(snr_db):
        return stack.copy()
    rms = np.linalg.norm(stack) / math.sqrt(stack.size)
    if rms == 0.0:
        raise ValueError("SNR undefined for an all-zero stack")
    sigma = rms * 10.0 ** (-snr_db / 20.0)
    rng = np.random.default_rng(seed)
    return stack + sigma * rng.standard_normal(stack.shape)


def make_dataset(geom: Geometry, spec: PhantomSpec, k: int, snr_db: float,
                 seed: int) -> Dataset:
    """Generate K phantom/measurement pairs, fully determined by the arguments.

    Pair i uses phantom seed ``derive_seed(seed, i, "phantom")`` and noise seed
    ``derive_seed(seed, i, "noise")``, so streams are independent and samples
    can be regenerated individually.
    """
    if k < 1:
        raise ValueError("need K >= 1 samples")
    if spec.shape != geom.vol_shape:
        raise ValueError(f"phantom shape {spec.shape} does not match geometry {geom.vol_shape}")
    xs, ys = [], []
    for i in range(k):
        spec_i = PhantomSpec(
            shape=spec.shape, n_circles=spec.n_circles, radius_range=spec.radius_range,
            n_layers=spec.n_layers, value=spec.value, seed=derive_seed(seed, i, "phantom"),
        )
        x = generate_phantom(spec_i)
        y = add_gaussian_noise(forward_project(geom, x), snr_db, derive_seed(seed, i, "noise"))
        xs.append(x)
        ys.append(y)
    return Dataset(geometry=geom, xs=xs, ys=ys, snr_db=snr_db, seed=seed)
