"""Quality metrics and baseline reconstructions for method comparisons.

SSIM convention of this package: the standard windowed formula (11x11 Gaussian
window, sigma 1.5, K1 = 0.01, K2 = 0.03) with the dynamic range taken from the
ground truth, ``L = max(x) - min(x)``, and both inputs offset by ``min(x)``
before scoring. Anchoring offsets to the ground-truth minimum makes the score
exactly invariant to a common additive shift; for nonnegative phantoms with
``min(x) = 0`` it coincides with the textbook formula. 3D volumes are scored
as the mean over axial slices, skipping slices whose ground-truth range is
zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import correlate

from .filters import ClassicalFilterKind, classical_params, reconstruct
from .geometry import Geometry
from .phantom import Dataset
from .projector import back_project, forward_project

_WIN = 11
_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


def mse(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean squared difference over all voxels."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    d = x - x_hat
    return float(np.mean(d * d))


def _gaussian_window() -> np.ndarray:
    r = np.arange(_WIN) - (_WIN - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * _SIGMA**2))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_2d(x: np.ndarray, y: np.ndarray, data_range: float) -> float:
    kern = _gaussian_window()
    mu_x = correlate(x, kern, mode="nearest")
    mu_y = correlate(y, kern, mode="nearest")
    sxx = correlate(x * x, kern, mode="nearest") - mu_x**2
    syy = correlate(y * y, kern, mode="nearest") - mu_y**2
    sxy = correlate(x * y, kern, mode="nearest") - mu_x * mu_y
    c1 = (_K1 * data_range) ** 2
    c2 = (_K2 * data_range) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Structural similarity of ``x_hat`` against ground truth ``x``.

    Raises
    ------
    ValueError
        On shape mismatch or constant ground truth (zero dynamic range).
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    lo = float(x.min())
    rng = float(x.max()) - lo
    if rng == 0.0:
        raise ValueError("constant ground truth: SSIM undefined (zero data range)")
    if x.ndim == 2:
        return _ssim_2d(x - lo, x_hat - lo, rng)
    scores = []
    for sl in range(x.shape[0]):
        s_lo = float(x[sl].min())
        if float(x[sl].max()) - s_lo == 0.0:
            continue
        scores.append(_ssim_2d(x[sl] - lo, x_hat[sl] - lo, rng))
    if not scores:
        raise ValueError("no slice of the ground truth has nonzero range")
    return float(np.mean(scores))


def classical_reconstruct(geom: Geometry, stack: np.ndarray,
                          filter_kind: ClassicalFilterKind | str = ClassicalFilterKind.RAM_LAK,
                          ) -> np.ndarray:
    """Classical FBP/FDK baseline: fixed filter, standard weights, documented
    normalization (see :func:`lfbp.filters.fbp_normalization`)."""
    params = classical_params(geom, filter_kind, scaled=True)
    return reconstruct(params, geom, stack)


def nag_least_squares(geom: Geometry, stack: np.ndarray, n_iters: int) -> np.ndarray:
    """Nesterov-accelerated least squares on ``0.5 ||A x - y||^2`` from x = 0.

    The step is ``1/L`` with L estimated by 20 power iterations on ``A^T A``.
    """
    if n_iters < 1:
        raise ValueError("need n_iters >= 1")
    y = np.asarray(stack, dtype=np.float64)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(geom.vol_shape)
    v /= np.linalg.norm(v)
    lip = 1.0
    for _ in range(20):
        w = back_project(geom, forward_project(geom, v))
        lip = float(np.linalg.norm(w))
        v = w / lip
    step = 1.0 / lip
    x = np.zeros(geom.vol_shape)
    x_prev = x
    t = 1.0
    for _ in range(n_iters):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = x + ((t - 1.0) / t_next) * (x - x_prev)
        grad = back_project(geom, forward_project(geom, z) - y)
        x_prev = x
        x = z - step * grad
        t = t_next
    return x


@dataclass
class MetricReport:
    """Per-sample scores plus their mean and standard deviation."""

    mse: np.ndarray
    ssim: np.ndarray

    @property
    def mse_mean(self) -> float:
        return float(self.mse.mean())

    @property
    def mse_std(self) -> float:
        return float(self.mse.std())

    @property
    def ssim_mean(self) -> float:
        return float(self.ssim.mean())

    @property
    def ssim_std(self) -> float:
        return float(self.ssim.std())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["sample", "mse", "ssim"])
            for i, (m, s) in enumerate(zip(self.mse, self.ssim)):
                wr.writerow([i, f"{m:.12g}", f"{s:.12g}"])
            wr.writerow(["mean", f"{self.mse_mean:.12g}", f"{self.ssim_mean:.12g}"])
            wr.writerow(["std", f"{self.mse_std:.12g}", f"{self.ssim_std:.12g}"])


def evaluate(method: Callable[[Geometry, np.ndarray], np.ndarray], geom: Geometry,
             dataset: Dataset) -> MetricReport:
    """Score ``method(geom, y_i)`` against ``x_i`` for every pair in the dataset."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    mses = np.zeros(len(dataset))
    ssims = np.zeros(len(dataset))
    for i, (x, y) in enumerate(zip(dataset.xs, dataset.ys)):
        x_hat = method(geom, y)
        mses[i] = mse(x, x_hat)
        ssims[i] = ssim(x, x_hat)
    return MetricReport(mse=mses, ssim=ssims)
