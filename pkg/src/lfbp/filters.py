"""Structured inverse operators: per-view spectral filtering plus pre-weighting.

The operator ``B(p)`` acts on a projection stack view by view:

* parallel: one shared 1D spectral filter along the detector axis;
* fan: detector pre-weights, then the shared 1D filter;
* elliptical fan: per-view weights and per-view 1D filters;
* laminography: per-view 2D weights and per-view 2D filters.

Filter gains live directly at DFT bins (unnormalized forward DFT, ``1/L``
inverse) and are even-symmetric in every frequency axis. Symmetry is enforced
structurally: only the non-redundant half-spectrum is stored, and application
goes through real FFTs, so outputs are exactly real. No zero-padding is used;
``B`` is the cyclic operator and learned gains absorb wrap-around.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Geometry, GeometryKind
from .projector import back_project


class ClassicalFilterKind(enum.Enum):
    RAM_LAK = "ram-lak"
    SHEPP_LOGAN = "shepp-logan"
    HANN = "hann"
    HAMMING = "hamming"


def classical_filter(kind: ClassicalFilterKind | str, d: int) -> np.ndarray:
    """Full-spectrum gains (length ``d``) of a classical reconstruction filter.

    The ramp gain at bin k is ``2 * |f_k|`` with ``f_k`` the signed normalized
    frequency in [-1/2, 1/2); windowed variants multiply by the named window of
    the frequency magnitude. DC gain is 0.
    """
    if isinstance(kind, str):
        kind = ClassicalFilterKind(kind.lower())
    if d < 2:
        raise ValueError("need at least 2 detector pixels")
    f = np.fft.fftfreq(d)
    ramp = 2.0 * np.abs(f)
    if kind is ClassicalFilterKind.RAM_LAK:
        window = np.ones_like(f)
    elif kind is ClassicalFilterKind.SHEPP_LOGAN:
        window = np.sinc(f)
    elif kind is ClassicalFilterKind.HANN:
        window = 0.5 * (1.0 + np.cos(2.0 * np.pi * f))
    else:
        window = 0.54 + 0.46 * np.cos(2.0 * np.pi * f)
    return ramp * window


def standard_weights(geom: Geometry) -> np.ndarray:
    """Classical flat-detector pre-weights.

    Fan beam: ``w(u) = sdd / sqrt(sdd^2 + u^2)`` over detector offsets u.
    Laminography: ``w(u, v) = sdd / sqrt(sdd^2 + u^2 + v^2)`` (FDK style),
    returned with shape (rows, cols).
    """
    if geom.kind is GeometryKind.FAN_2D:
        (d,) = geom.det_shape
        u = (np.arange(d) - (d - 1) / 2.0) * geom.det_pixel_size
        return geom.sdd / np.sqrt(geom.sdd**2 + u**2)
    if geom.kind is GeometryKind.LAMINOGRAPHY_3D:
        d1, d2 = geom.det_shape
        v = (np.arange(d1) - (d1 - 1) / 2.0) * geom.det_pixel_size
        u = (np.arange(d2) - (d2 - 1) / 2.0) * geom.det_pixel_size
        return geom.sdd / np.sqrt(geom.sdd**2 + v[:, None] ** 2 + u[None, :] ** 2)
    raise ValueError(f"no standard weights for {geom.kind}")


def _standard_profile(geom: Geometry) -> np.ndarray | None:
    """Weight profile shaped like FilterParams.weights (None for parallel).

    Elliptical scans reuse the circular fan formula with the semi-minor sdd,
    tiled over views; laminography tiles the FDK weights over views.
    """
    if geom.kind is GeometryKind.PARALLEL_2D:
        return None
    if geom.kind is GeometryKind.FAN_2D:
        return standard_weights(geom)
    if geom.kind is GeometryKind.ELLIPTICAL_FAN_2D:
        (d,) = geom.det_shape
        u = (np.arange(d) - (d - 1) / 2.0) * geom.det_pixel_size
        w = geom.sdd / np.sqrt(geom.sdd**2 + u**2)
        return np.tile(w, (geom.n_angles, 1))
    return np.tile(standard_weights(geom), (geom.n_angles, 1, 1))


def _fold_idx(d: int) -> np.ndarray:
    """Map full-spectrum bin j to its non-redundant half-spectrum bin."""
    j = np.arange(d)
    return np.minimum(j, d - j)


def _half_len(d: int) -> int:
    return d // 2 + 1


@dataclass(frozen=True)
class FilterParams:
    """Learnable spectral gains and spatial weights of one operator ``B(p)``.

    ``filter_half`` stores the non-redundant half-spectrum: shape
    ``(d//2+1,)`` for the shared 1D filter, ``(m, d//2+1)`` per view, or
    ``(m, d1//2+1, d2//2+1)`` for per-view 2D filters. ``filter_shape`` is the
    logical full-spectrum shape ``(d,)``, ``(m, d)`` or ``(m, d1, d2)``;
    ``weights`` is None for parallel scans.
    """

    kind: GeometryKind
    filter_shape: tuple[int, ...]
    filter_half: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "filter_half",
                           np.asarray(self.filter_half, dtype=np.float64))
        if self.weights is not None:
            object.__setattr__(self, "weights",
                               np.asarray(self.weights, dtype=np.float64))
        expect = self._expected_half_shape()
        if self.filter_half.shape != expect:
            raise ValueError(f"filter_half shape {self.filter_half.shape}, expected {expect}")
        if (self.weights is None) != (self.kind is GeometryKind.PARALLEL_2D):
            raise ValueError("weights required exactly for geometries with pre-weighting")
        if self.weights is not None:
            wshape = {
                GeometryKind.FAN_2D: (self.filter_shape[-1],),
                GeometryKind.ELLIPTICAL_FAN_2D: self.filter_shape,
                GeometryKind.LAMINOGRAPHY_3D: self.filter_shape,
            }[self.kind]
            if self.weights.shape != wshape:
                raise ValueError(f"weights shape {self.weights.shape}, expected {wshape}")
            if not np.isfinite(self.weights).all():
                raise ValueError("weights must be finite")
        if not np.isfinite(self.filter_half).all():
            raise ValueError("filter gains must be finite")

    def _expected_half_shape(self) -> tuple[int, ...]:
        if self.kind in (GeometryKind.PARALLEL_2D, GeometryKind.FAN_2D):
            (d,) = self.filter_shape
            return (_half_len(d),)
        if self.kind is GeometryKind.ELLIPTICAL_FAN_2D:
            m, d = self.filter_shape
            return (m, _half_len(d))
        m, d1, d2 = self.filter_shape
        return (m, _half_len(d1), _half_len(d2))

    def full_filter(self) -> np.ndarray:
        """Materialize the even-symmetric full spectrum (logical shape)."""
        if self.kind is GeometryKind.LAMINOGRAPHY_3D:
            m, d1, d2 = self.filter_shape
            return self.filter_half[:, _fold_idx(d1)[:, None], _fold_idx(d2)[None, :]]
        d = self.filter_shape[-1]
        return self.filter_half[..., _fold_idx(d)]

    def rfft_gains(self) -> np.ndarray:
        """Gains laid out to multiply an rfft/rfft2 of the stack directly."""
        if self.kind is GeometryKind.LAMINOGRAPHY_3D:
            d1 = self.filter_shape[1]
            return self.filter_half[:, _fold_idx(d1), :]
        return self.filter_half

    @staticmethod
    def from_full(kind: GeometryKind, full: np.ndarray,
                  weights: np.ndarray | None = None, atol: float = 1e-12) -> "FilterParams":
        """Build params from full-spectrum gains, verifying even symmetry."""
        full = np.asarray(full, dtype=np.float64)
        if kind is GeometryKind.LAMINOGRAPHY_3D:
            m, d1, d2 = full.shape
            mirrored = full[:, _fold_idx(d1)[:, None], _fold_idx(d2)[None, :]][
                :, : _half_len(d1), : _half_len(d2)
            ]
            half = full[:, : _half_len(d1), : _half_len(d2)]
            recon = half[:, _fold_idx(d1)[:, None], _fold_idx(d2)[None, :]]
        else:
            d = full.shape[-1]
            half = full[..., : _half_len(d)]
            recon = half[..., _fold_idx(d)]
        if not np.allclose(recon, full, rtol=0.0, atol=atol):
            raise ValueError("full-spectrum gains are not even-symmetric")
        w = None if weights is None else np.asarray(weights, dtype=np.float64)
        return FilterParams(kind=kind, filter_shape=full.shape, filter_half=half, weights=w)


def _filter_shape_for(geom: Geometry) -> tuple[int, ...]:
    if geom.kind in (GeometryKind.PARALLEL_2D, GeometryKind.FAN_2D):
        return geom.det_shape
    return (geom.n_angles, *geom.det_shape)


def identity_params(geom: Geometry) -> FilterParams:
    """Params for which ``apply_B`` is the identity (unit gains and weights)."""
    full = np.ones(_filter_shape_for(geom))
    w = _standard_profile(geom)
    if w is not None:
        w = np.ones_like(w)
    return FilterParams.from_full(geom.kind, full, w)


def fbp_normalization(geom: Geometry) -> float:
    """Scale applied after back-projecting ramp-filtered data in the classical
    pipeline, chosen so the discrete chain approximates the continuous inverse.

    2D scans use ``pi / (2 m h^2)`` (h = voxel size); divergent magnification
    cancels. Laminography uses ``pi * du * sod / (2 m h^3 * sdd)`` (du =
    detector pixel), from matching ray density and 1D filtering at the volume
    centre. Learned pipelines never use this constant.
    """
    m, h = geom.n_angles, geom.vol_voxel_size
    if geom.kind is GeometryKind.LAMINOGRAPHY_3D:
        return math.pi * geom.det_pixel_size * geom.sod / (2.0 * m * h**3 * geom.sdd)
    return math.pi / (2.0 * m * h**2)


def classical_params(geom: Geometry, filter_kind: ClassicalFilterKind | str = ClassicalFilterKind.RAM_LAK,
                     scaled: bool = True) -> FilterParams:
    """Classical filter + standard weights as a :class:`FilterParams`.

    With ``scaled=True`` the gains include :func:`fbp_normalization`, so
    ``reconstruct`` with these params *is* the classical FBP/FDK baseline; this
    is also the training initializer. Laminography filters are the 1D ramp
    along the in-plane detector axis, constant across the other axis.
    """
    c = fbp_normalization(geom) if scaled else 1.0
    if geom.kind is GeometryKind.LAMINOGRAPHY_3D:
        m = geom.n_angles
        d1, d2 = geom.det_shape
        gain_u = classical_filter(filter_kind, d2) * c
        full = np.broadcast_to(gain_u, (m, d1, d2)).copy()
    else:
        (d,) = geom.det_shape
        gains = classical_filter(filter_kind, d) * c
        full = np.broadcast_to(gains, _filter_shape_for(geom)).copy()
    return FilterParams.from_full(geom.kind, full, _standard_profile(geom))


def _check_params(params: FilterParams, geom: Geometry):
    if params.kind is not geom.kind:
        raise ValueError(f"params kind {params.kind} does not match geometry {geom.kind}")
    if params.filter_shape != _filter_shape_for(geom):
        raise ValueError(f"filter shape {params.filter_shape} does not match geometry")


def apply_weights(params: FilterParams, stack: np.ndarray) -> np.ndarray:
    """The diagonal pre-weighting stage of ``B(p)`` (identity for parallel)."""
    if params.weights is None:
        return np.asarray(stack, dtype=np.float64)
    if params.kind is GeometryKind.FAN_2D:
        return stack * params.weights[None, :]
    return stack * params.weights


def apply_spectral(params: FilterParams, stack: np.ndarray) -> np.ndarray:
    """The filtering stage of ``B(p)``: real-FFT, gain multiply, inverse.

    This circulant stage is symmetric (real even gains), so it is also its own
    transpose.
    """
    gains = params.rfft_gains()
    if params.kind is GeometryKind.LAMINOGRAPHY_3D:
        d1, d2 = params.filter_shape[1:]
        spec = np.fft.rfft2(stack, axes=(1, 2))
        return np.fft.irfft2(spec * gains, s=(d1, d2), axes=(1, 2))
    d = params.filter_shape[-1]
    spec = np.fft.rfft(stack, axis=1)
    return np.fft.irfft(spec * gains, n=d, axis=1)


def apply_B(params: FilterParams, geom: Geometry, stack: np.ndarray) -> np.ndarray:
    """Apply ``B(p)`` to a projection stack (weights first, then filters)."""
    _check_params(params, geom)
    stack = np.asarray(stack, dtype=np.float64)
    if stack.shape != geom.stack_shape:
        raise ValueError(f"stack shape {stack.shape} does not match geometry {geom.stack_shape}")
    return apply_spectral(params, apply_weights(params, stack))


def reconstruct(params: FilterParams, geom: Geometry, stack: np.ndarray) -> np.ndarray:
    """Back-project the filtered stack: the full reconstruction ``A^T B(p) y``."""
    return back_project(geom, apply_B(params, geom, stack))


def gauge_normalize(params: FilterParams, geom: Geometry) -> FilterParams:
    """Remove the filter/weight scale ambiguity.

    Projects the weights onto the standard profile: with
    ``s = <w, w_std> / <w_std, w_std>``, returns weights ``w / s`` and filter
    ``s * p_filter``. The applied operator is unchanged.
    """
    _check_params(params, geom)
    if params.weights is None:
        raise ValueError("parallel-beam params carry no weights to normalize")
    w_std = _standard_profile(geom)
    proj = float(np.vdot(params.weights, w_std))
    scale = np.linalg.norm(params.weights) * np.linalg.norm(w_std)
    if abs(proj) <= 1e-12 * scale:
        raise ValueError("degenerate weights: zero projection onto the standard profile")
    s = proj / float(np.vdot(w_std, w_std))
    return FilterParams(kind=params.kind, filter_shape=params.filter_shape,
                        filter_half=params.filter_half * s, weights=params.weights / s)


def export_filter_csv(params: FilterParams, path, geom: Geometry | None = None,
                      gauge: bool = False):
    """Write gains (and weights, if present) to CSV.

    The filter table has columns (view, bin, frequency, gain); the shared-filter
    kinds write view -1. Weights go to a sibling ``*_weights.csv`` with columns
    (view, pixel, weight). With ``gauge=True`` the params are gauge-normalized
    first (requires ``geom``).
    """
    if gauge:
        if geom is None:
            raise ValueError("gauge export needs the geometry")
        params = gauge_normalize(params, geom)
    path = str(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        if params.kind is GeometryKind.LAMINOGRAPHY_3D:
            m, d1, d2 = params.filter_shape
            f1 = np.abs(np.fft.fftfreq(d1))[: _half_len(d1)]
            f2 = np.abs(np.fft.fftfreq(d2))[: _half_len(d2)]
            wr.writerow(["view", "bin_row", "bin_col", "freq_row", "freq_col", "gain"])
            for a in range(m):
                for k1 in range(_half_len(d1)):
                    for k2 in range(_half_len(d2)):
                        wr.writerow([a, k1, k2, f"{f1[k1]:.8g}", f"{f2[k2]:.8g}",
                                     f"{params.filter_half[a, k1, k2]:.12g}"])
        else:
            d = params.filter_shape[-1]
            freqs = np.abs(np.fft.fftfreq(d))[: _half_len(d)]
            wr.writerow(["view", "bin", "frequency", "gain"])
            half = params.filter_half
            if half.ndim == 1:
                for k in range(half.size):
                    wr.writerow([-1, k, f"{freqs[k]:.8g}", f"{half[k]:.12g}"])
            else:
                for a in range(half.shape[0]):
                    for k in range(half.shape[1]):
                        wr.writerow([a, k, f"{freqs[k]:.8g}", f"{half[a, k]:.12g}"])
    if params.weights is not None:
        wpath = path[:-4] + "_weights.csv" if path.endswith(".csv") else path + "_weights.csv"
        with open(wpath, "w", newline="") as fh:
            wr = csv.writer(fh)
            w = params.weights
            if params.kind is GeometryKind.LAMINOGRAPHY_3D:
                wr.writerow(["view", "row", "col", "weight"])
                for a in range(w.shape[0]):
                    for i in range(w.shape[1]):
                        for j in range(w.shape[2]):
                            wr.writerow([a, i, j, f"{w[a, i, j]:.12g}"])
            elif w.ndim == 1:
                wr.writerow(["view", "pixel", "weight"])
                for t in range(w.size):
                    wr.writerow([-1, t, f"{w[t]:.12g}"])
            else:
                wr.writerow(["view", "pixel", "weight"])
                for a in range(w.shape[0]):
                    for t in range(w.shape[1]):
                        wr.writerow([a, t, f"{w[a, t]:.12g}"])
