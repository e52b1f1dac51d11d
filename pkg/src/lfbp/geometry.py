"""Acquisition geometries and per-angle ray generation.

Four scan trajectories are supported:

* ``PARALLEL_2D``   -- parallel-beam 2D scan, all rays of one view share a direction.
* ``FAN_2D``        -- fan-beam 2D scan, point source on a circle of radius ``sod``.
* ``ELLIPTICAL_FAN_2D`` -- fan-beam 2D scan with source/detector on elliptical orbits.
* ``LAMINOGRAPHY_3D``   -- cone-beam circular laminography: source and flat detector
  rotate on opposite sides of a flat sample, the central ray tilted by ``tilt_phi``
  degrees with respect to the sample plane and aimed at the volume centre.

Conventions
-----------
* Angle 0 lies along +x; view ``k`` is rotated counter-clockwise by
  ``theta_k = 2*pi*k / n_angles``. Angles are given in degrees in configs and
  converted to radians internally.
* The volume is centred on the origin. Voxel ``(i, j)`` of a 2D image maps to
  ``x = (j - (n1-1)/2) * voxel``, ``y = (i - (n0-1)/2) * voxel``; a 3D volume of
  shape ``(slices, n, n)`` stacks x-y planes along z.
* Detector pixel ``t`` sits at lateral offset ``(t - (d-1)/2) * det_pixel_size``
  from the detector centre.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class GeometryKind(enum.Enum):
    PARALLEL_2D = "parallel2d"
    FAN_2D = "fan2d"
    ELLIPTICAL_FAN_2D = "elliptical_fan2d"
    LAMINOGRAPHY_3D = "laminography3d"


_2D_KINDS = (GeometryKind.PARALLEL_2D, GeometryKind.FAN_2D, GeometryKind.ELLIPTICAL_FAN_2D)


@dataclass(frozen=True)
class Geometry:
    """Validated description of one acquisition; immutable, hashable, thread-safe.

    Use :func:`make_geometry` instead of the raw constructor; it validates the
    parameter set against the geometry kind.
    """

    kind: GeometryKind
    n_angles: int
    det_shape: tuple[int, ...]      # (d,) for 2D kinds, (d1, d2) for 3D
    det_pixel_size: float
    vol_shape: tuple[int, ...]      # (n, n) or (slices, n, n)
    vol_voxel_size: float
    sod: float = 0.0
    sdd: float = 0.0
    sod_major: float = 0.0
    sdd_major: float = 0.0
    tilt_phi: float = 0.0           # degrees, laminography only

    @property
    def n_det(self) -> int:
        """Detector pixels per view."""
        return int(np.prod(self.det_shape))

    @property
    def n_rays(self) -> int:
        """Total number of rays M = n_angles * pixels-per-view."""
        return self.n_angles * self.n_det

    @property
    def n_voxels(self) -> int:
        """Total number of voxels N."""
        return int(np.prod(self.vol_shape))

    @property
    def is_3d(self) -> bool:
        return self.kind is GeometryKind.LAMINOGRAPHY_3D

    @property
    def stack_shape(self) -> tuple[int, ...]:
        """Shape of a projection stack: (m, d) or (m, d1, d2)."""
        return (self.n_angles, *self.det_shape)

    def angle(self, k: int) -> float:
        """Rotation angle theta_k in radians."""
        return 2.0 * math.pi * k / self.n_angles


@dataclass(frozen=True)
class RayBundle:
    """Rays of one view: a source point and unit direction per detector pixel.

    ``sources`` and ``directions`` have shape (pixels, 2) or (pixels, 3), with
    3D detector pixels flattened row-major over (rows, cols).
    """

    angle_index: int
    sources: np.ndarray
    directions: np.ndarray


def make_geometry(kind: GeometryKind | str, **params) -> Geometry:
    """Build and validate a :class:`Geometry`.

    Parameters
    ----------
    kind : GeometryKind or str
        Trajectory type; strings use the enum values (e.g. ``"fan2d"``).
    **params
        Fields of :class:`Geometry` appropriate for the kind. ``det_shape`` may
        be an int for 2D kinds.

    Raises
    ------
    ValueError
        On nonpositive sizes, ``sdd <= sod``, tilt outside (0, 90) degrees, or a
        parameter set inconsistent with the kind.
    """
    if isinstance(kind, str):
        kind = GeometryKind(kind.lower())

    n_angles = int(params.pop("n_angles"))
    det_shape = params.pop("det_shape")
    if isinstance(det_shape, (int, np.integer)):
        det_shape = (int(det_shape),)
    else:
        det_shape = tuple(int(d) for d in det_shape)
    vol_shape = tuple(int(n) for n in params.pop("vol_shape"))
    det_pixel_size = float(params.pop("det_pixel_size"))
    vol_voxel_size = float(params.pop("vol_voxel_size"))
    sod = float(params.pop("sod", 0.0))
    sdd = float(params.pop("sdd", 0.0))
    sod_major = float(params.pop("sod_major", 0.0))
    sdd_major = float(params.pop("sdd_major", 0.0))
    tilt_phi = float(params.pop("tilt_phi", 0.0))
    if params:
        raise ValueError(f"unknown geometry parameters: {sorted(params)}")

    if n_angles < 1:
        raise ValueError("n_angles must be >= 1")
    if det_pixel_size <= 0 or vol_voxel_size <= 0:
        raise ValueError("pixel and voxel sizes must be positive")
    if any(d <= 0 for d in det_shape) or any(n <= 0 for n in vol_shape):
        raise ValueError("detector and volume shapes must be positive")

    if kind is GeometryKind.LAMINOGRAPHY_3D:
        if len(det_shape) != 2:
            raise ValueError("laminography needs det_shape = (rows, cols)")
        if len(vol_shape) != 3:
            raise ValueError("laminography needs vol_shape = (slices, n, n)")
        if not (0.0 < tilt_phi < 90.0):
            raise ValueError("tilt_phi must lie strictly between 0 and 90 degrees")
    else:
        if len(det_shape) != 1:
            raise ValueError("2D geometries need a scalar det_shape")
        if len(vol_shape) != 2:
            raise ValueError("2D geometries need vol_shape = (n, n)")

    if kind in (GeometryKind.FAN_2D, GeometryKind.ELLIPTICAL_FAN_2D, GeometryKind.LAMINOGRAPHY_3D):
        if not (sdd > sod > 0):
            raise ValueError("need sdd > sod > 0")
    if kind is GeometryKind.ELLIPTICAL_FAN_2D:
        if not (sdd_major > sod_major > 0):
            raise ValueError("need sdd_major > sod_major > 0")

    return Geometry(
        kind=kind,
        n_angles=n_angles,
        det_shape=det_shape,
        det_pixel_size=det_pixel_size,
        vol_shape=vol_shape,
        vol_voxel_size=vol_voxel_size,
        sod=sod,
        sdd=sdd,
        sod_major=sod_major,
        sdd_major=sdd_major,
        tilt_phi=tilt_phi,
    )


def _det_offsets(d: int, pixel: float) -> np.ndarray:
    return (np.arange(d) - (d - 1) / 2.0) * pixel


def rays_for_angle(geom: Geometry, k: int) -> RayBundle:
    """Source points and unit ray directions for view ``k``.

    Raises
    ------
    IndexError
        If ``k`` is outside ``[0, n_angles)``.
    """
    if not (0 <= k < geom.n_angles):
        raise IndexError(f"angle index {k} out of range [0, {geom.n_angles})")
    theta = geom.angle(k)

    if geom.kind is GeometryKind.PARALLEL_2D:
        (d,) = geom.det_shape
        u = _det_offsets(d, geom.det_pixel_size)
        u_vec = np.array([math.cos(theta), math.sin(theta)])
        direction = np.array([-math.sin(theta), math.cos(theta)])
        sources = u[:, None] * u_vec[None, :]
        directions = np.broadcast_to(direction, (d, 2)).copy()
        return RayBundle(k, sources, directions)

    if geom.kind is GeometryKind.FAN_2D:
        source = geom.sod * np.array([math.cos(theta), math.sin(theta)])
        det_center = -(geom.sdd - geom.sod) * np.array([math.cos(theta), math.sin(theta)])
        u_vec = np.array([-math.sin(theta), math.cos(theta)])
        return _fan_bundle(geom, k, source, det_center, u_vec)

    if geom.kind is GeometryKind.ELLIPTICAL_FAN_2D:
        a_s, b_s = geom.sod_major, geom.sod
        source = np.array([a_s * math.cos(theta), b_s * math.sin(theta)])
        # Detector rides its own ellipse with semi-axes (sdd_major - sod_major,
        # sdd - sod); its centre is re-aimed onto the source->origin ray so the
        # central ray always passes through the volume centre.
        a_d, b_d = geom.sdd_major - geom.sod_major, geom.sdd - geom.sod
        r_d = math.hypot(a_d * math.cos(theta), b_d * math.sin(theta))
        s_hat = source / np.linalg.norm(source)
        det_center = -r_d * s_hat
        u_vec = np.array([-s_hat[1], s_hat[0]])
        return _fan_bundle(geom, k, source, det_center, u_vec)

    # LAMINOGRAPHY_3D: source above the sample plane, detector below, both on
    # circles; the central ray makes angle tilt_phi with the x-y plane.
    phi = math.radians(geom.tilt_phi)
    cp, sp = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    s_hat = np.array([cp * ct, cp * st, sp])
    source = geom.sod * s_hat
    det_center = -(geom.sdd - geom.sod) * s_hat
    u_vec = np.array([-st, ct, 0.0])            # horizontal, in the rotation plane
    v_vec = np.array([sp * ct, sp * st, -cp])   # completes a right-handed (u, v, ray) frame
    d1, d2 = geom.det_shape
    v_off = _det_offsets(d1, geom.det_pixel_size)
    u_off = _det_offsets(d2, geom.det_pixel_size)
    det_pts = (
        det_center[None, None, :]
        + v_off[:, None, None] * v_vec[None, None, :]
        + u_off[None, :, None] * u_vec[None, None, :]
    ).reshape(d1 * d2, 3)
    directions = det_pts - source[None, :]
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    sources = np.broadcast_to(source, (d1 * d2, 3)).copy()
    return RayBundle(k, sources, directions)


def _fan_bundle(geom: Geometry, k: int, source: np.ndarray, det_center: np.ndarray,
                u_vec: np.ndarray) -> RayBundle:
    (d,) = geom.det_shape
    u = _det_offsets(d, geom.det_pixel_size)
    det_pts = det_center[None, :] + u[:, None] * u_vec[None, :]
    directions = det_pts - source[None, :]
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    sources = np.broadcast_to(source, (d, 2)).copy()
    return RayBundle(k, sources, directions)


@lru_cache(maxsize=8)
def all_rays(geom: Geometry) -> tuple[np.ndarray, np.ndarray]:
    """Sources and directions for every ray, concatenated over views.

    Returns arrays of shape (M, dim). Cached per geometry; treat as read-only.
    """
    bundles = [rays_for_angle(geom, k) for k in range(geom.n_angles)]
    sources = np.ascontiguousarray(np.concatenate([b.sources for b in bundles]))
    directions = np.ascontiguousarray(np.concatenate([b.directions for b in bundles]))
    sources.setflags(write=False)
    directions.setflags(write=False)
    return sources, directions
