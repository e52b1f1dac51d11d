import numpy as np
import pytest

from lfbp.geometry import make_geometry


@pytest.fixture(scope="session")
def tiny_geoms():
    """One small instance per geometry kind, cheap enough for dense oracles."""
    # odd angle count for the parallel scan: over 360 degrees, opposite views
    # duplicate rays and the dense operator would lose full row rank
    return {
        "parallel2d": make_geometry("parallel2d", n_angles=5, det_shape=8,
                                    det_pixel_size=0.14, vol_shape=(8, 8),
                                    vol_voxel_size=0.125),
        "fan2d": make_geometry("fan2d", n_angles=4, det_shape=8, det_pixel_size=0.3,
                               vol_shape=(8, 8), vol_voxel_size=0.125, sod=2.0, sdd=4.0),
        "elliptical_fan2d": make_geometry("elliptical_fan2d", n_angles=4, det_shape=8,
                                          det_pixel_size=0.3, vol_shape=(8, 8),
                                          vol_voxel_size=0.125, sod=2.0, sdd=4.0,
                                          sod_major=3.0, sdd_major=6.0),
        "laminography3d": make_geometry("laminography3d", n_angles=3, det_shape=(6, 6),
                                        det_pixel_size=0.5, vol_shape=(4, 8, 8),
                                        vol_voxel_size=0.15, sod=3.0, sdd=9.0,
                                        tilt_phi=45.0),
    }


@pytest.fixture(scope="session")
def desk_geoms():
    """Mid-size instances used for adjoint and pipeline checks."""
    return {
        "parallel2d": make_geometry("parallel2d", n_angles=60, det_shape=96,
                                    det_pixel_size=1.0 / 64, vol_shape=(64, 64),
                                    vol_voxel_size=1.0 / 64),
        "fan2d": make_geometry("fan2d", n_angles=60, det_shape=96,
                               det_pixel_size=1.6 / 96, vol_shape=(64, 64),
                               vol_voxel_size=1.0 / 64, sod=2.0, sdd=4.0),
        "elliptical_fan2d": make_geometry("elliptical_fan2d", n_angles=60, det_shape=96,
                                          det_pixel_size=1.8 / 96, vol_shape=(64, 64),
                                          vol_voxel_size=1.0 / 64, sod=2.25, sdd=4.5,
                                          sod_major=6.0, sdd_major=12.0),
        "laminography3d": make_geometry("laminography3d", n_angles=20, det_shape=(64, 64),
                                        det_pixel_size=0.3, vol_shape=(16, 48, 48),
                                        vol_voxel_size=0.125, sod=10.0, sdd=20.0,
                                        tilt_phi=45.0),
    }


def rng_volume(geom, seed):
    return np.random.default_rng(seed).standard_normal(geom.vol_shape)


def rng_stack(geom, seed):
    return np.random.default_rng(seed).standard_normal(geom.stack_shape)
