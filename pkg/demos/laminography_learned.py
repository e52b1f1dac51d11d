"""Learned per-view 2D filters for cone-beam circular laminography.

A flat sample scanned on a tilted circular trajectory leaves a cone of
frequencies unmeasured; the classical FDK chain shows strong out-of-plane
artifacts. Learned per-view 2D filters and weights reduce the in-range error
substantially. This demo runs a reduced-size instance to stay fast; expect a
few minutes.
"""

from lfbp import (PhantomSpec, TrainConfig, classical_reconstruct, evaluate,
                  make_dataset, make_geometry, reconstruct, train)

geom = make_geometry("laminography3d", n_angles=24, det_shape=(64, 64),
                     det_pixel_size=0.4, vol_shape=(8, 48, 48), vol_voxel_size=0.125,
                     sod=12.0, sdd=24.0, tilt_phi=45.0)
spec = PhantomSpec(shape=(8, 48, 48), n_circles=(2, 5), radius_range=(0.08, 0.22),
                   n_layers=2, seed=0)
train_set = make_dataset(geom, spec, k=8, snr_db=float("inf"), seed=5)
val_set = make_dataset(geom, spec, k=3, snr_db=float("inf"), seed=777)

fdk = evaluate(lambda g, y: classical_reconstruct(g, y, "ram-lak"), geom, val_set)
print(f"FDK baseline: MSE {fdk.mse_mean:.5f}  SSIM {fdk.ssim_mean:.3f}")

report = train(TrainConfig(lam=5e-4, lr=0.12, n_iters=120, seed=0), geom, train_set)
params = report.params
learned = evaluate(lambda g, y: reconstruct(params, g, y), geom, val_set)
print(f"learned:      MSE {learned.mse_mean:.5f}  SSIM {learned.ssim_mean:.3f}")
print(f"MSE ratio {learned.mse_mean / fdk.mse_mean:.3f}")

print("\nrobustness to the tilt angle (operator trained at 45 degrees):")
for phi in (40.0, 45.0, 50.0):
    g_phi = make_geometry("laminography3d", n_angles=24, det_shape=(64, 64),
                          det_pixel_size=0.4, vol_shape=(8, 48, 48), vol_voxel_size=0.125,
                          sod=12.0, sdd=24.0, tilt_phi=phi)
    val_phi = make_dataset(g_phi, spec, k=3, snr_db=float("inf"), seed=777)
    r = evaluate(lambda g, y: reconstruct(params, g, y), g_phi, val_phi)
    print(f"  phi={phi:4.1f}: MSE {r.mse_mean:.5f}  SSIM {r.ssim_mean:.3f}")
