"""Learn fan-beam filter and detector weights, then fix the gauge.

The fan-beam operator factors as weights followed by filtering, so any scalar
can move between the two. After training we project the weights back onto the
standard fan-beam profile and rescale the filter accordingly; the applied
operator is unchanged, but the weight plot becomes comparable to the classical
one.
"""

import numpy as np

from lfbp import (PhantomSpec, TrainConfig, apply_B, gauge_normalize, make_dataset,
                  make_geometry, standard_weights, train)

n = 48
geom = make_geometry("fan2d", n_angles=60, det_shape=72, det_pixel_size=1.7 / 72,
                     vol_shape=(n, n), vol_voxel_size=1.0 / n, sod=2.0, sdd=4.0)
spec = PhantomSpec(shape=(n, n), n_circles=(4, 10), radius_range=(0.06, 0.2), seed=0)
data = make_dataset(geom, spec, k=16, snr_db=25.0, seed=7)

report = train(TrainConfig(lam=1e-3, lr=0.12, n_iters=250, seed=0), geom, data)
params = report.params
print(f"trained: loss {report.data_loss[0]:.1f} -> {report.data_loss[-1]:.1f}")

fixed = gauge_normalize(params, geom)
probe = data.ys[0]
drift = np.abs(apply_B(fixed, geom, probe) - apply_B(params, geom, probe)).max()
print(f"gauge fix changes the applied operator by {drift:.2e} (should be ~0)\n")

w_std = standard_weights(geom)
print("  pixel   standard   learned (gauge-fixed)")
for t in range(0, geom.det_shape[0], 6):
    print(f"  {t:5d}   {w_std[t]:8.4f}   {fixed.weights[t]:8.4f}")
print("\nthe learned weights track the classical profile with noise-driven"
      "\ndeviations toward the detector edges.")
