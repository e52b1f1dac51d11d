"""How far can the learned operator move when the data distribution shifts?

For Gaussian data models the optimal dense operators of two distributions can
be solved exactly, and their distance compared against the 2-Wasserstein
distance between the distributions. Stronger regularization contracts the gap;
doubling the perturbation cannot shrink it.
"""

import numpy as np

from lfbp import MomentModel, gaussian_w2, stability_probe

rng = np.random.default_rng(1)
a = rng.standard_normal((10, 18)) / 4.0

pi = MomentModel(np.eye(18), 0.01)
e = rng.standard_normal((18, 18))
bump = (e @ e.T) / 18.0
pi_small = MomentModel(np.eye(18) + 0.25 * bump, 0.02)
pi_large = MomentModel(np.eye(18) + 0.50 * bump, 0.03)

lambdas = [0.1, 1.0, 10.0]
for name, pert in (("small", pi_small), ("large", pi_large)):
    tab = stability_probe(a, pi, pert, lambdas)
    print(f"{name} perturbation: W2 = {tab.w2:.4f}")
    for lam, gapv in zip(tab.lambdas, tab.gaps):
        print(f"  lam {lam:5.1f}: operator gap {gapv:.5f}  gap/W2 {gapv / tab.w2:.4f}")

same = stability_probe(a, pi, pi, lambdas)
print(f"\nidentical distributions: max gap {same.gaps.max():.2e} "
      f"(W2 reported {same.w2:.2e})")
print("the gap shrinks as lam grows and never shrinks when the perturbation doubles.")
