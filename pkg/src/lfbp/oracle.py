"""Dense small-instance linear algebra: ground truth for the structured pipeline.

On instances small enough to materialize the forward operator as an explicit
matrix, the optimal inverse operator has a closed form: the minimizer of

    E || A^T B y - x ||^2 + lam * ||B||_F^2

satisfies ``A A^T B S_yy + lam B = A S_xy``. This module solves that equation
directly (eigendecomposition of the Kronecker/Sylvester system), evaluates the
spectral gain/bias/variance factors, decomposes the expected reconstruction
error, probes stability of the solution under distribution perturbations, and
trains an unstructured dense B iteratively for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .filters import FilterParams, apply_B
from .geometry import Geometry
from .projector import forward_project

_SIZE_GUARD = 4096


@dataclass(frozen=True)
class DenseOperator:
    """Explicit forward matrix of a (small) geometry.

    Rows follow the raveled projection-stack layout, columns the raveled
    volume. Construction asserts full row rank (smallest singular value above
    ``1e-10`` of the largest).
    """

    matrix: np.ndarray
    geometry: Geometry

    def __post_init__(self):
        m, n = self.matrix.shape
        if m > _SIZE_GUARD or n > _SIZE_GUARD:
            raise ValueError(f"dense operator guard: {m}x{n} exceeds {_SIZE_GUARD}")
        s = np.linalg.svd(self.matrix, compute_uv=False)
        if s[-1] <= 1e-10 * s[0]:
            raise ValueError("forward matrix is not full row rank")


def materialize(geom: Geometry) -> DenseOperator:
    """Build the explicit matrix column-by-column via the forward projector."""
    m, n = geom.n_rays, geom.n_voxels
    if m > _SIZE_GUARD or n > _SIZE_GUARD:
        raise ValueError(f"dense operator guard: {m}x{n} exceeds {_SIZE_GUARD}")
    a = np.zeros((m, n))
    basis = np.zeros(geom.vol_shape)
    flat = basis.reshape(-1)
    for j in range(n):
        flat[j] = 1.0
        a[:, j] = forward_project(geom, basis).reshape(-1)
        flat[j] = 0.0
    return DenseOperator(matrix=a, geometry=geom)


def materialize_filter(params: FilterParams, geom: Geometry) -> np.ndarray:
    """Dense matrix of the structured operator ``B(p)`` (small stacks only)."""
    m = geom.n_rays
    if m > _SIZE_GUARD:
        raise ValueError(f"dense operator guard: {m} rays exceed {_SIZE_GUARD}")
    b = np.zeros((m, m))
    e = np.zeros(geom.stack_shape)
    flat = e.reshape(-1)
    for j in range(m):
        flat[j] = 1.0
        b[:, j] = apply_B(params, geom, e).reshape(-1)
        flat[j] = 0.0
    return b


@dataclass(frozen=True)
class MomentModel:
    """Zero-mean Gaussian data model: x ~ N(0, sigma_xx), y = A x + noise,
    noise ~ N(0, noise_var * I) independent of x."""

    sigma_xx: np.ndarray
    noise_var: float

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise variance must be >= 0")
        s = np.asarray(self.sigma_xx)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("sigma_xx must be square")
        if not np.allclose(s, s.T, atol=1e-12 * max(1.0, np.abs(s).max())):
            raise ValueError("sigma_xx must be symmetric")
        if np.linalg.eigvalsh(0.5 * (s + s.T))[0] <= 0:
            raise ValueError("sigma_xx must be positive definite")

    def second_moments(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (S_yy, S_xy) implied by the model for forward matrix ``a``."""
        syy = a @ self.sigma_xx @ a.T + self.noise_var * np.eye(a.shape[0])
        sxy = self.sigma_xx @ a.T
        return syy, sxy


def empirical_moments(xs, ys=None) -> tuple[np.ndarray, np.ndarray]:
    """Sample second moments ``S_yy = K^-1 sum y y^T``, ``S_xy = K^-1 sum x y^T``.

    Accepts a :class:`~lfbp.phantom.Dataset` or two sequences of arrays
    (flattened internally).
    """
    if ys is None:
        xs, ys = xs.xs, xs.ys
    x = np.stack([np.asarray(v, dtype=np.float64).reshape(-1) for v in xs], axis=1)
    y = np.stack([np.asarray(v, dtype=np.float64).reshape(-1) for v in ys], axis=1)
    k = y.shape[1]
    return (y @ y.T) / k, (x @ y.T) / k


def solve_optimal_B(a: np.ndarray, syy: np.ndarray, sxy: np.ndarray,
                    lam: float) -> np.ndarray:
    """Solve ``A A^T B S_yy + lam B = A S_xy`` for the optimal dense B.

    Diagonalizes ``A A^T`` and ``S_yy`` so the Kronecker system
    ``(S_yy^T (x) A A^T + lam I) vec(B) = vec(A S_xy)`` decouples entrywise.

    Raises
    ------
    NumericalError
        If the system is singular or the residual exceeds
        ``1e-8 * ||A S_xy||_F``.
    """
    a = np.asarray(a, dtype=np.float64)
    aat = a @ a.T
    rhs = a @ sxy
    d1, q1 = np.linalg.eigh(0.5 * (aat + aat.T))
    d2, q2 = np.linalg.eigh(0.5 * (syy + syy.T))
    den = d1[:, None] * d2[None, :] + lam
    scale = max(np.abs(d1).max() * np.abs(d2).max(), lam, 1e-300)
    if np.abs(den).min() <= 1e-14 * scale:
        raise NumericalError("singular optimality system: need lam > 0, noise, or invertible AA^T")
    btilde = (q1.T @ rhs @ q2) / den
    b = q1 @ btilde @ q2.T
    resid = np.linalg.norm(aat @ b @ syy + lam * b - rhs)
    bound = 1e-8 * np.linalg.norm(rhs)
    if resid > bound and np.linalg.norm(rhs) > 0:
        raise NumericalError(f"optimality residual {resid:.3e} exceeds {bound:.3e}")
    return b


def solve_optimal_B_model(a: np.ndarray, model: MomentModel, lam: float) -> np.ndarray:
    """Convenience: :func:`solve_optimal_B` with model-implied moments."""
    syy, sxy = model.second_moments(a)
    return solve_optimal_B(a, syy, sxy, lam)


@dataclass(frozen=True)
class SpectralFactors:
    """Per-mode spectral quantities of the optimal operator (``sigma_xx = I``).

    ``gain[i] = s_i^2 / ((s_i^2 + sigma^2) s_i^2 + lam)`` is the modal gain;
    ``variance_factor`` and ``bias_factor`` are the corresponding noise and
    regularization factors; ``variance = sigma^2 * sum(variance_factor^2)`` and
    ``bias = sum(bias_factor^2)`` are the aggregated error terms.
    """

    singular_values: np.ndarray
    gain: np.ndarray
    variance_factor: np.ndarray
    bias_factor: np.ndarray
    variance: float
    bias: float


def spectral_factors(a: np.ndarray, sigma: float, lam: float) -> SpectralFactors:
    """Closed-form spectral description of the optimal inverse operator."""
    s = np.linalg.svd(np.asarray(a, dtype=np.float64), compute_uv=False)
    den = (s**2 + sigma**2) * s**2 + lam
    gain = s**2 / den
    zeta = s**3 / den
    beta = (sigma**2 * s**2 + lam) / (s**4 + sigma**2 * s**2 + lam)
    return SpectralFactors(
        singular_values=s, gain=gain, variance_factor=zeta, bias_factor=beta,
        variance=float(sigma**2 * np.sum(zeta**2)), bias=float(np.sum(beta**2)),
    )


@dataclass(frozen=True)
class ErrorDecomposition:
    variance: float
    bias: float
    nullspace: float
    total: float


def error_decomposition(a: np.ndarray, b: np.ndarray, model: MomentModel) -> ErrorDecomposition:
    """Split ``E||A^T B y - x||^2`` into variance + bias + null-space terms.

    Valid for centered noise independent of x (the model used here); the three
    terms then sum exactly to the total, which is evaluated independently from
    the model moments.
    """
    a = np.asarray(a, dtype=np.float64)
    sxx = model.sigma_xx
    atb = a.T @ b
    adag = np.linalg.pinv(a)
    variance = model.noise_var * float(np.sum(atb * atb))
    g = (atb - adag) @ a
    bias = float(np.sum((g @ sxx) * g))
    p_null = np.eye(a.shape[1]) - adag @ a
    nullspace = float(np.trace(p_null @ sxx))
    syy, sxy = model.second_moments(a)
    total = (float(np.sum((atb @ syy) * atb))
             - 2.0 * float(np.sum(atb * (a @ sxx).T))
             + float(np.trace(sxx)))
    return ErrorDecomposition(variance=variance, bias=bias, nullspace=nullspace, total=total)


def gaussian_w2(a: np.ndarray, pi: MomentModel, pi_prime: MomentModel) -> float:
    """2-Wasserstein distance between the joint zero-mean Gaussians of (x, y)."""
    def joint_cov(m: MomentModel) -> np.ndarray:
        sxx = m.sigma_xx
        ax = a @ sxx
        syy = ax @ a.T + m.noise_var * np.eye(a.shape[0])
        top = np.hstack([sxx, ax.T])
        bot = np.hstack([ax, syy])
        return np.vstack([top, bot])

    def psd_sqrt(mat: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)) @ vecs.T

    s1, s2 = joint_cov(pi), joint_cov(pi_prime)
    r2 = psd_sqrt(s2)
    cross = psd_sqrt(r2 @ s1 @ r2)
    w2sq = float(np.trace(s1) + np.trace(s2) - 2.0 * np.trace(cross))
    return float(np.sqrt(max(w2sq, 0.0)))


@dataclass(frozen=True)
class StabilityTable:
    lambdas: np.ndarray
    gaps: np.ndarray
    w2: float


def stability_probe(a: np.ndarray, pi: MomentModel, pi_prime: MomentModel,
                    lambda_grid) -> StabilityTable:
    """Frobenius gap between the optimal operators of two data models, per lam."""
    lambdas = np.asarray(list(lambda_grid), dtype=np.float64)
    gaps = np.zeros_like(lambdas)
    for i, lam in enumerate(lambdas):
        b1 = solve_optimal_B_model(a, pi, float(lam))
        b2 = solve_optimal_B_model(a, pi_prime, float(lam))
        gaps[i] = np.linalg.norm(b1 - b2)
    return StabilityTable(lambdas=lambdas, gaps=gaps, w2=gaussian_w2(a, pi, pi_prime))


def fit_dense_operator(a: np.ndarray, xs, ys, lam: float, n_iters: int = 5000) -> np.ndarray:
    """Train an unstructured dense B on the empirical objective.

    Minimizes ``K^-1 sum_i ||A^T B y_i - x_i||^2 + lam ||B||_F^2`` from B = 0
    by Nesterov-accelerated gradient descent with step ``1/L``; the iterative
    route to the same optimum as :func:`solve_optimal_B` with empirical
    moments. Deterministic.
    """
    a = np.asarray(a, dtype=np.float64)
    x = np.stack([np.asarray(v, dtype=np.float64).reshape(-1) for v in xs], axis=1)
    y = np.stack([np.asarray(v, dtype=np.float64).reshape(-1) for v in ys], axis=1)
    k = y.shape[1]
    aat = a @ a.T
    yyk = (y @ y.T) / k
    lip = 2.0 * np.linalg.norm(aat, 2) * np.linalg.norm(yyk, 2) + 2.0 * lam
    step = 1.0 / lip
    m = a.shape[0]
    b = np.zeros((m, m))
    b_prev = b.copy()
    t_mom = 1.0
    for _ in range(n_iters):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom**2))
        z = b + ((t_mom - 1.0) / t_next) * (b - b_prev)
        resid = a.T @ z @ y - x
        grad = (2.0 / k) * (a @ resid @ y.T) + 2.0 * lam * z
        b_prev = b
        b = z - step * grad
        t_mom = t_next
    return b
