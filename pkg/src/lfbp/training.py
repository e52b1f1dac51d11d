"""Training of filter gains and weights by analytic adjoint gradients + Adam.

The objective is the mean squared reconstruction error over a training set,

    K^-1 sum_i || A^T B(p) y_i - x_i ||^2  +  lam * rho(p),

with ``rho`` a forward-difference smoothness penalty on the stored
half-spectrum gains (no wrap across the half-spectrum boundary) and on each
view's spatial weights (no cross-view differences).

Gradients are exact: with residual ``r_i = A^T B y_i - x_i`` and its forward
projection ``s_i = A r_i``, the gain gradient at full-spectrum bin j of a view
is ``(2/L) Re[conj(FFT s_i) * FFT(w .* y_i)]_j`` (L = FFT length), folded onto
the stored half-spectrum; the weight gradient is ``2 y_i .* C s_i`` with C the
(symmetric) filtering stage. Everything is deterministic given the config.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .filters import (FilterParams, apply_spectral, apply_weights, classical_params,
                      identity_params, _fold_idx, _standard_profile)
from .geometry import Geometry, GeometryKind
from .phantom import Dataset
from .projector import back_project, forward_project


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run.

    ``batch_size=None`` trains full-batch. ``init`` selects the starting
    operator: ``"ramp"`` = classical filter + standard weights (the classical
    FBP/FDK operator), ``"ones"`` = identity gains/weights, ``"zeros"`` = zero
    gains with standard weights.
    """

    lam: float = 1e-3
    lr: float = 1e-2
    n_iters: int = 100
    batch_size: int | None = None
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init: str = "ramp"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.n_iters < 1:
            raise ValueError("n_iters must be >= 1")
        if self.init not in ("ramp", "ones", "zeros"):
            raise ValueError(f"unknown init kind {self.init!r}")


@dataclass
class TrainReport:
    """Loss trace and result of :func:`train`.

    ``data_loss[t]`` and ``penalty[t]`` are the two objective terms (penalty
    already multiplied by lam) evaluated on iteration t's batch before the
    update; their sum is the objective value.
    """

    data_loss: np.ndarray
    penalty: np.ndarray
    params: FilterParams
    wall_clock: float


def smoothness_penalty(params: FilterParams) -> tuple[float, np.ndarray, np.ndarray | None]:
    """Forward-difference penalty and its analytic gradient.

    Returns ``(value, grad_filter_half, grad_weights)``; differences run along
    frequency axes of the stored half-spectrum and along the spatial axes of
    each view's weights.
    """
    half = params.filter_half
    gf = np.zeros_like(half)
    value = 0.0
    freq_axes = (1, 2) if params.kind is GeometryKind.LAMINOGRAPHY_3D else (half.ndim - 1,)
    for ax in freq_axes:
        d = np.diff(half, axis=ax)
        value += float(np.sum(d * d))
        sl_lo = [slice(None)] * half.ndim
        sl_hi = [slice(None)] * half.ndim
        sl_lo[ax] = slice(None, -1)
        sl_hi[ax] = slice(1, None)
        gf[tuple(sl_lo)] -= 2.0 * d
        gf[tuple(sl_hi)] += 2.0 * d
    gw = None
    if params.weights is not None:
        w = params.weights
        gw = np.zeros_like(w)
        if params.kind is GeometryKind.FAN_2D:
            space_axes = (0,)
        elif params.kind is GeometryKind.ELLIPTICAL_FAN_2D:
            space_axes = (1,)
        else:
            space_axes = (1, 2)
        for ax in space_axes:
            d = np.diff(w, axis=ax)
            value += float(np.sum(d * d))
            sl_lo = [slice(None)] * w.ndim
            sl_hi = [slice(None)] * w.ndim
            sl_lo[ax] = slice(None, -1)
            sl_hi[ax] = slice(1, None)
            gw[tuple(sl_lo)] -= 2.0 * d
            gw[tuple(sl_hi)] += 2.0 * d
    return value, gf, gw


def _fold_filter_grad(params: FilterParams, grad_full: np.ndarray) -> np.ndarray:
    """Fold a full-spectrum gain gradient onto the half-spectrum storage."""
    out = np.zeros_like(params.filter_half)
    if params.kind is GeometryKind.LAMINOGRAPHY_3D:
        _, d1, d2 = params.filter_shape
        np.add.at(out, (slice(None), _fold_idx(d1)[:, None], _fold_idx(d2)[None, :]), grad_full)
    else:
        d = params.filter_shape[-1]
        if grad_full.ndim == 1:
            np.add.at(out, _fold_idx(d), grad_full)
        else:
            np.add.at(out, (slice(None), _fold_idx(d)), grad_full)
    return out


def loss_and_grad(params: FilterParams, geom: Geometry, xs, ys,
                  lam: float) -> tuple[float, FilterParams]:
    """Objective value and exact gradient on a batch of (x, y) pairs.

    The gradient is returned as a :class:`FilterParams` holding the gradient
    arrays in the same storage layout as ``params``.
    """
    if len(xs) == 0 or len(xs) != len(ys):
        raise ValueError("batch must be nonempty with matched x/y pairs")
    k = len(xs)
    gf_full = None
    gw = None if params.weights is None else np.zeros_like(params.weights)
    data = 0.0
    for x, y in zip(xs, ys):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != geom.stack_shape:
            raise ValueError("measurement shape does not match geometry")
        wy = apply_weights(params, y)
        z = apply_spectral(params, wy)
        r = back_project(geom, z) - np.asarray(x, dtype=np.float64)
        data += float(np.sum(r * r))
        s = forward_project(geom, r)
        if params.kind is GeometryKind.LAMINOGRAPHY_3D:
            d1, d2 = params.filter_shape[1:]
            gs = np.fft.fft2(s, axes=(1, 2))
            gy = np.fft.fft2(wy, axes=(1, 2))
            term = 2.0 * np.real(np.conj(gs) * gy) / (d1 * d2)
        else:
            d = params.filter_shape[-1]
            gs = np.fft.fft(s, axis=1)
            gy = np.fft.fft(wy, axis=1)
            term = 2.0 * np.real(np.conj(gs) * gy) / d
            if params.kind in (GeometryKind.PARALLEL_2D, GeometryKind.FAN_2D):
                term = term.sum(axis=0)
        gf_full = term if gf_full is None else gf_full + term
        if gw is not None:
            t = apply_spectral(params, s)
            wterm = 2.0 * y * t
            if params.kind is GeometryKind.FAN_2D:
                wterm = wterm.sum(axis=0)
            gw += wterm
    data /= k
    gf = _fold_filter_grad(params, gf_full / k)
    if gw is not None:
        gw /= k
    pen, pgf, pgw = smoothness_penalty(params)
    gf += lam * pgf
    if gw is not None:
        gw += lam * pgw
    loss = data + lam * pen
    if not (np.isfinite(loss) and np.isfinite(gf).all()
            and (gw is None or np.isfinite(gw).all())):
        raise NumericalError("non-finite loss or gradient (operator diverged)")
    grad = FilterParams(kind=params.kind, filter_shape=params.filter_shape,
                        filter_half=gf, weights=gw)
    return loss, grad


def initial_params(config: TrainConfig, geom: Geometry) -> FilterParams:
    if config.init == "ramp":
        return classical_params(geom)
    if config.init == "ones":
        return identity_params(geom)
    ramp = classical_params(geom)
    return FilterParams(kind=geom.kind, filter_shape=ramp.filter_shape,
                        filter_half=np.zeros_like(ramp.filter_half),
                        weights=None if ramp.weights is None else _standard_profile(geom))


def train(config: TrainConfig, geom: Geometry, dataset: Dataset,
          init_params: FilterParams | None = None) -> TrainReport:
    """Minimize the training objective with Adam.

    Mini-batches are drawn by seeded shuffling (a fresh permutation per epoch);
    filter symmetry is preserved structurally by the half-spectrum storage.
    ``init_params`` overrides the config's init kind, e.g. to continue a
    previous run at a lower learning rate.

    Raises
    ------
    NumericalError
        If the objective becomes non-finite (divergence guard).
    """
    if dataset.geometry != geom:
        raise ValueError("dataset geometry does not match")
    k = len(dataset)
    batch = k if config.batch_size is None else int(config.batch_size)
    if not (1 <= batch <= k):
        raise ValueError(f"batch_size must lie in [1, {k}]")
    params = initial_params(config, geom) if init_params is None else init_params

    t_start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    order: list[int] = []
    mf = np.zeros_like(params.filter_half)
    vf = np.zeros_like(params.filter_half)
    mw = vw = None
    if params.weights is not None:
        mw = np.zeros_like(params.weights)
        vw = np.zeros_like(params.weights)
    data_hist = np.zeros(config.n_iters)
    pen_hist = np.zeros(config.n_iters)

    fh = params.filter_half.copy()
    w = None if params.weights is None else params.weights.copy()
    for t in range(config.n_iters):
        if len(order) < batch:
            order = list(rng.permutation(k))
        idx = [order.pop(0) for _ in range(batch)]
        cur = FilterParams(kind=params.kind, filter_shape=params.filter_shape,
                           filter_half=fh, weights=w)
        loss, grad = loss_and_grad(cur, geom, [dataset.xs[i] for i in idx],
                                   [dataset.ys[i] for i in idx], config.lam)
        if not np.isfinite(loss):
            raise NumericalError(f"training diverged at iteration {t}: loss={loss}")
        lam_pen = config.lam * smoothness_penalty(cur)[0]
        pen_hist[t] = lam_pen
        data_hist[t] = loss - lam_pen

        step = config.lr * np.sqrt(1.0 - config.beta2 ** (t + 1)) / (1.0 - config.beta1 ** (t + 1))
        mf = config.beta1 * mf + (1.0 - config.beta1) * grad.filter_half
        vf = config.beta2 * vf + (1.0 - config.beta2) * grad.filter_half**2
        fh = fh - step * mf / (np.sqrt(vf) + config.eps)
        diverged = not np.isfinite(fh).all()
        if w is not None:
            mw = config.beta1 * mw + (1.0 - config.beta1) * grad.weights
            vw = config.beta2 * vw + (1.0 - config.beta2) * grad.weights**2
            w = w - step * mw / (np.sqrt(vw) + config.eps)
            diverged = diverged or not np.isfinite(w).all()
        if diverged:
            raise NumericalError(f"training diverged at iteration {t}: non-finite parameters")

    final = FilterParams(kind=params.kind, filter_shape=params.filter_shape,
                         filter_half=fh, weights=w)
    return TrainReport(data_loss=data_hist, penalty=pen_hist, params=final,
                       wall_clock=time.perf_counter() - t_start)
