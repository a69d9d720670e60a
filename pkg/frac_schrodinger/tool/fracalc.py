"""Fractional calculus on uniform time grids.

    J^alpha v(t) = 1/Gamma(alpha) int_0^t (t-s)^{alpha-1} v(s) ds

rl_integral uses product integration (piecewise-linear data, singular weight
integrated exactly); inverse_rl solves the same lower-triangular system by
forward substitution, so the two are exact discrete inverses. The L1 scheme
(caputo_derivative) is an independent discretisation of d^alpha (u - u0).

All *_array helpers act along the last axis, so a modes x nodes array is
processed in one call.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import integrate, signal, special

log = logging.getLogger("frac-schrodinger.fracalc")

ORIGINS = ("zero", "linear")
# Rows beyond which causal convolutions switch to FFT
DIRECT_ROWS = 8


# --- Custom Exceptions ---

class FracCalcError(ValueError):
    """Invalid input to a fractional-calculus operation."""
    pass


class GammaOverflowError(FracCalcError):
    """n * alpha too large for the closed-form power-kernel convolution."""
    pass


# --- Grid and trajectories ---

@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition t_k = k T / N of [0, T]."""
    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0.0:
            raise FracCalcError(f"horizon T must be positive: got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise FracCalcError(f"steps N must be a positive integer: got {self.N}")

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.T, self.N * factor)

    def with_horizon(self, T: float) -> "TimeGrid":
        return TimeGrid(T, self.N)


@dataclass(frozen=True)
class Trajectory:
    """One scalar mode sampled on a grid."""
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.N + 1,):
            raise FracCalcError(
                f"trajectory has shape {values.shape}, grid needs ({self.grid.N + 1},)"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, grid: TimeGrid, func) -> "Trajectory":
        return cls(grid, func(grid.nodes))


def _check_alpha(alpha: float, upper_closed: bool = False) -> None:
    ok = 0.0 < alpha <= 1.0 if upper_closed else 0.0 < alpha < 1.0
    if not ok:
        interval = "(0,1]" if upper_closed else "(0,1)"
        raise FracCalcError(f"alpha must lie in {interval}: got {alpha}")


# --- Weights ---

def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=64)
def rl_weights(alpha: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Product-integration weights (times Gamma(alpha+2)/h^alpha).

    Returns:
        (a0, c): a0[k] multiplies v_0 in row k; c[k-j] multiplies v_j, j >= 1
    """
    s = alpha + 1.0
    k = np.arange(1, n + 1, dtype=float)
    a0 = np.zeros(n + 1)
    a0[1:] = k ** s * (np.expm1(s * np.log1p(-1.0 / k)) + s / k)
    a0[1] = alpha
    c = np.empty(n + 1)
    c[0] = 1.0
    with np.errstate(divide="ignore"):
        c[1:] = k ** s * (np.expm1(s * np.log1p(1.0 / k))
                          + np.expm1(s * np.log1p(-1.0 / k)))
    return _frozen(a0), _frozen(c)


@lru_cache(maxsize=64)
def rl_inverse_kernel(alpha: float, n: int) -> np.ndarray:
    """First column of the inverse of the Toeplitz part of rl_weights."""
    _, c = rl_weights(alpha, n)
    d = np.zeros(n + 1)
    d[0] = 1.0
    for k in range(1, n + 1):
        d[k] = -np.dot(c[1:k + 1], d[k - 1::-1])
    return _frozen(d)


@lru_cache(maxsize=64)
def l1_weights(alpha: float, n: int) -> np.ndarray:
    """b_j = (j+1)^{1-alpha} - j^{1-alpha}, j = 0..n-1."""
    s = 1.0 - alpha
    b = np.empty(n)
    b[0] = 1.0
    j = np.arange(1, n, dtype=float)
    b[1:] = j ** s * np.expm1(s * np.log1p(1.0 / j))
    return _frozen(b)


def causal_convolve(kernel: np.ndarray, values: np.ndarray) -> np.ndarray:
    """out[..., k] = sum_{j<=k} kernel[j] values[..., k-j], along the last axis."""
    values = np.asarray(values)
    n = values.shape[-1]
    kernel = np.asarray(kernel)[:n]
    if values.ndim == 1:
        return np.convolve(kernel, values)[:n]
    flat = values.reshape(-1, n)
    if flat.shape[0] <= DIRECT_ROWS:
        out = np.stack([np.convolve(kernel, row)[:n] for row in flat])
    else:
        out = signal.fftconvolve(flat, kernel[None, :], axes=-1)[:, :n]
    return out.reshape(values.shape)


# --- Array operations ---

def rl_integral_array(alpha: float, values: np.ndarray, h: float) -> np.ndarray:
    _check_alpha(alpha, upper_closed=True)
    values = np.asarray(values)
    n = values.shape[-1] - 1
    a0, c = rl_weights(alpha, n)
    first = values[..., :1]
    acc = causal_convolve(c, values) + (a0 - c) * first
    return acc * (h ** alpha / special.gamma(alpha + 2.0))


def _linear_origin(alpha: float, r: np.ndarray) -> np.ndarray:
    a0, c = rl_weights(alpha, 2)
    a01, a02, c0, c1 = a0[1], a0[2], c[0], c[1]
    r1, r2 = r[..., 1], r[..., 2]
    det = (2 * a01 + c0) * (c0 - a02) + a01 * (2 * a02 + c1)
    w1 = (r1 * (c0 - a02) + a01 * r2) / det
    w2 = ((2 * a01 + c0) * r2 - (2 * a02 + c1) * r1) / det
    return 2 * w1 - w2


def inverse_rl_array(alpha: float, values: np.ndarray, h: float,
                     origin: str = "zero") -> np.ndarray:
    """Solve rl_integral(alpha, w) = values for w by forward substitution.

    Row 0 of the product-integration system is identically zero, so w_0 is
    fixed by `origin`: "zero" sets w_0 = 0 (exact inverse for preimages with
    w(0) = 0), "linear" imposes w_0 = 2 w_1 - w_2 (exact for affine preimages).
    """
    _check_alpha(alpha, upper_closed=True)
    if origin not in ORIGINS:
        raise FracCalcError(f"origin must be one of {ORIGINS}: got {origin!r}")
    values = np.asarray(values, dtype=complex)
    n = values.shape[-1] - 1
    if origin == "linear" and n < 2:
        raise FracCalcError("linear origin needs at least two steps")
    a0, _ = rl_weights(alpha, n)
    d = rl_inverse_kernel(alpha, n)
    r = values * (special.gamma(alpha + 2.0) / h ** alpha)
    w0 = np.zeros(values.shape[:-1], dtype=complex) if origin == "zero" \
        else _linear_origin(alpha, r)
    rhs = r[..., 1:] - a0[1:] * w0[..., None]
    w = np.empty_like(values)
    w[..., 0] = w0
    w[..., 1:] = causal_convolve(d, rhs)
    return w


def caputo_array(alpha: float, values: np.ndarray, u0, h: float) -> np.ndarray:
    """L1 scheme for d^alpha (u - u0); node 0 copies node 1."""
    _check_alpha(alpha)
    values = np.asarray(values, dtype=complex)
    n = values.shape[-1] - 1
    start = np.asarray(u0, dtype=complex)
    mismatch = np.max(np.abs(values[..., 0] - start))
    if mismatch > 1e-10:
        log.warning("u(t_0) differs from u0 by %.3g; using u0 as the initial value",
                    mismatch)
    shifted = values.copy()
    shifted[..., 0] = start
    delta = np.diff(shifted, axis=-1)
    b = l1_weights(alpha, n)
    out = np.empty_like(values)
    out[..., 1:] = causal_convolve(b, delta) * (h ** -alpha / special.gamma(2.0 - alpha))
    out[..., 0] = out[..., 1]
    return out


def lp_norm_array(p: float, values: np.ndarray, h: float) -> np.ndarray:
    mags = np.abs(np.asarray(values))
    if math.isinf(p):
        return mags.max(axis=-1)
    return integrate.trapezoid(mags ** p, dx=h, axis=-1) ** (1.0 / p)


# --- Trajectory operations ---

def rl_integral(alpha: float, v: Trajectory) -> Trajectory:
    """J^alpha v at every node; exact for piecewise-linear v."""
    return Trajectory(v.grid, rl_integral_array(alpha, v.values, v.grid.h))


def caputo_derivative(alpha: float, u: Trajectory, u0: complex) -> Trajectory:
    return Trajectory(u.grid, caputo_array(alpha, u.values, u0, u.grid.h))


def inverse_rl(alpha: float, v: Trajectory, origin: str = "zero") -> Trajectory:
    """J^{-alpha} v; warns when v(0) is not small or the round trip drifts."""
    _check_alpha(alpha)
    scale = max(np.max(np.abs(v.values)), np.finfo(float).tiny)
    if abs(v.values[0]) > 1e-6 * scale:
        log.warning("v(0)=%.3g is not small; J^alpha images vanish at t=0",
                    abs(v.values[0]))
    w = inverse_rl_array(alpha, v.values, v.grid.h, origin)
    back = rl_integral_array(alpha, w, v.grid.h)
    residual = np.max(np.abs(back[1:] - v.values[1:])) / scale
    if residual > 1e-6:
        log.warning("inverse_rl round-trip residual %.3g (ill-conditioned input)",
                    residual)
    return Trajectory(v.grid, w)


def lp_norm(p: float, v: Trajectory) -> float:
    """Composite-trapezoid L^p norm over [0, T]; max over nodes for p = inf."""
    if p < 1.0:
        raise FracCalcError(f"p must be at least 1: got {p}")
    return float(lp_norm_array(p, v.values, v.grid.h))


def weak_lp_quasinorm(p: float, v: Trajectory) -> float:
    """sup_lam lam |{|v| > lam}|^{1/p}, nodes 1..N read as piecewise constant."""
    if p < 1.0:
        raise FracCalcError(f"p must be at least 1: got {p}")
    mags = np.sort(np.abs(v.values[1:]))[::-1]
    measure = np.arange(1, mags.size + 1) * v.grid.h
    return float(np.max(mags * measure ** (1.0 / p)))


def waps_norm(alpha: float, p: float, v: Trajectory, origin: str = "linear") -> float:
    """||J^{-alpha} v||_{L^p}."""
    return lp_norm(p, inverse_rl(alpha, v, origin))


# --- Power kernel ---

def power_kernel_selfconv(alpha: float, n: int, t: float) -> float:
    """k_alpha^{*n}(t) = Gamma(alpha)^n / Gamma(n alpha) t^{n alpha - 1}, k_alpha = t^{alpha-1}."""
    if n < 1:
        raise FracCalcError("n must be a positive integer")
    if t <= 0.0:
        raise FracCalcError("t must be positive")
    if n * alpha > 170.0:
        raise GammaOverflowError(f"n*alpha={n * alpha:g} exceeds 170")
    log_value = (n * special.gammaln(alpha) - special.gammaln(n * alpha)
                 + (n * alpha - 1.0) * math.log(t))
    return math.exp(log_value)


def discrete_selfconv(alpha: float, n: int, grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """n-fold self-convolution of k_alpha on cell averages.

    Each factor is held as cell averages and convolved against the exact
    kernel mass of every cell; results live at the cell midpoints.

    Returns:
        (midpoints, values)
    """
    if n < 1:
        raise FracCalcError("n must be a positive integer")
    h = grid.h
    j = np.arange(grid.N, dtype=float)
    mids = (j + 0.5) * h
    current = ((j + 1.0) ** alpha - j ** alpha) * h ** (alpha - 1.0) / alpha
    if n == 1:
        return mids, mids ** (alpha - 1.0)
    weights = np.empty(grid.N)
    weights[0] = (0.5 * h) ** alpha / alpha
    weights[1:] = ((j[1:] + 0.5) ** alpha - (j[1:] - 0.5) ** alpha) * h ** alpha / alpha
    for _ in range(n - 1):
        current = causal_convolve(weights, current)
    return mids, current
