"""Linear solution operators for d^alpha (u - u0) - i A u = f.

Per mode n (A phi_n = -lambda_n phi_n):

    u_n(t) = u0_n E_{alpha,1}(-i lambda_n t^alpha)
             + int_0^t k_n(t - s) f_n(s) ds,
    k_n(s) = s^{alpha-1} E_{alpha,alpha}(-i lambda_n s^alpha)

On a uniform grid the convolution weights depend on lag only, so one
modes x lags table per (alpha, grid, operator, quadrature) serves every solve.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import signal

from .fracalc import TimeGrid
from .mlf import MLParams, ml_eval_array
from .spectral import (DiagonalOperator, ShapeMismatchError, SpectralField,
                       SpectralVector)

QUADRATURES = ("moments", "midpoint")

log = logging.getLogger("frac-schrodinger.solver")


# --- Custom Exceptions ---

class SolverError(ValueError):
    """Invalid solver configuration or input."""
    pass


# --- Configuration ---

@dataclass(frozen=True)
class SolveConfig:
    alpha: float
    grid: TimeGrid
    operator: DiagonalOperator
    quadrature: str = "moments"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise SolverError(f"alpha must lie in (0,1): got {self.alpha}")
        if self.quadrature not in QUADRATURES:
            raise SolverError(f"quadrature must be one of {QUADRATURES}: got {self.quadrature!r}")

    def with_grid(self, grid: TimeGrid) -> "SolveConfig":
        return SolveConfig(self.alpha, grid, self.operator, self.quadrature)

    def with_operator(self, operator: DiagonalOperator) -> "SolveConfig":
        return SolveConfig(self.alpha, self.grid, operator, self.quadrature)


# --- Kernel ---

def kernel_values(alpha: float, lam: float, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape, dtype=complex)
    positive = s > 0.0
    if positive.any():
        sp = s[positive]
        out[positive] = sp ** (alpha - 1.0) * ml_eval_array(
            MLParams(alpha, alpha), -1j * lam * sp ** alpha)
    return out


def kernel_mode(alpha: float, lam: float, s: float) -> complex:
    """k(s) = s^{alpha-1} E_{alpha,alpha}(-i lam s^alpha) for s > 0, else 0."""
    return complex(kernel_values(alpha, lam, np.array([s]))[0])


def kernel_apply(cfg: SolveConfig, s: float, x: SpectralVector) -> SpectralVector:
    """K(s) x, diagonal in the eigenbasis."""
    if x.M != cfg.operator.M:
        raise ShapeMismatchError(f"vector has {x.M} modes, operator has {cfg.operator.M}")
    if s <= 0.0:
        return SpectralVector.zeros(x.M)
    factors = np.array([kernel_mode(cfg.alpha, lam, s) for lam in cfg.operator.eigenvalues])
    return SpectralVector(factors * x.coeffs)


# --- Cached tables ---

def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@lru_cache(maxsize=16)
def propagator_table(alpha: float, T: float, N: int,
                     eigenvalues: Tuple[float, ...]) -> np.ndarray:
    """E_{alpha,1}(-i lambda_n t_k^alpha), modes x nodes."""
    lam = np.asarray(eigenvalues)[:, None]
    t = TimeGrid(T, N).nodes
    return _frozen(ml_eval_array(MLParams(alpha, 1.0), -1j * lam * t ** alpha))


@lru_cache(maxsize=16)
def duhamel_weights(alpha: float, h: float, N: int, eigenvalues: Tuple[float, ...],
                    quadrature: str = "moments") -> Tuple[np.ndarray, np.ndarray]:
    """Cell weights (a, b), modes x N, for piecewise-linear f.

        u_k = sum_{m<k} a_m f_{k-m} + b_m f_{k-m-1}

    "moments" integrates the kernel exactly against the linear pieces using
    the primitives P(x) = x^alpha E_{alpha,alpha+1} and
    Q(x) = x^{alpha+1} E_{alpha,alpha+2} (Q' = P, P' = k). "midpoint" freezes
    E_{alpha,alpha} at the cell midpoint and integrates x^{alpha-1} exactly.
    Zero eigenvalues are allowed and reduce both to the J^alpha weights.
    """
    lam = np.asarray(eigenvalues, dtype=float)[:, None]
    m = np.arange(N + 1, dtype=float)
    if quadrature == "moments":
        x = m * h
        z = -1j * lam * x ** alpha
        prim = x ** alpha * ml_eval_array(MLParams(alpha, alpha + 1.0), z)
        prim2 = x ** (alpha + 1.0) * ml_eval_array(MLParams(alpha, alpha + 2.0), z)
        mean = np.diff(prim2, axis=-1) / h
        a = mean - prim[:, :-1]
        b = prim[:, 1:] - mean
    elif quadrature == "midpoint":
        lo, hi = m[:-1], m[1:]
        mid = (lo + 0.5) * h
        frozen = ml_eval_array(MLParams(alpha, alpha), -1j * lam * mid ** alpha)
        w0 = (hi ** alpha - lo ** alpha) / alpha
        w1 = (hi ** (alpha + 1.0) - lo ** (alpha + 1.0)) / (alpha + 1.0) - lo * w0
        a = frozen * (h ** alpha * (w0 - w1))
        b = frozen * (h ** alpha * w1)
    else:
        raise SolverError(f"quadrature must be one of {QUADRATURES}: got {quadrature!r}")
    log.debug("Built %s weights: %d modes x %d lags", quadrature, lam.shape[0], N)
    return _frozen(np.asarray(a, dtype=complex)), _frozen(np.asarray(b, dtype=complex))


def convolve_weights(a: np.ndarray, b: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Apply cell weights from duhamel_weights to modes x nodes data; u_0 = 0."""
    n = values.shape[-1] - 1
    out = np.zeros(values.shape, dtype=complex)
    if n == 0:
        return out
    head = signal.fftconvolve(a, values[:, 1:], axes=-1)[:, :n]
    tail = signal.fftconvolve(b, values[:, :-1], axes=-1)[:, :n]
    out[:, 1:] = head + tail
    return out


# --- Solves ---

def solve_homogeneous(cfg: SolveConfig, u0: SpectralVector) -> SpectralField:
    """u_n(t_k) = u0_n E_{alpha,1}(-i lambda_n t_k^alpha)."""
    if u0.M != cfg.operator.M:
        raise ShapeMismatchError(f"u0 has {u0.M} modes, operator has {cfg.operator.M}")
    table = propagator_table(cfg.alpha, cfg.grid.T, cfg.grid.N, cfg.operator.eigenvalues)
    return SpectralField(cfg.grid, u0.coeffs[:, None] * table)


def solve_inhomogeneous(cfg: SolveConfig, f: SpectralField) -> SpectralField:
    """Duhamel convolution int_0^t K(t-s) f(s) ds with u(0) = 0."""
    if f.grid != cfg.grid:
        raise ShapeMismatchError("forcing lives on a different grid than the solve")
    if f.M != cfg.operator.M:
        raise ShapeMismatchError(f"forcing has {f.M} modes, operator has {cfg.operator.M}")
    a, b = duhamel_weights(cfg.alpha, cfg.grid.h, cfg.grid.N,
                           cfg.operator.eigenvalues, cfg.quadrature)
    return SpectralField(cfg.grid, convolve_weights(a, b, f.coeffs))


def solve_full(cfg: SolveConfig, u0: SpectralVector, f: SpectralField) -> SpectralField:
    return solve_homogeneous(cfg, u0) + solve_inhomogeneous(cfg, f)
