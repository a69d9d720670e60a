"""Diagonal operators and the spectral Hilbert-space layer.

A acts on eigenbasis coefficients as multiplication by -lambda_n with
0 < lambda_1 <= ... <= lambda_M. The interpolation space between H and D(A)
is realised through the quadratic K-functional of the diagonal couple.
"""
import logging
import math
import re
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import fft, integrate

from .fracalc import TimeGrid, Trajectory

DIRICHLET_1D = "dirichlet_laplacian_1d"
INTERP_POINTS = 400
INTERP_WINDOW = 1.0e3
INTERP_TAIL_WARN = 0.01

log = logging.getLogger("frac-schrodinger.spectral")

_FAMILY_RE = re.compile(r"^\s*dirichlet_laplacian_1d\s*(?:\(\s*(\d+)\s*\))?\s*$")


# --- Custom Exceptions ---

class SpectralError(ValueError):
    """Base exception for the spectral layer."""
    pass


class ShapeMismatchError(SpectralError):
    """Coefficient count does not match the operator."""
    pass


class SpectrumHitError(SpectralError):
    """Resolvent requested at (or next to) a point of the spectrum."""
    pass


class InterpolationPreconditionError(SpectralError):
    """alpha * p must exceed 1 for the interpolation norm."""
    pass


# --- Operator ---

@dataclass(frozen=True)
class DiagonalOperator:
    """-A = diag(lambda_1, ..., lambda_M).

    family names the model the eigenvalues came from, so refine() can extend
    the truncation.
    """
    eigenvalues: Tuple[float, ...]
    family: Optional[str] = None

    def __post_init__(self):
        values = tuple(float(v) for v in self.eigenvalues)
        object.__setattr__(self, "eigenvalues", values)
        if not values:
            raise SpectralError("operator needs at least one eigenvalue")
        if not all(math.isfinite(v) and v > 0.0 for v in values):
            raise SpectralError("eigenvalues must be finite and strictly positive")
        if any(b < a for a, b in zip(values, values[1:])):
            raise SpectralError("eigenvalues must be nondecreasing")

    @classmethod
    def dirichlet_laplacian_1d(cls, M: int) -> "DiagonalOperator":
        """lambda_n = (n pi)^2, n = 1..M: -d^2/dx^2 on (0,1) with Dirichlet ends."""
        if M < 1:
            raise SpectralError(f"M must be at least 1: got {M}")
        n = np.arange(1, M + 1, dtype=float)
        return cls(tuple((n * np.pi) ** 2), DIRICHLET_1D)

    @classmethod
    def from_spec(cls, text: str, M: Optional[int] = None) -> "DiagonalOperator":
        """Parse "dirichlet_laplacian_1d(M)", bare "dirichlet_laplacian_1d" or "1, 4, 9"."""
        match = _FAMILY_RE.match(text)
        if match:
            size = int(match.group(1)) if match.group(1) else M
            if size is None:
                raise SpectralError(f"{DIRICHLET_1D} needs a mode count")
            return cls.dirichlet_laplacian_1d(size)
        try:
            values = tuple(float(part) for part in text.split(",") if part.strip())
        except ValueError:
            raise SpectralError(f"cannot parse operator spec '{text}'") from None
        return cls(values)

    @property
    def M(self) -> int:
        return len(self.eigenvalues)

    @property
    def lam(self) -> np.ndarray:
        return np.asarray(self.eigenvalues)

    def refine(self, factor: int = 2) -> "DiagonalOperator":
        if self.family != DIRICHLET_1D:
            raise SpectralError("only named operator families can be refined")
        return DiagonalOperator.dirichlet_laplacian_1d(self.M * factor)

    def shifted(self, c: float) -> "DiagonalOperator":
        """Eigenvalues lambda_n + c."""
        return DiagonalOperator(tuple(self.lam + c))

    def spec(self) -> str:
        if self.family == DIRICHLET_1D:
            return f"{DIRICHLET_1D}({self.M})"
        return ",".join(repr(v) for v in self.eigenvalues)


# --- Vectors and fields ---

@dataclass(frozen=True)
class SpectralVector:
    """Coefficients <x, phi_n>, n = 1..M."""
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.ndim != 1:
            raise ShapeMismatchError(f"expected a 1-D coefficient array: got {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def basis(cls, M: int, n: int) -> "SpectralVector":
        """Unit vector phi_n (1-based)."""
        coeffs = np.zeros(M, dtype=complex)
        coeffs[n - 1] = 1.0
        return cls(coeffs)

    @classmethod
    def zeros(cls, M: int) -> "SpectralVector":
        return cls(np.zeros(M, dtype=complex))

    @property
    def M(self) -> int:
        return self.coeffs.size


@dataclass(frozen=True)
class SpectralField:
    """Trajectory in H: modes x time nodes."""
    grid: TimeGrid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.ndim != 2 or coeffs.shape[1] != self.grid.N + 1:
            raise ShapeMismatchError(
                f"field has shape {coeffs.shape}, grid needs (M, {self.grid.N + 1})"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, grid: TimeGrid, M: int) -> "SpectralField":
        return cls(grid, np.zeros((M, grid.N + 1), dtype=complex))

    @property
    def M(self) -> int:
        return self.coeffs.shape[0]

    def at(self, k: int) -> SpectralVector:
        return SpectralVector(self.coeffs[:, k])

    def mode(self, n: int) -> Trajectory:
        """Mode n (1-based) as a scalar trajectory."""
        return Trajectory(self.grid, self.coeffs[n - 1])

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def scaled(self, c: complex) -> "SpectralField":
        return SpectralField(self.grid, c * self.coeffs)


def _check_same(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid or a.coeffs.shape != b.coeffs.shape:
        raise ShapeMismatchError("fields live on different grids or mode counts")


def _check_modes(A: DiagonalOperator, M: int) -> None:
    if M != A.M:
        raise ShapeMismatchError(f"vector has {M} modes, operator has {A.M}")


# --- Operations ---

def apply_A(A: DiagonalOperator, x: SpectralVector) -> SpectralVector:
    _check_modes(A, x.M)
    return SpectralVector(-A.lam * x.coeffs)


def resolvent(A: DiagonalOperator, z: complex, x: SpectralVector) -> SpectralVector:
    """R(z, A) x = (z - A)^{-1} x."""
    _check_modes(A, x.M)
    denom = z + A.lam
    if np.min(np.abs(denom)) < 1e-14 * abs(z):
        raise SpectrumHitError(f"z={z} lies on the spectrum of A")
    return SpectralVector(x.coeffs / denom)


def h_norm(x: SpectralVector) -> float:
    return float(np.linalg.norm(x.coeffs))


def da_norm(A: DiagonalOperator, x: SpectralVector) -> float:
    """||A x||."""
    _check_modes(A, x.M)
    return float(np.linalg.norm(A.lam * x.coeffs))


def field_norms(values: np.ndarray) -> np.ndarray:
    """H-norm at every time node of a modes x nodes array."""
    return np.linalg.norm(values, axis=0)


def field_da_norms(A: DiagonalOperator, values: np.ndarray) -> np.ndarray:
    return np.linalg.norm(A.lam[:, None] * values, axis=0)


def k_functional(A: DiagonalOperator, x: SpectralVector,
                 t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """K_2(t, x; H, D(A)) = (sum |x_n|^2 (t lam_n)^2 / (1 + (t lam_n)^2))^{1/2}."""
    _check_modes(A, x.M)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise SpectralError("t must be positive")
    s = np.multiply.outer(t_arr, A.lam)
    weights = s ** 2 / (1.0 + s ** 2)
    result = np.sqrt(weights @ np.abs(x.coeffs) ** 2)
    return float(result) if np.ndim(t) == 0 else result


def interp_norm(A: DiagonalOperator, x: SpectralVector, alpha: float, p: float) -> float:
    """Norm of x in (H, D(A))_{theta,p}, theta = 1 - 1/(alpha p).

    Log-trapezoid over [1e-3/lam_M, 1e3/lam_1]; below the window K_2 ~ t ||Ax||,
    above it K_2 ~ ||x||, and both tails are integrated in closed form.
    """
    if alpha * p <= 1.0:
        raise InterpolationPreconditionError(f"alpha*p must exceed 1: got {alpha * p:g}")
    _check_modes(A, x.M)
    h = h_norm(x)
    if h == 0.0:
        return 0.0
    theta = 1.0 - 1.0 / (alpha * p)
    t_lo = 1.0 / (INTERP_WINDOW * A.lam[-1])
    t_hi = INTERP_WINDOW / A.lam[0]
    t = np.geomspace(t_lo, t_hi, INTERP_POINTS)
    integrand = (t ** -theta * k_functional(A, x, t)) ** p
    body = integrate.trapezoid(integrand, np.log(t))
    d = da_norm(A, x)
    lower = d ** p * t_lo ** (p * (1.0 - theta)) / (p * (1.0 - theta))
    upper = h ** p * t_hi ** (-theta * p) / (theta * p)
    total = body + lower + upper
    if (lower + upper) > INTERP_TAIL_WARN * total:
        log.warning("interp_norm: closed-form tails carry %.1f%% of the integral",
                    100.0 * (lower + upper) / total)
    return float(total ** (1.0 / p))


# --- Collocation ---

def _dst1(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return (fft.dst(values.real, type=1, axis=0)
                + 1j * fft.dst(values.imag, type=1, axis=0))
    return fft.dst(values, type=1, axis=0)


class SineCollocation:
    """Orthonormal sine basis sqrt(2) sin(n pi x) on 2M interior points of (0,1).

    Coefficients sit on axis 0; trailing axes (time nodes) are carried along.
    """

    def __init__(self, modes: int):
        if modes < 1:
            raise SpectralError(f"modes must be at least 1: got {modes}")
        self.modes = modes
        self.size = 2 * modes

    @property
    def points(self) -> np.ndarray:
        return np.arange(1, self.size + 1) / (self.size + 1.0)

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        if coeffs.shape[0] != self.modes:
            raise ShapeMismatchError(f"expected {self.modes} modes: got {coeffs.shape[0]}")
        padded = np.zeros((self.size,) + coeffs.shape[1:], dtype=coeffs.dtype)
        padded[:self.modes] = coeffs
        return (math.sqrt(2.0) / 2.0) * _dst1(padded)

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.shape[0] != self.size:
            raise ShapeMismatchError(f"expected {self.size} points: got {values.shape[0]}")
        full = _dst1(values) * (math.sqrt(2.0) / (2.0 * (self.size + 1.0)))
        return full[:self.modes]

    def apply_pointwise(self, func, coeffs: np.ndarray) -> np.ndarray:
        """Spectral coefficients of func(u(x)), u given by coeffs."""
        return self.to_spectral(func(self.to_physical(coeffs)))
