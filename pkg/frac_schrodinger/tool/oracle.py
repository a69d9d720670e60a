"""Brute-force reference computations.

Nothing here imports mlf or solver: the Mittag-Leffler oracle sums the
defining series in mpmath arithmetic (the algebraic expansion takes over
once the series would need more working digits than allowed), and the
time-steppers discretise the mode equation directly with the L1 scheme (or,
at alpha = 1, the exact exponential integrator).
"""
import cmath
import logging
import math
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np
from scipy import special

from .fracalc import TimeGrid, Trajectory, l1_weights
from .spectral import DiagonalOperator, SineCollocation, SpectralField, SpectralVector

MAX_RADIUS = 60.0
MAX_DIGITS = 2000
STOP_RUN = 10
MAX_TERMS = 200000
INNER_MAX_ITER = 20
INNER_TOL = 1.0e-12
# Below this |mu| the exponential integrator switches to Taylor weights
SMALL_MU = 1.0e-2

log = logging.getLogger("frac-schrodinger.oracle")


# --- Custom Exceptions ---

class OracleError(Exception):
    """Base exception for the reference computations."""
    pass


class OracleRadiusError(OracleError, ValueError):
    """|z| outside what the requested summation can serve."""
    pass


class InnerIterationError(OracleError):
    """The per-step fixed point of the implicit nonlinear step did not settle."""
    pass


# --- Extended-precision Mittag-Leffler ---

def working_digits(alpha: float, radius: float, digits: int) -> int:
    """Digits needed so the largest series term still leaves `digits` correct."""
    guard = radius ** (1.0 / alpha) * math.log10(math.e) if radius > 0.0 else 0.0
    return int(digits + guard + 10)


def highprec_ml_many(alpha: float, beta: float, zs: Sequence[complex],
                     digits: int = 60) -> list:
    """E_{alpha,beta}(z) as mpmath.mpc for every z, sharing the 1/Gamma coefficients.

    Summation stops for each z once STOP_RUN consecutive terms fall below
    10^-digits.
    """
    zs = [complex(z) for z in zs]
    radius = max((abs(z) for z in zs), default=0.0)
    if radius > MAX_RADIUS:
        raise OracleRadiusError(f"|z|={radius:g} exceeds the series radius {MAX_RADIUS:g}")
    dps = working_digits(alpha, radius, digits)
    if dps > MAX_DIGITS:
        raise OracleRadiusError(
            f"|z|={radius:g} at alpha={alpha:g} needs {dps} digits (limit {MAX_DIGITS})"
        )
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        threshold = mpmath.mpf(10) ** (-digits)
        points = [mpmath.mpc(z.real, z.imag) for z in zs]
        powers = [mpmath.mpc(1) for _ in zs]
        sums = [mpmath.mpc(0) for _ in zs]
        quiet = [0] * len(zs)
        active = set(range(len(zs)))
        n = 0
        while active:
            if n > MAX_TERMS:
                raise OracleError(f"series did not settle after {MAX_TERMS} terms")
            coeff = mpmath.rgamma(a * n + b)
            for i in list(active):
                term = powers[i] * coeff
                sums[i] += term
                quiet[i] = quiet[i] + 1 if abs(term) < threshold else 0
                if quiet[i] >= STOP_RUN:
                    active.discard(i)
                powers[i] *= points[i]
            n += 1
        log.debug("highprec_ml: %d terms at %d digits for %d points", n, dps, len(zs))
        return [+s for s in sums]


def highprec_ml_mp(alpha: float, beta: float, z: complex, digits: int = 60):
    return highprec_ml_many(alpha, beta, [z], digits)[0]


def highprec_ml(alpha: float, beta: float, z: complex, digits: int = 60) -> complex:
    """E_{alpha,beta}(z) by the defining series, rounded to a Python complex."""
    return complex(highprec_ml_mp(alpha, beta, z, digits))


def highprec_ml_array(alpha: float, beta: float, zs, digits: int = 60) -> np.ndarray:
    zs = np.asarray(zs, dtype=complex)
    values = highprec_ml_many(alpha, beta, zs.ravel(), digits)
    return np.array([complex(v) for v in values]).reshape(zs.shape)


def highprec_ml_asymptotic(alpha: float, beta: float, z: complex, digits: int = 60):
    """E_{alpha,beta}(z) from the algebraic expansion in mpmath, as mpmath.mpc.

        -sum_k z^{-k} / Gamma(beta - alpha k) + (1/alpha) s^{1-beta} e^s,  s = z^{1/alpha}

    The exponential enters only on the principal sheet (|arg s| < pi). Terms
    are summed until the bound Gamma(1 + alpha k - beta) / (pi |z|^k) on their
    size drops below 10^-digits; if that bound turns upward first, |z| is too
    small for the expansion to reach the requested digits.
    """
    z = complex(z)
    if z == 0 or abs(cmath.phase(z)) <= math.pi * alpha / 2.0:
        raise OracleRadiusError(f"z={z} lies outside the sector of the algebraic expansion")
    log_size = math.log(abs(z))
    log_threshold = -digits * math.log(10.0)
    previous = math.inf
    stop = None
    for k in range(1, MAX_TERMS):
        x = alpha * k - beta
        if x < 0.0:
            continue
        envelope = math.lgamma(1.0 + x) - math.log(math.pi) - k * log_size
        if envelope < log_threshold:
            stop = k
            break
        if envelope > previous:
            break
        previous = envelope
    if stop is None:
        raise OracleRadiusError(
            f"|z|={abs(z):g} too small for the algebraic expansion at {digits} digits"
        )
    with mpmath.workdps(digits + 10):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        w = mpmath.mpc(z.real, z.imag)
        inverse = 1 / w
        power = mpmath.mpc(1)
        total = mpmath.mpc(0)
        for k in range(1, stop + STOP_RUN):
            power *= inverse
            total -= power * mpmath.rgamma(b - a * k)
        log_s = mpmath.log(w) / a
        if abs(mpmath.im(log_s)) < mpmath.pi:
            total += mpmath.exp((1 - b) * log_s + mpmath.exp(log_s)) / a
        log.debug("highprec_ml_asymptotic: %d terms at |z|=%g", stop, abs(z))
        return +total


def reference_ml_array(alpha: float, beta: float, zs, digits: int = 30,
                       budget: int = MAX_DIGITS) -> np.ndarray:
    """Extended-precision E_{alpha,beta} at every z, whatever |z|.

    Points the series can reach within `budget` working digits go to
    highprec_ml_many; the rest are summed by highprec_ml_asymptotic.
    """
    zs = np.asarray(zs, dtype=complex)
    flat = zs.ravel()
    out = np.empty(flat.shape, dtype=complex)
    by_series = np.array([abs(z) <= MAX_RADIUS
                          and working_digits(alpha, abs(z), digits) <= budget
                          for z in flat], dtype=bool)
    if by_series.any():
        values = highprec_ml_many(alpha, beta, flat[by_series], digits)
        out[by_series] = [complex(v) for v in values]
    for i in np.nonzero(~by_series)[0]:
        out[i] = complex(highprec_ml_asymptotic(alpha, beta, flat[i], digits))
    log.debug("reference_ml_array: %d series, %d asymptotic points",
              int(by_series.sum()), int((~by_series).sum()))
    return out.reshape(zs.shape)


# --- L1 time-steppers ---

def _l1_coefficient(alpha: float, h: float) -> float:
    return h ** -alpha / special.gamma(2.0 - alpha)


def l1_linear_modes(alpha: float, lam: np.ndarray, f: np.ndarray, u0: np.ndarray,
                    h: float) -> np.ndarray:
    """Implicit L1 stepping of d^alpha (u - u0) + i lam u = f for each row."""
    if not 0.0 < alpha < 1.0:
        raise OracleError(f"alpha must lie in (0,1): got {alpha}")
    lam = np.asarray(lam, dtype=float)
    f = np.atleast_2d(np.asarray(f, dtype=complex))
    n = f.shape[-1] - 1
    c0 = _l1_coefficient(alpha, h)
    b = l1_weights(alpha, n) if n > 0 else np.ones(1)
    u = np.empty_like(f)
    u[:, 0] = u0
    increments = np.zeros((f.shape[0], n), dtype=complex)
    diag = c0 + 1j * lam
    for k in range(1, n + 1):
        # sum_{j=1}^{k-1} b_j (u_{k-j} - u_{k-j-1})
        history = increments[:, k - 2::-1] @ b[1:k] if k > 1 else 0.0
        u[:, k] = (f[:, k] + c0 * u[:, k - 1] - c0 * history) / diag
        increments[:, k - 1] = u[:, k] - u[:, k - 1]
    return u


def l1_linear(alpha: float, lam: float, f: Trajectory, u0: complex) -> Trajectory:
    """Scalar mode equation d^alpha (u - u0) + i lam u = f by the L1 scheme."""
    values = l1_linear_modes(alpha, np.array([lam]), f.values[None, :],
                             np.array([u0]), f.grid.h)
    return Trajectory(f.grid, values[0])


def l1_semilinear(alpha: float, operator: DiagonalOperator, u0: SpectralVector,
                  nonlinearity: Callable[[np.ndarray], np.ndarray], grid: TimeGrid,
                  forcing: Optional[SpectralField] = None) -> SpectralField:
    """d^alpha (u - u0) - i A u = F(u), F applied pointwise on the sine collocation grid.

    Each implicit step is closed by fixed-point iteration on the nonlinear term.
    """
    if not 0.0 < alpha < 1.0:
        raise OracleError(f"alpha must lie in (0,1): got {alpha}")
    M = operator.M
    colloc = SineCollocation(M)
    n = grid.N
    h = grid.h
    c0 = _l1_coefficient(alpha, h)
    b = l1_weights(alpha, n)
    diag = c0 + 1j * operator.lam
    extra = np.zeros((M, n + 1), dtype=complex) if forcing is None else forcing.coeffs
    u = np.empty((M, n + 1), dtype=complex)
    u[:, 0] = u0.coeffs
    increments = np.zeros((M, n), dtype=complex)

    def rhs_of(coeffs: np.ndarray) -> np.ndarray:
        return colloc.to_spectral(nonlinearity(colloc.to_physical(coeffs)))

    for k in range(1, n + 1):
        history = increments[:, k - 2::-1] @ b[1:k] if k > 1 else 0.0
        linear = extra[:, k] + c0 * u[:, k - 1] - c0 * history
        current = u[:, k - 1]
        for it in range(INNER_MAX_ITER):
            update = (linear + rhs_of(current)) / diag
            change = np.max(np.abs(update - current))
            current = update
            if change <= INNER_TOL * max(1.0, np.max(np.abs(current))):
                break
        else:
            raise InnerIterationError(
                f"step {k}: inner iteration stalled at change {change:.3g}"
            )
        u[:, k] = current
        increments[:, k - 1] = current - u[:, k - 1]
    return SpectralField(grid, u)


# --- Classical comparator ---

def _phi_weights(mu: np.ndarray):
    """phi1 = (e^mu - 1)/mu and phi2 = (e^mu - 1 - mu)/mu^2."""
    mu = np.asarray(mu, dtype=complex)
    small = np.abs(mu) < SMALL_MU
    safe = np.where(small, 1.0, mu)
    phi1 = np.where(small,
                    1 + mu / 2 + mu ** 2 / 6 + mu ** 3 / 24 + mu ** 4 / 120 + mu ** 5 / 720,
                    (np.exp(safe) - 1.0) / safe)
    phi2 = np.where(small,
                    0.5 + mu / 6 + mu ** 2 / 24 + mu ** 3 / 120 + mu ** 4 / 720 + mu ** 5 / 5040,
                    (np.exp(safe) - 1.0 - safe) / safe ** 2)
    return phi1, phi2


def exact_classical(lam: float, f: Trajectory, u0: complex) -> Trajectory:
    """u' + i lam u = f with piecewise-linear f, integrated exactly step by step."""
    h = f.grid.h
    mu = -1j * lam * h
    phi1, phi2 = _phi_weights(np.array([mu]))
    phi1, phi2 = complex(phi1[0]), complex(phi2[0])
    growth = complex(np.exp(mu))
    lead = h * (phi1 - phi2)
    trail = h * phi2
    u = np.empty(f.grid.N + 1, dtype=complex)
    u[0] = u0
    values = f.values
    for k in range(f.grid.N):
        u[k + 1] = growth * u[k] + lead * values[k] + trail * values[k + 1]
    return Trajectory(f.grid, u)


# --- Convergence order ---

def refinement_order(coarse, middle, fine) -> float:
    """log2(|v_N - v_2N| / |v_2N - v_4N|); +inf when the fine difference vanishes."""
    d1 = float(np.linalg.norm(np.asarray(coarse) - np.asarray(middle)))
    d2 = float(np.linalg.norm(np.asarray(middle) - np.asarray(fine)))
    if d2 == 0.0:
        return math.inf
    if d1 < d2:
        log.warning("refinement_order: differences grow under refinement (%.3g -> %.3g)",
                    d1, d2)
    if d1 == 0.0:
        return -math.inf
    return math.log2(d1 / d2)
