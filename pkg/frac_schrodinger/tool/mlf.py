"""Two-parameter Mittag-Leffler function E_{alpha,beta}(z).

    E_{alpha,beta}(z) = sum_{n>=0} z^n / Gamma(alpha*n + beta)

Evaluation paths:
  - series: terms |z|^n e^{in arg z} / Gamma(alpha n + beta) with compensated
    (Kahan) summation, for small |z|
  - asymptotic: -sum_{k=1}^{N} z^{-k} / Gamma(beta - alpha*k) in the sector
    mu <= |arg z| <= pi, for large |z|
  - integral: Bromwich contour folded onto the rays arg s = +-phi, used by the
    dispatcher wherever neither expansion reaches its error target

Usage (Module):
    from frac_schrodinger.tool.mlf import MLParams, ml_eval
    ml_eval(MLParams(0.5, 1.0), -40j).value
"""
import cmath
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, special

EPS = float(np.finfo(float).eps)

# Absolute error the dispatcher accepts from the series or asymptotic path
DISPATCH_TOL = 1.0e-11
SERIES_TOL = 1.0e-17
# Largest admissible sum of |terms| for double-precision series summation
SERIES_GROWTH_LIMIT = 1.0e12
SERIES_MAX_TERMS = 20000
# Roundings per series term, in units of eps, behind the error claim
SERIES_ROUNDING = 3.0
GAMMA_OVERFLOW = 171.6
ASYMPTOTIC_TERMS = 6
ASYMPTOTIC_MAX_TERMS = 80
ASYMPTOTIC_CHUNK = 4096
# beta - alpha k closer than this (relative) to a non-positive integer is a pole of Gamma
POLE_TOL = 1.0e-12
# e^{-40} is below double resolution of O(1) values
CONTOUR_CUTOFF = 40.0
CONTOUR_ANGLES = np.array([0.6, 0.75, 0.9]) * np.pi
BOUND_REFINE = 65

log = logging.getLogger("frac-schrodinger.mlf")


# --- Custom Exceptions ---

class MLError(Exception):
    """Base exception for Mittag-Leffler evaluation."""
    pass


class GammaPoleError(MLError, ValueError):
    """Gamma evaluated at a non-positive integer."""
    pass


class MLConvergenceError(MLError):
    """The series was asked for |z| beyond its radius; use the asymptotic path."""
    pass


class MLSectorError(MLError, ValueError):
    """arg z lies outside the sector where the asymptotic expansion holds."""
    pass


# --- Types ---

@dataclass(frozen=True)
class MLParams:
    """Order alpha in (0, 1] and second parameter beta."""
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1]: got {self.alpha}")
        if not math.isfinite(self.beta):
            raise ValueError(f"beta must be finite: got {self.beta}")


class MLMethod(str, Enum):
    SERIES = "series"
    ASYMPTOTIC = "asymptotic"
    HYBRID = "hybrid"
    INTEGRAL = "integral"


@dataclass(frozen=True)
class MLValue:
    """E_{alpha,beta}(z) with the path that produced it and its error claim."""
    value: complex
    method: MLMethod
    err_estimate: float


# --- Gamma ---

def gamma_real(x: float) -> float:
    """Gamma(x) for real x, by reflection below 1/2."""
    x = float(x)
    if x <= 0.0 and x.is_integer():
        raise GammaPoleError(f"Gamma has a pole at {x:g}")
    if x < 0.5:
        # sin(pi x) with the integer part removed exactly
        k = round(x)
        s = math.sin(math.pi * (x - k)) * (-1.0 if k % 2 else 1.0)
        return math.pi / (s * float(special.gamma(1.0 - x)))
    return float(special.gamma(x))


# --- Geometry of the expansions ---

def sector_angle(alpha: float) -> float:
    """mu in (pi*alpha/2, min(pi, pi*alpha)), never above pi/2."""
    return min(math.pi * (alpha + 1.0) / 4.0, 3.0 * math.pi * alpha / 4.0)


def series_radius(p: MLParams) -> float:
    """|z| beyond which sum |terms| exceeds SERIES_GROWTH_LIMIT."""
    return math.log(SERIES_GROWTH_LIMIT * p.alpha) ** p.alpha


# --- Series ---

def _inverse_gamma(x: float) -> float:
    """1/Gamma(x) for x > 0, zero once Gamma overflows."""
    if x > GAMMA_OVERFLOW:
        return 0.0
    return 1.0 / float(special.gamma(x))


def _series_array(alpha: float, beta: float, z: np.ndarray,
                  tol: float) -> Tuple[np.ndarray, np.ndarray]:
    if beta <= 0.0:
        inner, err = _series_array(alpha, beta + alpha, z, tol)
        return z * inner + special.rgamma(beta), np.abs(z) * err

    absz = np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(absz > 0.0, z / absz, 1.0)
    # powers of +-1 and +-i are exact
    exact_phase = (unit.real == 0.0) | (unit.imag == 0.0)
    phase = np.ones(z.shape, dtype=complex)

    total = np.full(z.shape, _inverse_gamma(beta), dtype=complex)
    comp = np.zeros_like(total)
    weighted = np.abs(total) ** 2
    tail = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    n = 0
    while active.any() and n < SERIES_MAX_TERMS:
        n += 1
        phase = phase * unit
        with np.errstate(over="ignore", invalid="ignore"):
            term = np.where(active, _inverse_gamma(alpha * n + beta) * absz ** n * phase, 0.0)
        # Kahan step
        y = term - comp
        t = total + y
        comp = np.where(active, (t - total) - y, comp)
        total = np.where(active, t, total)
        weighted += np.where(exact_phase, 1.0, float(n)) * np.abs(term) ** 2

        q = absz * math.exp(special.gammaln(alpha * n + beta)
                            - special.gammaln(alpha * (n + 1) + beta))
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = np.where(q < 1.0, np.abs(term) * q / (1.0 - q), np.inf)
        finished = active & (np.abs(term) + bound < tol)
        tail = np.where(finished, bound, tail)
        active &= ~finished

    if active.any():
        log.warning("Series hit %d terms without meeting tol=%g", n, tol)
    # each term carries a few independent roundings; a phase built by repeated
    # multiplication adds one per step
    rounding = SERIES_ROUNDING * EPS * (np.sqrt(weighted) + np.abs(total))
    return total, tail + rounding


def ml_series(p: MLParams, z: complex, tol: float = SERIES_TOL) -> MLValue:
    """Partial sum of the defining series; err_estimate is tail + rounding."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    radius = series_radius(p)
    if abs(z) > radius:
        raise MLConvergenceError(
            f"|z|={abs(z):.4g} exceeds the series radius {radius:.4g} "
            f"for alpha={p.alpha}, beta={p.beta}"
        )
    values, errs = _series_array(p.alpha, p.beta, np.array([complex(z)]), tol)
    return MLValue(complex(values[0]), MLMethod.SERIES, float(errs[0]))


# --- Asymptotic expansion ---

def _principal_residue(alpha: float, beta: float, z: np.ndarray,
                       phi: float = math.pi) -> np.ndarray:
    """(1/alpha) s^{1-beta} e^{s} at the pole s = z^{1/alpha} when |arg s| < phi."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_s = np.log(z) / alpha
        inside = np.abs(log_s.imag) < phi
        value = np.exp((1.0 - beta) * log_s + np.exp(log_s)) / alpha
    return np.where(inside & np.isfinite(value), value, 0.0)


def _asymptotic_coefficients(alpha: float, beta: float,
                             kmax: int) -> Tuple[np.ndarray, np.ndarray]:
    """k = 1..kmax and 1/Gamma(beta - alpha k), exactly zero at the Gamma poles."""
    k = np.arange(1, kmax + 1)
    x = beta - alpha * k
    nearest = np.round(x)
    pole = (nearest <= 0.0) & (np.abs(x - nearest) <= POLE_TOL * np.maximum(1.0, np.abs(x)))
    return k, np.where(pole, 0.0, special.rgamma(np.where(pole, 0.5, x)))


def _log_envelope(alpha: float, beta: float, k: np.ndarray, coeffs: np.ndarray,
                  absz: np.ndarray) -> np.ndarray:
    """log of a bound on |z^{-k} / Gamma(beta - alpha k)|, log-convex in k.

    Past beta - alpha k = 0 the reflection formula gives
    |1/Gamma(-x)| = |sin(pi x)| Gamma(1 + x) / pi <= Gamma(1 + x) / pi,
    which drops the sine zeros that make the terms themselves dip.
    """
    x = alpha * k - beta
    with np.errstate(divide="ignore"):
        log_coeff = np.where(x >= 0.0,
                             special.gammaln(1.0 + np.maximum(x, 0.0)) - math.log(math.pi),
                             np.log(np.abs(coeffs)))
    return log_coeff[None, :] - k[None, :] * np.log(absz)[:, None]


def _asymptotic_array(alpha: float, beta: float, z: np.ndarray,
                      terms: Optional[int],
                      include_residue: bool) -> Tuple[np.ndarray, np.ndarray]:
    if z.size > ASYMPTOTIC_CHUNK:
        parts = [_asymptotic_array(alpha, beta, z[i:i + ASYMPTOTIC_CHUNK], terms,
                                   include_residue)
                 for i in range(0, z.size, ASYMPTOTIC_CHUNK)]
        return (np.concatenate([v for v, _ in parts]),
                np.concatenate([e for _, e in parts]))
    kmax = ASYMPTOTIC_MAX_TERMS if terms is None else terms + ASYMPTOTIC_MAX_TERMS
    k, coeffs = _asymptotic_coefficients(alpha, beta, kmax)
    with np.errstate(over="ignore", under="ignore"):
        powers = (1.0 / z)[:, None] ** k[None, :]
    series_terms = -coeffs[None, :] * powers
    nonzero = coeffs != 0.0
    rows = np.arange(z.size)

    if terms is None and alpha == 1.0 and float(beta).is_integer():
        # finite expansion: coefficients vanish from k = beta on
        stop = np.full(z.size, kmax)
        err = np.zeros(z.size)
    elif terms is None:
        # optimal truncation: stop before the smallest envelope term; the
        # remainder is bounded by the envelope of the first nonzero term left out
        log_env = _log_envelope(alpha, beta, k, coeffs, np.abs(z))
        stop = np.argmin(log_env, axis=1)
        index = np.arange(kmax)
        marks = np.where(nonzero, index, kmax)
        next_nonzero = np.minimum.accumulate(marks[::-1])[::-1][stop]
        err = np.where(next_nonzero < kmax,
                       np.exp(log_env[rows, np.minimum(next_nonzero, kmax - 1)]), 0.0)
    else:
        stop = np.full(z.size, terms)
        omitted = np.nonzero(nonzero[terms:])[0]
        err = (np.abs(series_terms[:, terms + omitted[0]]) if omitted.size
               else np.zeros(z.size))

    keep = k[None, :] <= stop[:, None]
    value = np.where(keep, series_terms, 0.0).sum(axis=1)
    if include_residue:
        value = value + _principal_residue(alpha, beta, z)
    return value, err


def ml_asymptotic(p: MLParams, z: complex, terms: Optional[int] = ASYMPTOTIC_TERMS,
                  include_residue: bool = False) -> MLValue:
    """-sum_{k=1}^{terms} z^{-k}/Gamma(beta - alpha k), valid for mu <= |arg z| <= pi.

    Coefficients with beta - alpha k a non-positive integer vanish and are
    skipped. With a fixed number of terms err_estimate is the first omitted
    nonzero term; under optimal truncation it is the Gamma envelope of that term.

    Args:
        p: Parameters
        z: Argument, nonzero
        terms: Number of terms of the algebraic sum; None truncates before the
            smallest envelope term (at most ASYMPTOTIC_MAX_TERMS)
        include_residue: Add the principal-pole term (1/alpha) s^{1-beta} e^s,
            s = z^{1/alpha}; exponentially small on the imaginary ray for alpha < 1

    Returns:
        MLValue tagged asymptotic
    """
    if terms is not None and terms < 1:
        raise ValueError("terms must be a positive integer")
    z = complex(z)
    mu = sector_angle(p.alpha)
    if z == 0 or abs(cmath.phase(z)) < mu - 1e-15:
        raise MLSectorError(
            f"arg z = {cmath.phase(z):.6f} outside the sector |arg z| >= {mu:.6f}"
        )
    values, errs = _asymptotic_array(p.alpha, p.beta, np.array([z]), terms,
                                     include_residue)
    return MLValue(complex(values[0]), MLMethod.ASYMPTOTIC, float(errs[0]))


# --- Contour integral ---

def _contour_group(alpha: float, beta: float, z: np.ndarray,
                   phi: float) -> Tuple[np.ndarray, np.ndarray]:
    gam = alpha - beta + 1.0
    r_max = CONTOUR_CUTOFF / abs(math.cos(phi))
    up = cmath.exp(1j * phi)
    rot_up = cmath.exp(1j * phi * gam)
    turn_up = cmath.exp(1j * alpha * phi)

    def integrand(u):
        r = u ** (1.0 / gam)
        ra = r ** alpha
        upper = np.exp(r * up) * rot_up / (ra * turn_up - z)
        lower = (np.exp(r * up.conjugate()) * rot_up.conjugate()
                 / (ra * turn_up.conjugate() - z))
        val = (upper - lower) / (2j * math.pi * gam)
        return np.concatenate([val.real, val.imag])

    res, err = integrate.quad_vec(integrand, 0.0, r_max ** gam,
                                  epsabs=1e-13, epsrel=1e-12, norm="max")
    value = res[:z.size] + 1j * res[z.size:]
    return value + _principal_residue(alpha, beta, z, phi), np.full(z.size, err)


def _contour_array(alpha: float, beta: float,
                   z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if beta >= alpha + 1.0:
        lower, err = _contour_array(alpha, beta - alpha, z)
        return (lower - special.rgamma(beta - alpha)) / z, err / np.abs(z)

    pole_angle = np.abs(np.angle(z)) / alpha
    choice = np.argmax(np.abs(pole_angle[:, None] - CONTOUR_ANGLES[None, :]), axis=1)
    values = np.empty(z.shape, dtype=complex)
    errs = np.empty(z.shape)
    for index, phi in enumerate(CONTOUR_ANGLES):
        group = choice == index
        if group.any():
            values[group], errs[group] = _contour_group(alpha, beta, z[group], phi)
    return values, errs


# --- Dispatcher ---

@lru_cache(maxsize=256)
def crossover_radius(p: MLParams) -> float:
    """Smallest |z| on the -i ray where the asymptotic error claim beats the series."""
    r_series = series_radius(p)
    radii = np.geomspace(0.5, max(r_series, 1.0) * 1.5, 160)
    z = -1j * radii
    series_err = np.full(radii.shape, np.inf)
    inside = radii <= r_series
    if inside.any():
        _, series_err[inside] = _series_array(p.alpha, p.beta, z[inside], SERIES_TOL)
    _, asym_err = _asymptotic_array(p.alpha, p.beta, z, None, True)
    better = np.nonzero(asym_err < series_err)[0]
    r_star = float(radii[better[0]]) if better.size else r_series
    log.debug("Crossover radius for %s: %.4g (series radius %.4g)", p, r_star, r_series)
    return r_star


_CODES = (MLMethod.SERIES, MLMethod.ASYMPTOTIC, MLMethod.HYBRID, MLMethod.INTEGRAL)


def _dispatch(p: MLParams, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=complex).ravel()
    values = np.zeros(z.shape, dtype=complex)
    errs = np.full(z.shape, np.inf)
    codes = np.zeros(z.shape, dtype=int)
    if z.size == 0:
        return values, errs, codes

    if p.alpha == 1.0 and p.beta == 1.0:
        values = np.exp(z)
        return values, EPS * np.abs(values), codes

    r = np.abs(z)
    r_series = series_radius(p)
    r_star = crossover_radius(p)
    mu = sector_angle(p.alpha)
    in_sector = np.abs(np.angle(z)) >= mu - 1e-15
    outside = (r > r_series) & ~in_sector
    if outside.any():
        bad = z[outside][0]
        raise MLSectorError(
            f"z={bad} lies beyond the series radius {r_series:.4g} and outside "
            f"the sector |arg z| >= {mu:.6f}"
        )

    use_series = (r < 2.0 * r_star) & (r <= r_series)
    use_asym = (r >= r_star) & in_sector & (r > 0.0)
    if use_series.any():
        values[use_series], errs[use_series] = _series_array(
            p.alpha, p.beta, z[use_series], SERIES_TOL)
    if use_asym.any():
        a_val, a_err = _asymptotic_array(p.alpha, p.beta, z[use_asym], None, True)
        take = a_err < errs[use_asym]
        idx = np.nonzero(use_asym)[0]
        values[idx[take]] = a_val[take]
        errs[idx[take]] = a_err[take]
        codes[idx] = np.where(use_series[idx], 2, 1)

    scale = np.maximum(1.0, np.abs(values))
    fallback = ~(errs <= DISPATCH_TOL * scale)
    if fallback.any():
        c_val, c_err = _contour_array(p.alpha, p.beta, z[fallback])
        values[fallback] = c_val
        errs[fallback] = c_err
        codes[fallback] = 3
        log.debug("Contour path used for %d of %d points", int(fallback.sum()), z.size)
    return values, errs, codes


def ml_eval_array(p: MLParams, z) -> np.ndarray:
    """Vectorised E_{alpha,beta}(z); output has the shape of z."""
    z = np.asarray(z, dtype=complex)
    values, _, _ = _dispatch(p, z.ravel())
    return values.reshape(z.shape)


def ml_eval(p: MLParams, z: complex) -> MLValue:
    """Series below R*, asymptotic above, both in [R*, 2R*]; contour path fills gaps."""
    values, errs, codes = _dispatch(p, np.array([complex(z)]))
    return MLValue(complex(values[0]), _CODES[int(codes[0])], float(errs[0]))


def ml_bound_constant(p: MLParams, t_max: float, samples: int = 400) -> float:
    """Sampled sup of (1+|t|)|E_{alpha,beta}(it)| over t in [-t_max, t_max].

    The coarse log grid is refined linearly between the neighbours of its
    largest sample, so the value does not depend on how far t_max stretches
    the grid.
    """
    if t_max <= 0.0:
        raise ValueError("t_max must be positive")
    positive = np.geomspace(min(1e-3, t_max), t_max, samples)
    t = np.concatenate([-positive[::-1], [0.0], positive])
    scaled = (1.0 + np.abs(t)) * np.abs(ml_eval_array(p, 1j * t))
    peak = int(np.argmax(scaled))
    fine = np.linspace(t[max(peak - 1, 0)], t[min(peak + 1, t.size - 1)], BOUND_REFINE)
    refined = (1.0 + np.abs(fine)) * np.abs(ml_eval_array(p, 1j * fine))
    return float(max(scaled[peak], refined.max()))


def overlap_annulus(p: MLParams, tol: float,
                    samples: int = 2000) -> Optional[Tuple[float, float]]:
    """Radii on the -i ray where both series and asymptotic claim errors <= tol."""
    r_series = series_radius(p)
    radii = np.geomspace(0.5, r_series, samples)
    z = -1j * radii
    _, s_err = _series_array(p.alpha, p.beta, z, SERIES_TOL)
    _, a_err = _asymptotic_array(p.alpha, p.beta, z, None, True)
    both = np.nonzero((s_err <= tol) & (a_err <= tol))[0]
    if both.size == 0:
        return None
    return float(radii[both[0]]), float(radii[both[-1]])
