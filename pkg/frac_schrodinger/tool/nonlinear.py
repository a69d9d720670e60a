"""Fixed-point solvers for the semilinear and quasilinear problems.

    d^alpha (u - u0) - i A u = F(u)                 (semilinear)
    d^alpha (u - u0) - i A(u) u = 0,  A(0) = A      (quasilinear)

Both are solved by Picard iteration v_{k+1} = L(G(v_k), u0), where L is the
linear solution operator of the solver module, with increments measured in
the maximal-regularity norm

    ||u||_MR = ||J^{-alpha}(u - u(0))||_{L^p(H)} + ||Au||_{L^p(H)} + ||u(0)||.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from .fracalc import TimeGrid, inverse_rl_array, lp_norm_array, rl_integral_array
from .maxreg import (EnsembleSpec, RegularityReport, estimate_mr_constant, generate_forcing,
                     run_members)
from .solver import SolveConfig, solve_full, solve_homogeneous
from .spectral import (DiagonalOperator, SineCollocation, SpectralField, SpectralVector,
                       field_da_norms, field_norms, h_norm, interp_norm)

DIVERGENCE_RUN = 3
FK_TOLERANCE = 2.0e-2
COEFFICIENT_FLOOR = 0.5

log = logging.getLogger("frac-schrodinger.nonlinear")


# --- Traces ---

@dataclass
class IterationTrace:
    """MR-norm increments d_k = ||v_{k+1} - v_k|| of a Picard run."""
    increments: List[float] = field(default_factory=list)
    norms: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.increments)

    @property
    def ratios(self) -> List[float]:
        """d_{k+1} / d_k; NaN where d_k vanishes."""
        out = []
        for prev, cur in zip(self.increments, self.increments[1:]):
            out.append(cur / prev if prev > 0.0 else math.nan)
        return out

    @property
    def final_ratio(self) -> float:
        ratios = [r for r in self.ratios if not math.isnan(r)]
        return ratios[-1] if ratios else 0.0

    def rows(self) -> List[Tuple[int, float, float]]:
        ratios = [math.nan] + self.ratios
        return [(k + 1, d, r) for k, (d, r) in enumerate(zip(self.increments, ratios))]


# --- Custom Exceptions ---

class IterationError(Exception):
    """Base exception for fixed-point iterations; carries the partial trace."""

    def __init__(self, message: str, trace: IterationTrace):
        super().__init__(message)
        self.trace = trace


class DivergenceError(IterationError):
    """Increments grew for DIVERGENCE_RUN consecutive iterations."""
    pass


class BallEscapeError(IterationError):
    """An iterate left the ball of radius r in the MR norm."""
    pass


class PreconditionError(ValueError):
    """alpha * p must exceed 1 for the MR norm."""
    pass


# --- MR norm ---

def mr_norm(alpha: float, p: float, u: SpectralField, operator: DiagonalOperator) -> float:
    if alpha * p <= 1.0:
        raise PreconditionError(f"alpha*p must exceed 1: got {alpha * p:g}")
    h = u.grid.h
    start = u.coeffs[:, :1]
    w = inverse_rl_array(alpha, u.coeffs - start, h, origin="linear")
    frac = float(lp_norm_array(p, field_norms(w), h))
    space = float(lp_norm_array(p, field_da_norms(operator, u.coeffs), h))
    return frac + space + float(np.linalg.norm(start))


# --- Right-hand sides ---

class RHSMap:
    """F mapping a field to a field on the same grid.

    lipschitz holds the (eps, C) pair of ||F(v)-F(w)||_{L^p} <= eps ||v-w||_MR
    + C ||v-w||_{L^p} when it is known.
    """
    lipschitz: Optional[Tuple[float, float]] = None

    def __call__(self, u: SpectralField) -> SpectralField:
        raise NotImplementedError


class ZeroMap(RHSMap):
    lipschitz = (0.0, 0.0)

    def __call__(self, u: SpectralField) -> SpectralField:
        return SpectralField.zeros(u.grid, u.M)


class ConstantForcing(RHSMap):
    lipschitz = (0.0, 0.0)

    def __init__(self, g: SpectralField):
        self.g = g

    def __call__(self, u: SpectralField) -> SpectralField:
        if u.grid != self.g.grid:
            raise ValueError("forcing and iterate live on different grids")
        return self.g


class LinearMap(RHSMap):
    """F(u)_n = c_n u_n."""

    def __init__(self, multipliers: Sequence[complex]):
        self.multipliers = np.asarray(multipliers, dtype=complex)
        self.lipschitz = (0.0, float(np.max(np.abs(self.multipliers))))

    def __call__(self, u: SpectralField) -> SpectralField:
        return SpectralField(u.grid, self.multipliers[:, None] * u.coeffs)


class PointwiseMap(RHSMap):
    """F(u)(x) = func(u(x)) on the sine collocation grid."""

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], modes: int):
        self.func = func
        self.collocation = SineCollocation(modes)

    def __call__(self, u: SpectralField) -> SpectralField:
        return SpectralField(u.grid, self.collocation.apply_pointwise(self.func, u.coeffs))


def cubic(values: np.ndarray) -> np.ndarray:
    return values - np.abs(values) ** 2 * values


def cubic_nls(modes: int) -> PointwiseMap:
    """f(u) = u - |u|^2 u."""
    return PointwiseMap(cubic, modes)


class FractionalDamping(RHSMap):
    """F(u) = -xi d^beta (u - u0) with 0 < beta < alpha."""

    def __init__(self, alpha: float, beta: float, xi: complex, u0: SpectralVector):
        if not 0.0 < beta < alpha:
            raise ValueError(f"damping order must lie in (0, alpha): got {beta}")
        self.beta = beta
        self.xi = complex(xi)
        self.u0 = u0

    def __call__(self, u: SpectralField) -> SpectralField:
        increment = u.coeffs - self.u0.coeffs[:, None]
        return SpectralField(u.grid, -self.xi * inverse_rl_array(self.beta, increment, u.grid.h))


class SumMap(RHSMap):
    def __init__(self, *maps: RHSMap):
        self.maps = maps

    def __call__(self, u: SpectralField) -> SpectralField:
        total = SpectralField.zeros(u.grid, u.M)
        for part in self.maps:
            total = total + part(u)
        return total


def pointwise_linearization(func: Callable[[np.ndarray], np.ndarray],
                            operator: DiagonalOperator, step: float = 1e-8) -> np.ndarray:
    """Eigenvalues lambda_n + i f'(0) of the problem linearised at u = 0.

    d^alpha(u-u0) + i lam u = f'(0) u is the mode equation with lam + i f'(0).
    """
    slope = complex(func(np.array([step], dtype=complex))[0]) / step
    return operator.lam + 1j * slope


# --- Operator families ---

class BallFunctional:
    """s(u)(t) = min(1, ||u(t)|| / r)."""

    def __init__(self, r: float):
        if r <= 0.0:
            raise ValueError("r must be positive")
        self.r = r

    def __call__(self, u: SpectralField) -> np.ndarray:
        return np.minimum(1.0, field_norms(u.coeffs) / self.r)


class DiagonalFamily:
    """A(u(t)) = (1 + delta s(u)(t)) A."""

    def __init__(self, operator: DiagonalOperator, delta: float,
                 functional: Callable[[SpectralField], np.ndarray]):
        self.operator = operator
        self.delta = delta
        self.functional = functional

    def coefficient(self, u: SpectralField) -> np.ndarray:
        c = 1.0 + self.delta * np.asarray(self.functional(u), dtype=float)
        if np.any(c < COEFFICIENT_FLOOR):
            log.warning("coefficient %.3g fell below the floor %.2g; clipping",
                        float(c.min()), COEFFICIENT_FLOOR)
            c = np.maximum(c, COEFFICIENT_FLOOR)
        return c

    def psi(self, u: SpectralField) -> SpectralField:
        """i (A(u) - A) u = -i delta s(u) lam_n u_n."""
        excess = self.coefficient(u) - 1.0
        return SpectralField(u.grid, -1j * excess[None, :] * self.operator.lam[:, None] * u.coeffs)


# --- Picard iterations ---

def _picard(cfg: SolveConfig, u0: SpectralVector, rhs: Callable[[SpectralField], SpectralField],
            tol: float, max_iter: int, p: float,
            radius: Optional[float] = None) -> Tuple[SpectralField, IterationTrace]:
    trace = IterationTrace()
    v = solve_homogeneous(cfg, u0)
    norm = mr_norm(cfg.alpha, p, v, cfg.operator)
    trace.norms.append(norm)
    if radius is not None and norm > radius:
        raise BallEscapeError(f"initial iterate has MR norm {norm:.4g} > r={radius:g}", trace)
    growth_run = 0
    for k in range(max_iter):
        nxt = solve_full(cfg, u0, rhs(v))
        d = mr_norm(cfg.alpha, p, nxt - v, cfg.operator)
        norm = mr_norm(cfg.alpha, p, nxt, cfg.operator)
        if trace.increments and d > trace.increments[-1]:
            growth_run += 1
        else:
            growth_run = 0
        trace.increments.append(d)
        trace.norms.append(norm)
        v = nxt
        log.debug("picard %d: increment %.4g, norm %.4g", k + 1, d, norm)
        if radius is not None and norm > radius:
            raise BallEscapeError(f"iterate {k + 1} has MR norm {norm:.4g} > r={radius:g}",
                                  trace)
        if not math.isfinite(d) or growth_run >= DIVERGENCE_RUN:
            raise DivergenceError(
                f"increments grew for {growth_run} consecutive iterations (d={d:.4g})", trace)
        if d <= tol * norm:
            trace.converged = True
            break
    log.info("picard: %s after %d iterations (last increment %.3g)",
             "converged" if trace.converged else "stopped", trace.iterations,
             trace.increments[-1] if trace.increments else 0.0)
    return v, trace


def semilinear_solve(cfg: SolveConfig, u0: SpectralVector, F: RHSMap, tol: float = 1e-8,
                     max_iter: int = 50, p: float = 2.0) -> Tuple[SpectralField, IterationTrace]:
    """Fixed point of v -> L(F(v), u0), starting from the homogeneous solution."""
    return _picard(cfg, u0, F, tol, max_iter, p)


def quasilinear_solve(cfg: SolveConfig, u0: SpectralVector, amap: DiagonalFamily, r: float,
                      tol: float = 1e-8, max_iter: int = 50, p: float = 2.0,
                      solution_norm: Optional[float] = None,
                      ensemble: Optional[EnsembleSpec] = None) -> Tuple[SpectralField, IterationTrace]:
    """Fixed point of v -> L(i(A(v) - A) v, u0) inside the MR ball of radius r.

    solution_norm is the measured ||L||; without it a 20-member
    estimate_mr_constant run supplies one.
    """
    if solution_norm is None:
        spec = ensemble or EnsembleSpec(20, 0)
        solution_norm = estimate_mr_constant(cfg, p, spec, check_stability=False).constant_estimate
    threshold = r / (4.0 * solution_norm)
    if h_norm(u0) > 0.0:
        size = interp_norm(cfg.operator, u0, cfg.alpha, p)
        if size > threshold:
            log.warning("||u0|| in the interpolation space is %.4g, above r/(4||L||)=%.4g",
                        size, threshold)
    return _picard(cfg, u0, amap.psi, tol, max_iter, p, radius=r)


# --- Key lemma ---

def iterate_series_terms(alpha: float, p: float, T: float, terms: int) -> Tuple[np.ndarray, np.ndarray]:
    """Summands 2^j (Gamma(alpha)^j T^{j alpha} / Gamma(j alpha + 1))^{1/p} and their j-th roots."""
    j = np.arange(1, terms + 1, dtype=float)
    log_terms = j * math.log(2.0) + (j * special.gammaln(alpha) + j * alpha * math.log(T)
                                     - special.gammaln(j * alpha + 1.0)) / p
    return np.exp(log_terms), np.exp(log_terms / j)


def fk_lemma_check(alpha: float, p: float, u: SpectralField,
                   series_terms: int = 60) -> RegularityReport:
    """int_0^T ||u||^p <= T^{alpha p/q} / (alpha^{p/q} Gamma(alpha)^p)
    int_0^T k_alpha(T - r) int_0^r ||d^alpha u||^p ds dr,  k_alpha(t) = t^{alpha-1}."""
    if alpha * p <= 1.0:
        raise PreconditionError(f"alpha*p must exceed 1: got {alpha * p:g}")
    grid = u.grid
    h, T = grid.h, grid.T
    q = p / (p - 1.0)
    lhs = float(integrate.trapezoid(field_norms(u.coeffs) ** p, dx=h))
    derivative = inverse_rl_array(alpha, u.coeffs, h, origin="linear")
    cumulative = integrate.cumulative_trapezoid(field_norms(derivative) ** p, dx=h, initial=0.0)
    # int_0^T (T-r)^{alpha-1} G(r) dr = Gamma(alpha) J^alpha G (T)
    outer = special.gamma(alpha) * float(np.real(rl_integral_array(alpha, cumulative, h)[-1]))
    factor = T ** (alpha * p / q) / (alpha ** (p / q) * special.gamma(alpha) ** p)
    rhs = factor * outer
    summands, roots = iterate_series_terms(alpha, p, T, series_terms)
    return RegularityReport(
        "fklemma", lhs, rhs, lhs / rhs if rhs > 0.0 else 0.0, tolerance=FK_TOLERANCE,
        grid=grid, modes=u.M, ensemble_size=1,
        details={"series_sum": float(summands.sum()), "series_last_root": float(roots[-1])},
    )


def fk_lemma_ensemble(alpha: float, p: float, grid: TimeGrid, operator: DiagonalOperator,
                      ensemble: EnsembleSpec) -> RegularityReport:
    """fk_lemma_check on u = J^alpha f for every ensemble forcing f; worst lhs/rhs."""
    def member(k: int) -> RegularityReport:
        f = generate_forcing(ensemble, grid, operator.eigenvalues, k)
        return fk_lemma_check(alpha, p, SpectralField(grid, rl_integral_array(alpha, f, grid.h)))

    reports = run_members(member, ensemble.count, ensemble.workers)
    worst = max(reports, key=lambda r: r.constant_estimate)
    return RegularityReport("fklemma", worst.lhs, worst.rhs, worst.constant_estimate,
                            tolerance=FK_TOLERANCE, grid=grid, modes=operator.M,
                            ensemble_size=ensemble.count, seed=ensemble.seed,
                            requirements={"all_members": all(r.passed for r in reports)},
                            details=worst.details)
