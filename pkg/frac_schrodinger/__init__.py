"""Time-fractional Schrodinger toolkit: Mittag-Leffler evaluation, fractional
calculus on time grids, spectral solvers and maximal-regularity checks."""

__version__ = "0.1.0"
