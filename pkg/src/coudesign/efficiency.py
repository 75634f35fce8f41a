"""Sensitivity of the standardized (lam = omega = 1) trend design.

``R(d, lam, omega; n)`` compares the trend D-criterion of an ``n``-point
equidistant design with spacing ``d`` under the standard parameters with the
same design under ``(lam, omega)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import OUParams, g_func

STANDARD = OUParams(1.0, 1.0)


def efficiency_ratio(d, lam: float, om: float, n: int):
    """``(1 + (n-1) g(d; 1, 1))^2 / (1 + (n-1) g(d; lam, om))^2``. Vectorized in ``d``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("spacing must be positive")
    num = 1.0 + (n - 1) * np.asarray(g_func(STANDARD, d))
    den = 1.0 + (n - 1) * np.asarray(g_func(OUParams(lam, om), d))
    out = (num / den) ** 2
    return float(out) if out.ndim == 0 else out


def lambda_coefficient(d: float, n: int) -> float:
    """Leading small-``lam`` coefficient: ``R(d, lam, 1; n) ~ c * lam^2``.

    As ``lam -> 0``, ``g(d; lam, 1) ~ (1 - cos d) / (lam d)`` so
    ``c = d^2 (1 + (n-1) g(d; 1, 1))^2 / ((n-1)^2 (1 - cos d)^2)``.
    """
    g11 = g_func(STANDARD, d)
    return d * d * (1.0 + (n - 1) * g11) ** 2 / ((n - 1) ** 2 * (1.0 - math.cos(d)) ** 2)


def omega_coefficients(d: float, n: int) -> tuple[float, float]:
    """``(a, b)`` in ``R(d, 1, omega; n) = a - b omega^2 + O(omega^4)``.

    ``a`` uses ``g`` at ``omega = 0``; ``b = 2 (n-1) d^2 e^{-d} a / (1 - e^{-2d}) / (1 + (n-1) g(d; 1, 0))``.
    """
    g0 = g_func(OUParams(1.0, 0.0), d)
    base = 1.0 + (n - 1) * g0
    a = ((1.0 + (n - 1) * g_func(STANDARD, d)) / base) ** 2
    b = 2.0 * (n - 1) * d * d * math.exp(-d) * a / (-math.expm1(-2.0 * d)) / base
    return a, b


@dataclass(frozen=True)
class EfficiencyGrid:
    """``values[i, j] = R(d_axis[i], ...)`` at ``param_axis[j]``."""

    axis: str
    d_axis: np.ndarray
    param_axis: np.ndarray
    values: np.ndarray
    n: int
    fixed: dict = field(default_factory=dict)

    def rows(self):
        for i, d in enumerate(self.d_axis):
            for j, v in enumerate(self.param_axis):
                yield float(d), float(v), float(self.values[i, j])

    def to_csv(self, metadata: dict | None = None) -> str:
        buf = io.StringIO()
        meta = {"axis": self.axis, "n": self.n, **self.fixed, **(metadata or {})}
        for k, v in meta.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["d", self.axis, "R"])
        for row in self.rows():
            w.writerow([f"{x:.15g}" for x in row])
        return buf.getvalue()


def _strictly_increasing(a, name):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size == 0:
        raise ValueError(f"{name} grid is empty")
    if np.any(np.diff(a) <= 0):
        raise ValueError(f"{name} grid must be strictly increasing")
    return a


def efficiency_surface(axis: str, d_grid, param_grid, n: int) -> EfficiencyGrid:
    """``R`` over ``d x lam`` (``omega = 1``) or ``d x omega`` (``lam = 1``)."""
    d = _strictly_increasing(d_grid, "d")
    v = _strictly_increasing(param_grid, axis)
    if np.any(d <= 0):
        raise ValueError("d grid must be positive")
    if axis == "lambda":
        if np.any(v <= 0):
            raise ValueError("lambda grid must be positive")
        cols = [efficiency_ratio(d, lam, 1.0, n) for lam in v]
        fixed = {"omega": 1.0}
    elif axis == "omega":
        cols = [efficiency_ratio(d, 1.0, om, n) for om in v]
        fixed = {"lambda": 1.0}
    else:
        raise ValueError("axis must be 'lambda' or 'omega'")
    d.setflags(write=False)
    v.setflags(write=False)
    return EfficiencyGrid(axis, d, v, np.column_stack(cols), int(n), fixed)


# --- numerical small-parameter limits --------------------------------------

def _richardson(h: np.ndarray, y: np.ndarray) -> float:
    """Polynomial extrapolation of ``y(h)`` to ``h = 0``."""
    return float(np.polynomial.polynomial.polyfit(h, y, len(h) - 1)[0])


def lambda_coefficient_numeric(d: float, n: int, lams=(4e-3, 2e-3, 1e-3)) -> float:
    """``lim_{lam -> 0} R(d, lam, 1; n) / lam^2`` from ``R`` evaluations only."""
    lams = np.asarray(lams, dtype=float)
    vals = np.array([efficiency_ratio(d, lam, 1.0, n) / lam**2 for lam in lams])
    return _richardson(lams, vals)


def omega_coefficients_numeric(d: float, n: int, omegas=(4e-2, 2e-2, 1e-2)) -> tuple[float, float]:
    """``(a, b)`` with ``R(d, 1, omega; n) ~ a - b omega^2`` from ``R`` evaluations only."""
    a = efficiency_ratio(d, 1.0, 0.0, n)
    om = np.asarray(omegas, dtype=float)
    slopes = np.array([(a - efficiency_ratio(d, 1.0, w, n)) / w**2 for w in om])
    # error terms are even in omega
    return float(a), _richardson(om**2, slopes)


@dataclass(frozen=True)
class TaylorLimitReport:
    """Large-``n`` limits of the small-parameter coefficients at spacing ``d``.

    ``per_n`` holds ``(n, lambda_coef, omega_intercept, omega_slope)`` rows;
    the ``*_limit`` fields are their extrapolation in ``1/(n-1)``, and
    ``*_closed`` the exact ``n -> inf`` values of the leading-order formulas.
    """

    d: float
    per_n: list
    lambda_limit: float
    omega_intercept_limit: float
    omega_slope_limit: float
    lambda_closed: float
    omega_intercept_closed: float
    omega_slope_closed: float

    def at(self, n: int) -> tuple[float, float, float]:
        for row in self.per_n:
            if row[0] == n:
                return row[1:]
        raise KeyError(n)


def taylor_limit_checks(n_max: int = 1000, d: float | None = None,
                        n_values=None) -> TaylorLimitReport:
    """Estimate the ``n -> inf`` small-``lam`` and small-``omega`` constants at ``d``.

    ``d`` defaults to the trend-optimal spacing for ``lam = omega = 1``. For
    each ``n`` the coefficients are extracted from ``R`` by extrapolation in
    the small parameter; the sequence in ``n`` is then extrapolated in
    ``h = 1/(n-1)`` (the coefficients are rational in ``n``).
    """
    if n_max < 100:
        raise ValueError("n_max must be >= 100")
    if d is None:
        from .solver import optimal_trend_spacing
        d = optimal_trend_spacing(STANDARD).spacing
    if n_values is None:
        n_values = sorted({10, n_max // 8, n_max // 4, n_max // 2, n_max})
    per_n = []
    for n in n_values:
        a, b = omega_coefficients_numeric(d, n)
        per_n.append((n, lambda_coefficient_numeric(d, n), a, b))
    tail = [row for row in per_n if row[0] >= n_max // 8]
    h = np.array([1.0 / (row[0] - 1) for row in tail])
    cols = np.array([row[1:] for row in tail])
    lim = [_richardson(h, cols[:, k]) for k in range(3)]

    g11 = g_func(STANDARD, d)
    g10 = g_func(OUParams(1.0, 0.0), d)
    a_inf = (g11 / g10) ** 2
    b_inf = 2.0 * d * d * math.exp(-d) * a_inf / (-math.expm1(-2.0 * d)) / g10
    return TaylorLimitReport(
        d=float(d), per_n=per_n,
        lambda_limit=lim[0], omega_intercept_limit=lim[1], omega_slope_limit=lim[2],
        lambda_closed=d * d * g11**2 / (1.0 - math.cos(d)) ** 2,
        omega_intercept_closed=a_inf, omega_slope_closed=b_inf,
    )
