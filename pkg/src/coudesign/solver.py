"""Optimal spacings for the D-criteria of the complex OU model.

All single-parameter and covariance criteria are optimized by equidistant
designs, so those solvers work on one spacing ``d`` and return it repeated
``n - 1`` times. The four-parameter criterion has no closed form; it is
maximized over equidistant designs and, in ``free`` mode, over arbitrary
spacings to check that the optimum is in fact equidistant.

Everything is even in ``omega``; solvers work with ``|omega|``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .kernel import (
    OUParams,
    g_envelope,
    g_func,
    g_prime,
    g_second_at_critical,
    phi_func,
    phi_prime,
    phi_second,
    psi_func,
    psi_prime,
    psi_second,
    r_func,
    r_scaled,
)


class FrequencyZero(ValueError):
    """No finite optimum: with ``omega = 0`` trend information grows with the spacing."""


class NonConvergence(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Criterion(str, enum.Enum):
    TREND = "TrendD"
    LAMBDA = "LambdaD"
    OMEGA = "OmegaD"
    COV_JOINT = "CovJointD"
    ALL_PARAMS = "AllParamsD"


EQUIDISTANT_RTOL = 1e-6


@dataclass(frozen=True)
class DesignResult:
    """Optimal spacings for one criterion.

    ``spread`` is ``max(spacings) - min(spacings)``; ``equidistant`` is set
    when it does not exceed ``1e-6`` times the mean spacing.
    """

    criterion: Criterion
    spacings: np.ndarray
    objective: float
    spread: float
    equidistant: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return float(np.mean(self.spacings))

    @property
    def n(self) -> int:
        return self.spacings.size + 1

    def as_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "spacing": self.spacing,
            "spacings": [float(v) for v in self.spacings],
            "objective": self.objective,
            "spread": self.spread,
            "equidistant": self.equidistant,
            "diagnostics": self.diagnostics,
        }


def _result(criterion, spacings, objective, diagnostics) -> DesignResult:
    d = np.asarray(spacings, dtype=float)
    d.setflags(write=False)
    spread = float(d.max() - d.min())
    if not math.isfinite(objective):
        raise NonConvergence(f"{criterion.value}: objective is not finite", diagnostics)
    return DesignResult(criterion, d, float(objective), spread,
                        spread <= EQUIDISTANT_RTOL * float(d.mean()), diagnostics)


def _check_n(n: int) -> int:
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    return int(n)


def _require_omega(p: OUParams) -> OUParams:
    if p.omega == 0:
        raise FrequencyZero(
            "omega = 0: trend information increases with the spacing, "
            "so no finite optimal design exists"
        )
    return OUParams(p.lam, abs(p.omega), p.sigma2_over_2lambda)


# --- Lambert W -------------------------------------------------------------

_INV_E = math.exp(-1.0)


def lambert_w0(z: float) -> float:
    """Principal branch of the Lambert W function for real ``z > -1/e``.

    Halley iteration started from a branch-point series near ``-1/e``, the
    Maclaurin series near 0 and ``log z - log log z`` for large ``z``.
    """
    z = float(z)
    if not z > -_INV_E:
        raise ValueError(f"lambert_w0 is defined here for z > -1/e, got {z}")
    if math.isinf(z):
        return math.inf
    if z == 0.0:
        return 0.0
    if z < -0.25:
        pp = math.sqrt(2.0 * (math.e * z + 1.0))
        w = -1.0 + pp - pp * pp / 3.0 + 11.0 / 72.0 * pp**3
    elif z < 1.5:
        w = z - z * z + 1.5 * z**3 if abs(z) < 0.3 else math.log1p(z) * 0.8
    else:
        lz = math.log(z)
        w = lz - math.log(lz) if z > math.e else lz
    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 4.0 * np.finfo(float).eps * (1.0 + abs(w)):
            break
    return w


# --- trend criterion -------------------------------------------------------

def _window_roots(p: OUParams, a: float, b: float, samples: int) -> list[tuple[float, int]]:
    """Sign changes of ``r`` in ``[a, b]`` refined by Brent; returns ``(root, slope_sign)``."""
    xs = np.linspace(a, b, samples + 1)
    vals = np.asarray(r_scaled(p, xs))
    out = []
    for i in range(samples):
        lo, hi = vals[i], vals[i + 1]
        if lo == 0.0 and i > 0:
            out.append((xs[i], int(np.sign(hi))))
            continue
        if lo * hi < 0:
            root = optimize.brentq(lambda x: r_scaled(p, x), xs[i], xs[i + 1],
                                   xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            out.append((root, 1 if hi > 0 else -1))
    return out


def optimal_trend_spacing(p: OUParams, n: int = 2, samples_per_window: int = 32,
                          max_windows: int = 1_000_000, tie_rtol: float = 1e-12) -> DesignResult:
    """Global maximizer of ``g`` over ``(0, inf)``.

    Critical points are the roots of ``r``. They are enumerated window by
    window (width ``pi / |omega|``); a root where ``r`` goes from positive to
    negative is a local maximum. Scanning stops once ``coth(lam x / 2)``,
    which bounds ``g`` from above and decreases in ``x``, falls below the
    best local maximum found (up to ``tie_rtol``).
    """
    n = _check_n(n)
    q = _require_omega(p)
    width = math.pi / q.omega
    best_x, best_g = None, -math.inf
    ties = 0
    n_roots = 0
    windows = 0
    for k in range(max_windows):
        a = k * width
        # within tie tolerance any later maximum would lose the tie anyway;
        # this also ends the scan once the envelope rounds to 1
        if best_x is not None and g_envelope(q, max(a, 1e-300)) <= best_g * (1.0 + tie_rtol):
            break
        windows += 1
        lo = a if k > 0 else width / samples_per_window * 1e-3
        for root, slope in _window_roots(q, lo, a + width, samples_per_window):
            n_roots += 1
            if slope >= 0:
                continue
            val = g_func(q, root)
            if best_x is not None and abs(val - best_g) <= tie_rtol * abs(best_g):
                ties += 1
                continue
            if val > best_g:
                best_x, best_g = root, val
    else:
        raise NonConvergence("envelope never dropped below the best local maximum",
                             {"windows": windows, "roots": n_roots})
    if best_x is None:
        raise NonConvergence("no local maximum of g found", {"windows": windows})
    diag = {
        "windows": windows,
        "critical_points": n_roots,
        "ties": ties,
        "r_residual": float(r_func(q, best_x)),
        "g_second": float(g_second_at_critical(q, best_x)),
        "converged": True,
    }
    return _result(Criterion.TREND, np.full(n - 1, best_x),
                   (1.0 + (n - 1) * best_g) ** 2, diag)


# --- covariance criteria ---------------------------------------------------

def optimal_omega_spacing(p: OUParams, n: int = 2) -> DesignResult:
    """Maximizer of ``psi``: ``(W0(-2 e^-2) / 2 + 1) / lam``."""
    n = _check_n(n)
    d = (lambert_w0(-2.0 * math.exp(-2.0)) / 2.0 + 1.0) / p.lam
    x = p.lam * d
    residual = 1.0 - x - math.exp(-2.0 * x)
    diag = {"critical_residual": residual, "converged": abs(residual) < 1e-12}
    return _result(Criterion.OMEGA, np.full(n - 1, d), (n - 1) * psi_func(p, d), diag)


def cov_joint_equation(d):
    """``1 - d - 2d e^{-2d} - e^{-4d}``; its positive root is the scaled optimal spacing."""
    d = np.asarray(d, dtype=float)
    out = -np.expm1(-4.0 * d) - d - 2.0 * d * np.exp(-2.0 * d)
    return float(out) if out.ndim == 0 else out


def _cov_joint_root() -> tuple[float, int]:
    grid = np.linspace(1e-3, 2.0, 201)
    vals = cov_joint_equation(grid)
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if idx.size != 1:
        raise NonConvergence("expected a single sign change", {"sign_changes": int(idx.size)})
    i = int(idx[0])
    root, info = optimize.brentq(cov_joint_equation, grid[i], grid[i + 1],
                                 xtol=1e-15, rtol=4 * np.finfo(float).eps, full_output=True)
    return root, info.iterations


def optimal_cov_joint_spacing(p: OUParams, n: int = 2) -> DesignResult:
    """Maximizer of ``det`` of the ``(lam, omega)`` information: ``d0 / lam``."""
    n = _check_n(n)
    d0, iters = _cov_joint_root()
    d = d0 / p.lam
    objective = (n - 1) ** 2 * phi_func(p, d) * psi_func(p, d)
    diag = {"iterations": iters, "scaled_root": d0,
            "equation_residual": cov_joint_equation(d0), "converged": True}
    return _result(Criterion.COV_JOINT, np.full(n - 1, d), objective, diag)


def cov_joint_hessian_coefficients(n: int, lam: float = 1.0) -> tuple[float, float]:
    """Hessian of ``(sum phi)(sum psi)`` at the equidistant optimum is ``a I + b 11^T``.

    Returns ``(a, b) = ((n-1)(phi'' psi + psi'' phi), 2 phi' psi')``.
    """
    n = _check_n(n)
    p = OUParams(lam, 1.0)
    d = optimal_cov_joint_spacing(p).spacing
    a = (n - 1) * (phi_second(p, d) * psi_func(p, d) + psi_second(p, d) * phi_func(p, d))
    b = 2.0 * phi_prime(p, d) * psi_prime(p, d)
    return float(a), float(b)


@dataclass(frozen=True)
class NonExistence:
    """The damping-only criterion has no admissible optimum.

    ``sum phi`` is bounded by ``(n - 1) / lam^2`` and approaches it only as
    all spacings shrink to zero, which collapses the design.
    """

    criterion: Criterion
    n: int
    supremum: float
    attained_at: None = None
    reason: str = ("phi is maximized at spacing 0; the supremum (n-1)/lam^2 is "
                   "approached only as observation times coincide")

    def as_dict(self) -> dict:
        return {"criterion": self.criterion.value, "n": self.n,
                "supremum": self.supremum, "attained_at": None, "reason": self.reason}


def reject_lambda_design(p: OUParams, n: int = 2) -> NonExistence:
    n = _check_n(n)
    return NonExistence(Criterion.LAMBDA, n, (n - 1) / p.lam**2)


# --- all four parameters ---------------------------------------------------

def _log_objective(p: OUParams, d: np.ndarray) -> np.ndarray:
    """Log of the four-parameter criterion for an array of spacing vectors (last axis)."""
    with np.errstate(divide="ignore"):
        return (2.0 * np.log1p(np.sum(g_func(p, d), axis=-1))
                + np.log(np.sum(phi_func(p, d), axis=-1))
                + np.log(np.sum(psi_func(p, d), axis=-1)))


def _log_equidistant(p: OUParams, n: int, d):
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        return (2.0 * np.log1p((n - 1) * np.asarray(g_func(p, d)))
                + 2.0 * math.log(n - 1)
                + np.log(phi_func(p, d)) + np.log(psi_func(p, d)))


def _dlog_equidistant(p: OUParams, n: int, d: float) -> float:
    g = g_func(p, d)
    return (2.0 * (n - 1) * g_prime(p, d) / (1.0 + (n - 1) * g)
            + phi_prime(p, d) / phi_func(p, d) + psi_prime(p, d) / psi_func(p, d))


def _equidistant_optimum(p: OUParams, n: int) -> tuple[float, dict]:
    hi = 50.0 / p.lam
    step = min(hi / 4000.0, math.pi / (16.0 * p.omega))
    grid = np.arange(1, int(math.ceil(hi / step)) + 1) * step
    vals = _log_equidistant(p, n, grid)
    i = int(np.argmax(vals))
    if i == 0 or i == grid.size - 1:
        raise NonConvergence("equidistant maximum sits on the grid boundary",
                             {"grid_index": i, "grid_size": int(grid.size)})
    res = optimize.minimize_scalar(lambda x: -float(_log_equidistant(p, n, x)),
                                   bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                   method="golden", tol=1e-10)
    d = float(res.x)
    lo, hi_b = grid[i - 1], grid[i + 1]
    polished = False
    # golden section leaves ~sqrt(eps) error; a root of the analytic slope pins it
    if _dlog_equidistant(p, n, lo) > 0 > _dlog_equidistant(p, n, hi_b):
        root = optimize.brentq(lambda x: _dlog_equidistant(p, n, x), lo, hi_b,
                               xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if _log_equidistant(p, n, root) >= _log_equidistant(p, n, d) - 1e-13:
            d, polished = root, True
    return d, {"grid_points": int(grid.size), "golden_iterations": int(res.nit),
               "polished": polished}


def optimize_all_params(p: OUParams, n: int, mode: str = "equidistant",
                        n_starts: int = 9, seed: int = 0,
                        fatol: float = 1e-12, xatol: float = 1e-9,
                        max_rounds: int = 20) -> DesignResult:
    """Maximize ``(1 + sum g)^2 (sum phi)(sum psi)`` over the ``n - 1`` spacings.

    ``mode="equidistant"`` scans a grid in the common spacing, refines by
    golden section and polishes with the analytic derivative. ``mode="free"``
    runs Nelder-Mead in log-spacings from the equidistant optimum plus
    ``n_starts - 1`` perturbed seeds; each start is restarted until a round
    no longer improves the objective.
    """
    n = _check_n(n)
    q = _require_omega(p)
    d_eq, diag = _equidistant_optimum(q, n)
    if mode == "equidistant":
        diag["converged"] = True
        return _result(Criterion.ALL_PARAMS, np.full(n - 1, d_eq),
                       math.exp(float(_log_equidistant(q, n, d_eq))), diag)
    if mode != "free":
        raise ValueError(f"mode must be 'equidistant' or 'free', got {mode!r}")

    rng = np.random.default_rng(seed)
    dim = n - 1
    u0 = np.full(dim, math.log(d_eq))
    starts = [u0] + [u0 + rng.normal(0.0, 0.3, dim) for _ in range(n_starts - 1)]

    def neg(u):
        val = float(_log_objective(q, np.exp(u)))
        return -val if math.isfinite(val) else math.inf

    best_u, best_f = None, math.inf
    total_evals = 0
    rounds_used = []
    for u in starts:
        f_prev = neg(u)
        for r in range(max_rounds):
            res = optimize.minimize(neg, u, method="Nelder-Mead",
                                    options={"xatol": xatol, "fatol": fatol,
                                             "maxiter": 4000 * dim, "maxfev": 8000 * dim,
                                             "adaptive": dim > 2})
            total_evals += res.nfev
            u = res.x
            improved = f_prev - res.fun
            f_prev = res.fun
            if improved <= fatol:
                break
        else:
            raise NonConvergence("Nelder-Mead restarts kept improving",
                                 {"rounds": max_rounds, "last_improvement": improved})
        rounds_used.append(r + 1)
        if res.fun < best_f:
            best_u, best_f = u, res.fun
    d = np.exp(best_u)
    diag.update({"starts": n_starts, "restart_rounds": rounds_used,
                 "function_evaluations": total_evals,
                 "equidistant_spacing": d_eq, "converged": True})
    return _result(Criterion.ALL_PARAMS, d, math.exp(-best_f), diag)


def optimal_spacing(p: OUParams, criterion: Criterion | str, n: int = 2) -> DesignResult:
    """Dispatch on criterion name; the damping criterion raises since no optimum exists."""
    c = Criterion(criterion) if not isinstance(criterion, Criterion) else criterion
    if c is Criterion.TREND:
        return optimal_trend_spacing(p, n)
    if c is Criterion.OMEGA:
        return optimal_omega_spacing(p, n)
    if c is Criterion.COV_JOINT:
        return optimal_cov_joint_spacing(p, n)
    if c is Criterion.ALL_PARAMS:
        return optimize_all_params(p, n)
    raise ValueError("no D-optimal design exists for the damping parameter; "
                     "see reject_lambda_design")
