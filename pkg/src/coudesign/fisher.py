"""Fisher information for the trend and covariance parameters.

Closed forms are cheap sums over spacings. The ``oracle_*`` functions build
the dense covariance, its analytic parameter derivatives and evaluate the
textbook Gaussian formulas literally; they exist to check the closed forms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import (
    DENSE_MAX_N,
    Design,
    OUParams,
    TrendSpec,
    _assemble,
    _check_dense,
    _one_minus_q2,
    covariance_matrix,
    g_func,
    phi_func,
    psi_func,
)


@dataclass(frozen=True)
class FisherBlocks:
    """Nonzero blocks of the four-parameter information matrix.

    The trend block is ``q_n * I_2``; the covariance block is
    ``diag(i_lambda, i_omega)`` because the cross term vanishes identically.
    """

    q_n: float
    i_lambda: float
    i_omega: float
    i_lambda_omega: float = 0.0
    omega_zero: bool = False

    @property
    def trend_matrix(self) -> np.ndarray:
        return self.q_n * np.eye(2)

    @property
    def cov_matrix(self) -> np.ndarray:
        return np.array([[self.i_lambda, self.i_lambda_omega],
                         [self.i_lambda_omega, self.i_omega]])

    @property
    def matrix(self) -> np.ndarray:
        out = np.zeros((4, 4))
        out[:2, :2] = self.trend_matrix
        out[2:, 2:] = self.cov_matrix
        return out

    @property
    def det(self) -> float:
        return self.q_n**2 * (self.i_lambda * self.i_omega - self.i_lambda_omega**2)


def trend_info_general(p: OUParams, dz: Design, trend: TrendSpec) -> float:
    """Scalar ``Q(n)`` with trend information matrix ``Q(n) * I_2``.

    For consecutive points ``a = t_j``, ``b = t_{j+1}`` with ``q = exp(-lam d_j)``
    each spacing contributes

        [|f(a)|^2 + q^2 |f(b)|^2
         - 2q ((f1(a) f2(b) - f2(a) f1(b)) sin(omega d) + (f1(a) f1(b) + f2(a) f2(b)) cos(omega d))]
        / (1 - q^2)

    and ``|f(t_n)|^2`` is added once. The sign of the ``sin`` term matches the
    rotation direction of ``dY = A Y dt`` (covariance orientation of
    :func:`~coudesign.kernel.covariance_matrix`).
    """
    p.require_normalized()
    f1, f2 = trend.evaluate(dz.times)
    d = dz.spacings
    q = np.exp(-p.lam * d)
    a1, a2, b1, b2 = f1[:-1], f2[:-1], f1[1:], f2[1:]
    cross = (a1 * b2 - a2 * b1) * np.sin(p.omega * d)
    dot = (a1 * b1 + a2 * b2) * np.cos(p.omega * d)
    terms = (a1**2 + a2**2 + q * q * (b1**2 + b2**2) - 2.0 * q * (cross + dot)) / _one_minus_q2(p, d)
    return float(f1[-1] ** 2 + f2[-1] ** 2 + terms.sum())


def trend_info_constant(p: OUParams, spacings) -> float:
    """``1 + sum g(d)`` -- the constant-trend case, written on spacings directly."""
    return 1.0 + float(np.sum(g_func(p, np.asarray(spacings, dtype=float))))


def cov_info(p: OUParams, dz: Design) -> tuple[float, float, float]:
    """``(i_lambda, i_omega, cross)`` = ``(sum phi(d), sum psi(d), 0)``.

    Neither sum depends on ``omega``.
    """
    p.require_normalized()
    d = dz.spacings
    return float(np.sum(phi_func(p, d))), float(np.sum(psi_func(p, d))), 0.0


def fisher_blocks(p: OUParams, dz: Design, trend: TrendSpec) -> FisherBlocks:
    i_l, i_w, cross = cov_info(p, dz)
    return FisherBlocks(trend_info_general(p, dz, trend), i_l, i_w, cross,
                        omega_zero=(p.omega == 0))


def full_fim(p: OUParams, dz: Design, trend: TrendSpec) -> np.ndarray:
    """4x4 information on ``(m1, m2, lam, omega)``, block diagonal."""
    return fisher_blocks(p, dz, trend).matrix


def all_params_objective(p: OUParams, spacings) -> float:
    """D-criterion ``(1 + sum g)^2 (sum phi)(sum psi)`` for a constant trend."""
    d = np.asarray(spacings, dtype=float)
    return (trend_info_constant(p, d) ** 2
            * float(np.sum(phi_func(p, d))) * float(np.sum(psi_func(p, d))))


# --- dense oracle path -----------------------------------------------------

def trend_design_matrix(dz: Design, trend: TrendSpec) -> np.ndarray:
    """``H`` (2 x 2n): row 0 is d(mean)/d m1, row 1 is d(mean)/d m2.

    Observation order is ``(Z1(t_1), Z2(t_1), Z1(t_2), ...)``; with
    ``Z1 = m1 f1 - m2 f2 + Y1`` and ``Z2 = m2 f1 + m1 f2 + Y2`` this gives
    columns ``(f1, f2)`` in row 0 and ``(-f2, f1)`` in row 1.
    """
    f1, f2 = trend.evaluate(dz.times)
    h = np.empty((2, 2 * dz.n))
    h[0, 0::2], h[0, 1::2] = f1, f2
    h[1, 0::2], h[1, 1::2] = -f2, f1
    return h


def covariance_derivatives(p: OUParams, dz: Design,
                           max_n: int = DENSE_MAX_N) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``dC/dlam`` and ``dC/domega`` of the dense covariance."""
    p.require_normalized()
    _check_dense(dz.n, max_n)
    t = dz.times
    tau = t[:, None] - t[None, :]
    env = np.exp(-p.lam * np.abs(tau))
    c, s = np.cos(p.omega * tau), np.sin(p.omega * tau)

    def blocks(a, b):
        return _assemble(np.stack([np.stack([a, -b], -1), np.stack([b, a], -1)], -2))

    d_lam = blocks(-np.abs(tau) * env * c, -np.abs(tau) * env * s)
    d_om = blocks(-tau * env * s, tau * env * c)
    return d_lam, d_om


def oracle_trend_fim(p: OUParams, dz: Design, trend: TrendSpec,
                     max_n: int = DENSE_MAX_N) -> np.ndarray:
    """``H C^{-1} H^T`` with a dense solve."""
    c = covariance_matrix(p, dz, max_n)
    h = trend_design_matrix(dz, trend)
    return h @ np.linalg.solve(c, h.T)


def oracle_cov_fim(p: OUParams, dz: Design, max_n: int = DENSE_MAX_N) -> np.ndarray:
    """``1/2 tr(C^-1 dC_a C^-1 dC_b)`` for ``a, b in (lam, omega)``."""
    c = covariance_matrix(p, dz, max_n)
    d_lam, d_om = covariance_derivatives(p, dz, max_n)
    a = np.linalg.solve(c, d_lam)
    b = np.linalg.solve(c, d_om)
    i_ll = 0.5 * np.sum(a * a.T)
    i_ww = 0.5 * np.sum(b * b.T)
    i_lw = 0.5 * np.sum(a * b.T)
    return np.array([[i_ll, i_lw], [i_lw, i_ww]])


def oracle_full_fim(p: OUParams, dz: Design, trend: TrendSpec,
                    max_n: int = DENSE_MAX_N) -> np.ndarray:
    out = np.zeros((4, 4))
    out[:2, :2] = oracle_trend_fim(p, dz, trend, max_n)
    out[2:, 2:] = oracle_cov_fim(p, dz, max_n)
    return out
