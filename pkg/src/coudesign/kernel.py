"""Core types and scalar/matrix building blocks for the complex OU process.

The process ``Y = Y1 + i Y2`` is handled through its real two-dimensional
form ``dY = A Y dt + sigma dW`` with ``A = [[-lam, -omega], [omega, -lam]]``,
so that the stationary cross-covariance is

    E[Y(t + tau) Y(t)^T] = sigma^2 / (2 lam) * exp(A tau)
                         = sigma^2 / (2 lam) * exp(-lam tau) * Rot(omega tau).

Every scalar information function is evaluated through ``q = exp(-lam x)``
(and ``expm1`` for the ``1 - q^k`` factors) so nothing overflows for large
``lam * x`` and nothing cancels catastrophically for small ``lam * x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DENSE_MAX_N = 2048


class NormalizationError(ValueError):
    """Raised when a formula that assumes unit stationary variance gets other params."""


@dataclass(frozen=True)
class OUParams:
    """Parameters of the complex OU process.

    Parameters
    ----------
    lam : float
        Damping rate, strictly positive.
    omega : float
        Angular frequency, any real.
    sigma2_over_2lambda : float
        Stationary variance of each coordinate. The information formulas
        only hold for the correlation-scale process where this equals 1.
    """

    lam: float
    omega: float
    sigma2_over_2lambda: float = 1.0

    def __post_init__(self):
        for name in ("lam", "omega", "sigma2_over_2lambda"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.sigma2_over_2lambda <= 0:
            raise ValueError("sigma2_over_2lambda must be > 0")

    @classmethod
    def from_sigma(cls, lam: float, omega: float, sigma: float) -> "OUParams":
        return cls(lam, omega, sigma**2 / (2.0 * lam))

    @property
    def sigma(self) -> float:
        return math.sqrt(2.0 * self.lam * self.sigma2_over_2lambda)

    def require_normalized(self) -> "OUParams":
        if self.sigma2_over_2lambda != 1.0:
            raise NormalizationError(
                "information formulas need unit stationary variance "
                f"(sigma^2/(2 lam) = 1), got {self.sigma2_over_2lambda}"
            )
        return self

    def scaled(self, c: float) -> "OUParams":
        """Time-rescaled parameters ``(c lam, c omega)``."""
        return OUParams(c * self.lam, c * self.omega, self.sigma2_over_2lambda)


@dataclass(frozen=True)
class Design:
    """Observation instants ``0 <= t_1 < ... < t_n``."""

    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        if t.size < 2:
            raise ValueError("a design needs at least two observation times")
        if not np.all(np.isfinite(t)):
            raise ValueError("design times must be finite")
        if t[0] < 0:
            raise ValueError("design times must be non-negative")
        if np.any(np.diff(t) <= 0):
            raise ValueError("design times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def from_spacings(cls, spacings, start: float = 0.0) -> "Design":
        d = np.asarray(spacings, dtype=float).reshape(-1)
        return cls(np.concatenate(([start], start + np.cumsum(d))))

    @classmethod
    def equidistant(cls, n: int, spacing: float, start: float = 0.0) -> "Design":
        return cls.from_spacings(np.full(n - 1, float(spacing)), start)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.times)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class TrendSpec:
    """Real basis pair of the complex trend ``f = f1 + i f2``.

    Both callables must accept numpy arrays.
    """

    name: str
    f1: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    f2: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        return (np.broadcast_to(np.asarray(self.f1(t), dtype=float), t.shape),
                np.broadcast_to(np.asarray(self.f2(t), dtype=float), t.shape))

    @classmethod
    def constant(cls) -> "TrendSpec":
        return CONSTANT

    @classmethod
    def chandler(cls) -> "TrendSpec":
        return CHANDLER

    @classmethod
    def preset(cls, name: str) -> "TrendSpec":
        try:
            return TREND_PRESETS[name.lower()]
        except KeyError:
            raise ValueError(
                f"unknown trend preset {name!r}; choose from {sorted(TREND_PRESETS)}"
            ) from None


CONSTANT = TrendSpec("constant", np.ones_like, np.zeros_like)
# one cycle per unit time, i.e. m * exp(2 pi i t)
CHANDLER = TrendSpec("chandler",
                     lambda t: np.cos(2 * np.pi * t),
                     lambda t: np.sin(2 * np.pi * t))
TREND_PRESETS = {"constant": CONSTANT, "chandler": CHANDLER}


@dataclass(frozen=True)
class TrendParams:
    m1: float
    m2: float

    def __post_init__(self):
        if not (math.isfinite(self.m1) and math.isfinite(self.m2)):
            raise ValueError("trend coefficients must be finite")

    def mean(self, trend: TrendSpec, t) -> np.ndarray:
        """Mean of ``(Z1, Z2)`` at times ``t``, shape ``(len(t), 2)``."""
        f1, f2 = trend.evaluate(t)
        return np.stack([self.m1 * f1 - self.m2 * f2,
                         self.m2 * f1 + self.m1 * f2], axis=-1)


# --- 2x2 algebra -----------------------------------------------------------

def rotation_block(p: OUParams, tau: float) -> np.ndarray:
    """``exp(A tau) = exp(-lam tau) [[cos, -sin], [sin, cos]](omega tau)``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    c, s = math.cos(p.omega * tau), math.sin(p.omega * tau)
    return math.exp(-p.lam * tau) * np.array([[c, -s], [s, c]])


def _signed_blocks(p: OUParams, tau: np.ndarray) -> np.ndarray:
    """Blocks ``exp(-lam |tau|) Rot(omega tau)`` for signed lags, shape ``tau.shape + (2, 2)``.

    For ``tau >= 0`` this is ``exp(A tau)``; for ``tau < 0`` it is
    ``exp(A^T |tau|)``, the transpose.
    """
    env = np.exp(-p.lam * np.abs(tau))
    c = env * np.cos(p.omega * tau)
    s = env * np.sin(p.omega * tau)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _assemble(blocks: np.ndarray) -> np.ndarray:
    """``(n, n, 2, 2)`` block array to a ``(2n, 2n)`` matrix."""
    n = blocks.shape[0]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def _check_dense(n: int, max_n: int) -> None:
    if n > max_n:
        raise ValueError(
            f"dense covariance limited to n <= {max_n} observations (got {n}); "
            "use the closed-form routines for large designs"
        )


def covariance_matrix(p: OUParams, dz: Design, max_n: int = DENSE_MAX_N) -> np.ndarray:
    """Dense ``2n x 2n`` covariance of ``(Y1(t_1), Y2(t_1), ..., Y2(t_n))``.

    Block ``(k, j)`` is ``E[Y(t_k) Y(t_j)^T] = exp(A (t_k - t_j))`` for
    ``k >= j``; the upper blocks are the transposes.
    """
    p.require_normalized()
    _check_dense(dz.n, max_n)
    t = dz.times
    tau = t[:, None] - t[None, :]
    return _assemble(_signed_blocks(p, tau))


def _one_minus_q2(p: OUParams, d: np.ndarray) -> np.ndarray:
    return -np.expm1(-2.0 * p.lam * d)


def covariance_inverse_closed(p: OUParams, dz: Design) -> np.ndarray:
    """Block-tridiagonal inverse of :func:`covariance_matrix`, built in closed form.

    With ``u_k = 1 / (1 - exp(-2 lam d_k))``: first diagonal block
    ``u_1 I``, last ``u_{n-1} I``, interior ``(u_k + exp(-2 lam d_{k-1}) u_{k-1}) I``;
    block ``(k+1, k)`` is ``-exp(A d_k) u_k`` and block ``(k, k+1)`` its transpose.
    """
    p.require_normalized()
    d = dz.spacings
    n = dz.n
    u = 1.0 / _one_minus_q2(p, d)
    q2u = np.exp(-2.0 * p.lam * d) * u
    diag = np.empty(n)
    diag[0] = u[0]
    diag[-1] = u[-1]
    diag[1:-1] = u[1:] + q2u[:-1]

    out = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    out[2 * idx, 2 * idx] = diag
    out[2 * idx + 1, 2 * idx + 1] = diag
    off = -_signed_blocks(p, d) * u[:, None, None]
    for k in range(n - 1):
        out[2 * k + 2:2 * k + 4, 2 * k:2 * k + 2] = off[k]
        out[2 * k:2 * k + 2, 2 * k + 2:2 * k + 4] = off[k].T
    return out


# --- scalar information functions ------------------------------------------

def _asarray_nonneg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be non-negative")
    return x


def _scalarize(out, x):
    return float(out) if np.ndim(x) == 0 else out


def g_func(p: OUParams, x):
    """Trend information per spacing, ``(1 - 2q cos(omega x) + q^2) / (1 - q^2)``.

    ``g(0) = 0``. The numerator is rewritten as
    ``(1 - q)^2 + 4 q sin^2(omega x / 2)`` to stay accurate near zero.
    """
    x = _asarray_nonneg(x)
    xs = np.where(x > 0, x, 1.0)
    q = np.exp(-p.lam * xs)
    num = np.expm1(-p.lam * xs) ** 2 + 4.0 * q * np.sin(0.5 * p.omega * xs) ** 2
    out = np.where(x > 0, num / _one_minus_q2(p, xs), 0.0)
    return _scalarize(out, x)


def g_envelope(p: OUParams, x):
    """Upper bound of :func:`g_func` with ``cos`` replaced by ``-1``: ``coth(lam x / 2)``."""
    x = np.asarray(x, dtype=float)
    return _scalarize(1.0 / np.tanh(0.5 * p.lam * x), x)


def phi_func(p: OUParams, x):
    """Damping information per spacing, ``2 x^2 q^2 (1 + q^2) / (1 - q^2)^2``; ``phi(0) = 1/lam^2``."""
    x = _asarray_nonneg(x)
    xs = np.where(x > 0, x, 1.0)
    s = np.exp(-2.0 * p.lam * xs)
    out = np.where(x > 0, 2.0 * xs**2 * s * (1.0 + s) / _one_minus_q2(p, xs) ** 2,
                   1.0 / p.lam**2)
    return _scalarize(out, x)


def psi_func(p: OUParams, x):
    """Frequency information per spacing, ``2 x^2 q^2 / (1 - q^2)``; ``psi(0) = 0``."""
    x = _asarray_nonneg(x)
    xs = np.where(x > 0, x, 1.0)
    s = np.exp(-2.0 * p.lam * xs)
    out = np.where(x > 0, 2.0 * xs**2 * s / _one_minus_q2(p, xs), 0.0)
    return _scalarize(out, x)


def r_scaled(p: OUParams, x):
    """``2 exp(-lam x) r(x)``; same sign as ``r`` and as ``g'`` but bounded.

    ``(1 + q^2) cos - 2q`` is expanded as ``(1 - q)^2 - 2 (1 + q^2) sin^2(omega x / 2)``
    so the value keeps full relative accuracy as ``x -> 0``.
    """
    x = np.asarray(x, dtype=float)
    q = np.exp(-p.lam * x)
    wx = p.omega * x
    out = (p.lam * (np.expm1(-p.lam * x) ** 2 - 2.0 * (1.0 + q * q) * np.sin(0.5 * wx) ** 2)
           + p.omega * _one_minus_q2(p, x) * np.sin(wx))
    return _scalarize(out, x)


def r_func(p: OUParams, x):
    """Numerator of ``g'``: ``lam cosh(lam x) cos(omega x) + omega sinh(lam x) sin(omega x) - lam``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = np.asarray(r_scaled(p, x)) * (0.5 * np.exp(p.lam * x))
    return _scalarize(out, x)


def g_prime(p: OUParams, x):
    """``g'(x) = r(x) / sinh^2(lam x)``."""
    x = np.asarray(x, dtype=float)
    q = np.exp(-p.lam * x)
    out = 2.0 * q * np.asarray(r_scaled(p, x)) / _one_minus_q2(p, x) ** 2
    return _scalarize(out, x)


def g_second_at_critical(p: OUParams, x):
    """``g''`` at a root of ``r``: ``(lam^2 + omega^2) cos(omega x) / sinh(lam x)``."""
    x = np.asarray(x, dtype=float)
    out = ((p.lam**2 + p.omega**2) * np.cos(p.omega * x)
           * 2.0 * np.exp(-p.lam * x) / _one_minus_q2(p, x))
    return _scalarize(out, x)


def kappa_func(x):
    """Ratio whose level sets give the critical points of ``(sum phi)(sum psi)`` at ``lam = 1``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("kappa is defined for x > 0")
    e2, e4 = np.exp(-2.0 * x), np.exp(-4.0 * x)
    out = (1.0 - x + (x - 2.0) * e2 + e4) / (x - 1.0 + 3.0 * x * e2 + e4)
    return _scalarize(out, x)


def _derivs(p: OUParams, x):
    """First and second derivatives of phi and psi for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    lam = p.lam
    s = np.exp(-2.0 * lam * x)
    om = _one_minus_q2(p, x)

    a = 1.0 - lam * x - s
    dpsi = 4.0 * x * s * a / om**2
    n_psi_prime = 4.0 * s * a - 8.0 * lam * x * s * a + 4.0 * x * s * (2.0 * lam * s - lam)
    d2psi = n_psi_prime / om**2 - dpsi * 4.0 * lam * s / om

    b = 1.0 - lam * x - 3.0 * lam * x * s - s * s
    dphi = 4.0 * x * s * b / om**3
    db = -lam - 3.0 * lam * s + 6.0 * lam**2 * x * s + 4.0 * lam * s * s
    n_phi_prime = 4.0 * s * b - 8.0 * lam * x * s * b + 4.0 * x * s * db
    d2phi = n_phi_prime / om**3 - dphi * 6.0 * lam * s / om
    return dphi, d2phi, dpsi, d2psi


def phi_prime(p: OUParams, x):
    x = np.asarray(x, dtype=float)
    return _scalarize(_derivs(p, x)[0], x)


def phi_second(p: OUParams, x):
    x = np.asarray(x, dtype=float)
    return _scalarize(_derivs(p, x)[1], x)


def psi_prime(p: OUParams, x):
    x = np.asarray(x, dtype=float)
    return _scalarize(_derivs(p, x)[2], x)


def psi_second(p: OUParams, x):
    x = np.asarray(x, dtype=float)
    return _scalarize(_derivs(p, x)[3], x)
