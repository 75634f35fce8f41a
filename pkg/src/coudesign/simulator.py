"""Exact simulation of the complex OU process with trend, and GLS trend estimation.

Paths are generated by the exact Gaussian transition

    Y(t_{j+1}) = exp(A d_j) Y(t_j) + eps_j,   eps_j ~ N(0, v (1 - e^{-2 lam d_j}) I_2),

started from the stationary law ``N(0, v I_2)`` with ``v = sigma^2 / (2 lam)``.
Replicates are drawn in fixed blocks, each with its own generator derived
from ``(seed, block index)``; results do not depend on the thread count.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fisher import trend_design_matrix
from .kernel import (
    Design,
    OUParams,
    TrendParams,
    TrendSpec,
    _signed_blocks,
    covariance_inverse_closed,
    covariance_matrix,
)

BLOCK = 1024


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    z: np.ndarray  # (n, 2)
    rep: int


@dataclass(frozen=True)
class SamplePaths:
    """A batch of replicates observed on one design; ``z[r, j] = (Z1, Z2)(t_j)``."""

    times: np.ndarray
    z: np.ndarray
    seed: int | None
    params: OUParams
    trend: TrendSpec
    trend_params: TrendParams

    @property
    def reps(self) -> int:
        return self.z.shape[0]

    def __len__(self):
        return self.reps

    def __getitem__(self, r: int) -> SamplePath:
        return SamplePath(self.times, self.z[r], int(r) % self.reps)

    def __iter__(self):
        return (self[r] for r in range(self.reps))

    def to_csv(self) -> str:
        buf = io.StringIO()
        p = self.params
        buf.write(f"# lambda={p.lam!r}\n# omega={p.omega!r}\n"
                  f"# sigma2_over_2lambda={p.sigma2_over_2lambda!r}\n"
                  f"# trend={self.trend.name}\n# m1={self.trend_params.m1!r}\n"
                  f"# m2={self.trend_params.m2!r}\n# seed={self.seed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "z1", "z2", "rep"])
        for r in range(self.reps):
            for t, (z1, z2) in zip(self.times, self.z[r]):
                w.writerow([f"{t:.15g}", f"{z1:.15g}", f"{z2:.15g}", r])
        return buf.getvalue()


def thread_count() -> int:
    """Worker count from ``OU_DESIGN_THREADS`` (0 or unset means all CPUs)."""
    raw = os.environ.get("OU_DESIGN_THREADS", "0").strip() or "0"
    k = int(raw)
    if k < 0:
        raise ValueError("OU_DESIGN_THREADS must be >= 0")
    return k if k > 0 else (os.cpu_count() or 1)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _transition_block(p: OUParams, d: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    n = d.size + 1
    noise = rng.standard_normal((count, n, 2))
    y = np.empty((count, n, 2))
    y[:, 0] = noise[:, 0]
    mats = _signed_blocks(p, d)
    innov = np.sqrt(-np.expm1(-2.0 * p.lam * d))
    for j in range(n - 1):
        y[:, j + 1] = y[:, j] @ mats[j].T + innov[j] * noise[:, j + 1]
    return y


def _cholesky_block(chol: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    n = chol.shape[0] // 2
    return (rng.standard_normal((count, 2 * n)) @ chol.T).reshape(count, n, 2)


def _draw(draw_block, reps: int, seed: int) -> np.ndarray:
    blocks = [(b, min(BLOCK, reps - b * BLOCK)) for b in range(-(-reps // BLOCK))]

    def work(item):
        b, count = item
        return draw_block(count, _block_rng(seed, b))

    workers = min(thread_count(), len(blocks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(work, blocks))
    else:
        parts = [work(item) for item in blocks]
    return np.concatenate(parts, axis=0)


def _check_reps(reps) -> int:
    if int(reps) != reps or reps < 1:
        raise ValueError(f"reps must be a positive integer, got {reps}")
    return int(reps)


def sample_paths(p: OUParams, dz: Design, trend: TrendSpec, tp: TrendParams,
                 reps: int, seed: int) -> SamplePaths:
    """Draw ``reps`` independent paths of ``Z = m f + Y`` at the design times."""
    reps = _check_reps(reps)
    d = dz.spacings
    y = _draw(lambda count, rng: _transition_block(p, d, count, rng), reps, seed)
    y *= np.sqrt(p.sigma2_over_2lambda)
    z = y + tp.mean(trend, dz.times)
    return SamplePaths(dz.times, z, seed, p, trend, tp)


def sample_paths_cholesky(p: OUParams, dz: Design, trend: TrendSpec, tp: TrendParams,
                          reps: int, seed: int) -> SamplePaths:
    """Same law as :func:`sample_paths`, drawn jointly through a Cholesky factor. O(n^3)."""
    reps = _check_reps(reps)
    chol = np.linalg.cholesky(covariance_matrix(OUParams(p.lam, p.omega), dz))
    y = _draw(lambda count, rng: _cholesky_block(chol, count, rng), reps, seed)
    y *= np.sqrt(p.sigma2_over_2lambda)
    z = y + tp.mean(trend, dz.times)
    return SamplePaths(dz.times, z, seed, p, trend, tp)


def gls_trend_estimate(path: SamplePaths | SamplePath, p: OUParams,
                       trend: TrendSpec) -> np.ndarray:
    """GLS estimate ``(H C^-1 H^T)^-1 H C^-1 z`` of ``(m1, m2)``.

    Accepts a single path (returns shape ``(2,)``) or a batch (``(reps, 2)``).
    The covariance parameters are taken as known; the stationary variance
    cancels, so only ``lam`` and ``omega`` enter.
    """
    unit = OUParams(p.lam, p.omega)
    dz = Design(path.times)
    c_inv = covariance_inverse_closed(unit, dz)
    h = trend_design_matrix(dz, trend)
    w = h @ c_inv                       # (2, 2n)
    info = w @ h.T
    z = np.asarray(path.z)
    flat = z.reshape(z.shape[:-2] + (2 * dz.n,))
    return np.linalg.solve(info, (flat @ w.T)[..., None])[..., 0] if flat.ndim > 1 \
        else np.linalg.solve(info, w @ flat)


@dataclass(frozen=True)
class MonteCarloSummary:
    reps: int
    mean: np.ndarray
    covariance: np.ndarray
    predicted_covariance: np.ndarray
    max_relative_error: float

    def as_dict(self) -> dict:
        return {"reps": self.reps,
                "mean": self.mean.tolist(),
                "covariance": self.covariance.tolist(),
                "predicted_covariance": self.predicted_covariance.tolist(),
                "max_relative_error": self.max_relative_error}


def validate_gls(p: OUParams, dz: Design, trend: TrendSpec, tp: TrendParams,
                 reps: int, seed: int) -> MonteCarloSummary:
    """Compare the empirical covariance of GLS estimates with ``Q(n)^-1 I_2``.

    The relative error is taken per entry against the predicted diagonal.
    """
    from .fisher import trend_info_general

    paths = sample_paths(OUParams(p.lam, p.omega), dz, trend, tp, reps, seed)
    est = gls_trend_estimate(paths, p, trend)
    cov = np.cov(est, rowvar=False)
    pred = np.eye(2) / trend_info_general(OUParams(p.lam, p.omega), dz, trend)
    err = float(np.max(np.abs(cov - pred)) / pred[0, 0])
    return MonteCarloSummary(reps, est.mean(axis=0), cov, pred, err)
