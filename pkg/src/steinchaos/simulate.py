"""Monte Carlo: fGn sampling, Hermite-power sums, empirical distances.

Randomness is counter-based: each block of 4096 rows draws from its own
Philox stream keyed by (seed, block index), so output is bit-identical
across runs and across any hypothetical worker layout, and extending the
sample count extends the batch without changing existing rows.

The normalized fBm increment vector is stationary Gaussian with
autocovariance rho_H; rows are drawn either through a Cholesky factor of
the n x n Toeplitz covariance or, for long vectors, through circulant
embedding of size 2n (exact in distribution whenever the embedding
eigenvalues are nonnegative; otherwise we silently fall back to Cholesky
and record the fallback in the batch metadata).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import toeplitz

from .breuer_major import BmInstance, rho_values, sigma
from .chaos import hermite

__all__ = [
    "SimulationError",
    "SampleBatch",
    "sample_fbm_increments",
    "sample_Zn",
    "empirical_kolmogorov",
    "empirical_wasserstein",
    "chatterjee_weight",
]

BLOCK_ROWS = 4096
CIRCULANT_MIN_N = 1025


class SimulationError(Exception):
    """Raised on invalid sampling or distance-estimation inputs."""


@dataclass(frozen=True)
class SampleBatch:
    """Deterministic draw: same seed + meta reproduce identical values."""

    values: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)


def _stream(seed: int, block: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(block)])
    return np.random.Generator(np.random.Philox(key=key))


def _block_sizes(count: int) -> list[tuple[int, int]]:
    return [
        (block, min(BLOCK_ROWS, count - block * BLOCK_ROWS))
        for block in range((count + BLOCK_ROWS - 1) // BLOCK_ROWS)
    ]


def _cholesky_factor(cov: np.ndarray) -> np.ndarray:
    scale = float(np.abs(np.diag(cov)).max()) or 1.0
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(cov + jitter * scale * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-15 if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-10:
                raise SimulationError("covariance is numerically singular") from None


def _circulant_eigs(H: float, n: int) -> np.ndarray | None:
    vals = rho_values(H, n)
    first_row = np.concatenate([vals, vals[-2:0:-1]])
    lam = np.fft.fft(first_row).real
    if lam.min() < -1e-9 * lam.max():
        return None
    return np.clip(lam, 0.0, None)


def sample_fbm_increments(
    H: float, n: int, count: int, seed: int, method: str = "auto"
) -> SampleBatch:
    """count independent rows of {n^H (B_{(k+1)/n} - B_{k/n})}, k < n."""
    if not 0.0 < H < 1.0:
        raise SimulationError(f"Hurst index must lie in (0,1), got {H}")
    if n < 1 or count < 0:
        raise SimulationError("need n >= 1 and count >= 0")
    if method not in ("auto", "cholesky", "circulant"):
        raise SimulationError(f"unknown method {method!r}")

    use_circulant = method == "circulant" or (method == "auto" and n >= CIRCULANT_MIN_N)
    fallback = False
    lam = None
    if use_circulant:
        lam = _circulant_eigs(H, n)
        if lam is None:
            use_circulant = False
            fallback = True

    # Partial blocks are computed at full block size and sliced: the BLAS and
    # FFT summation orders depend on the operand shapes, so fixed-shape
    # blocks are what makes row i depend only on (seed, i), never on count.
    out = np.empty((count, n))
    if use_circulant:
        m = 2 * n
        root = np.sqrt(lam)
        for block, rows in _block_sizes(count):
            rng = _stream(seed, block)
            draws = (BLOCK_ROWS + 1) // 2
            z = rng.standard_normal((draws, m)) + 1j * rng.standard_normal((draws, m))
            y = np.fft.fft(z * root, axis=1) / math.sqrt(m)
            pair = np.empty((2 * draws, n))
            pair[0::2] = y.real[:, :n]
            pair[1::2] = y.imag[:, :n]
            out[block * BLOCK_ROWS : block * BLOCK_ROWS + rows] = pair[:rows]
        generator = "circulant-embedding"
    else:
        factor = _cholesky_factor(toeplitz(rho_values(H, n - 1)))
        for block, rows in _block_sizes(count):
            rng = _stream(seed, block)
            z = rng.standard_normal((BLOCK_ROWS, n))
            out[block * BLOCK_ROWS : block * BLOCK_ROWS + rows] = (
                z @ factor.T
            )[:rows]
        generator = "cholesky-toeplitz"

    meta = {
        "generator": generator,
        "H": H,
        "n": n,
        "count": count,
        "circulant_fallback": fallback,
    }
    return SampleBatch(values=out, seed=seed, meta=meta)


def sample_Zn(H: float, q: int, n: int, count: int, seed: int) -> SampleBatch:
    """count draws of Z_n = (1/(sigma sqrt(n))) sum_k H_q(increment_k)."""
    inst = BmInstance(H, q, n)  # validates the (H, q) admissible range
    increments = sample_fbm_increments(H, n, count, seed)
    sig = sigma(inst.H, inst.q)
    values = np.asarray(hermite(q, increments.values)).sum(axis=1) / (
        sig * math.sqrt(n)
    )
    meta = dict(increments.meta)
    meta.update({"generator": "breuer-major-Zn", "q": q, "sigma": sig,
                 "increments": increments.meta["generator"]})
    return SampleBatch(values=values, seed=seed, meta=meta)


def empirical_kolmogorov(samples: np.ndarray, cdf: Callable) -> float:
    """Exact sup_z |F_emp(z) - F(z)|, evaluated on both sides of each jump."""
    data = np.sort(np.asarray(samples, dtype=float).ravel())
    if data.size == 0:
        raise SimulationError("empty sample")
    values, counts = np.unique(data, return_counts=True)
    above = np.cumsum(counts) / data.size
    below = np.concatenate([[0.0], above[:-1]])
    target = np.asarray(cdf(values), dtype=float)
    return float(np.max(np.maximum(np.abs(above - target), np.abs(below - target))))


def empirical_wasserstein(samples: np.ndarray, quantile: Callable) -> float:
    """Mean |order statistic - target quantile| at plotting positions (i-1/2)/N."""
    data = np.sort(np.asarray(samples, dtype=float).ravel())
    if data.size == 0:
        raise SimulationError("empty sample")
    positions = (np.arange(data.size) + 0.5) / data.size
    return float(np.mean(np.abs(data - np.asarray(quantile(positions), dtype=float))))


def chatterjee_weight(
    grad_g: Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    t_nodes: int = 64,
    mc_count: int = 20_000,
    seed: int = 0,
) -> float:
    """Interpolation weight S(v) of the Gaussian-perturbation identity:

        S(v) = int_0^1 (2 sqrt(t))^{-1}
               E[ sum_i d_i g(v) d_i g(sqrt(t) v + sqrt(1-t) V) ] dt,

    with V standard normal.  The substitution t = u^2 removes the kernel
    singularity, leaving int_0^1 E[...](u) du, handled by Gauss-Legendre in
    u and a shared Monte Carlo batch over V.
    """
    point = np.asarray(v, dtype=float)
    if point.ndim != 1:
        raise SimulationError("v must be a single point (1-d array)")
    grad_at_v = np.asarray(grad_g(point[None, :]), dtype=float).reshape(-1)
    if grad_at_v.shape != point.shape:
        raise SimulationError("gradient oracle returned a wrong shape")
    nodes, weights = np.polynomial.legendre.leggauss(int(t_nodes))
    u = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    normals = _stream(seed, 0).standard_normal((int(mc_count), point.size))
    total = 0.0
    for uj, wj in zip(u, w):
        pts = uj * point[None, :] + math.sqrt(max(1.0 - uj * uj, 0.0)) * normals
        grads = np.asarray(grad_g(pts), dtype=float)
        total += wj * float(np.mean(grads @ grad_at_v))
    return total
