"""Critical values by simulating the limiting Gaussian functionals.

The studentized CUSUM field is approximated by a truncated Karhunen-Loeve
expansion driven by independent Brownian bridges; the jump band uses
Gaussian vectors in spline coordinates. All draws come from counter-based
streams keyed by ``(seed, tag, block)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import DegenerateVarianceError, ValidationError
from .lrcov import _sigma_matrix, rescale_fn
from .splinecore import EvalGrid, SplineBasis

VARIANCE_SHARE = 0.99
EIGEN_FLOOR = 1e-10
MIN_DRAWS = 100
_SUBBATCH = 16


@dataclass(frozen=True, eq=False)
class KernelEigen:
    """Positive eigenpairs of the correlation kernel, tabulated on ``grid``.

    Eigenfunctions are orthonormal under the grid's quadrature weights.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    kappa: int
    grid: EvalGrid

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())


@dataclass(frozen=True, eq=False)
class QuantileResult:
    level: float
    value: float
    draws: int
    exceed_count: int | None = None
    samples: np.ndarray | None = None

    @property
    def p_value(self) -> float | None:
        if self.exceed_count is None:
            return None
        return (1 + self.exceed_count) / (self.draws + 1)


def psd_sqrt(s: np.ndarray) -> np.ndarray:
    """A factor ``R`` with ``R R^T = s`` for symmetric PSD ``s``."""
    vals, vecs = np.linalg.eigh(0.5 * (s + s.T))
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def choose_kappa(eigenvalues: np.ndarray, share: float = VARIANCE_SHARE) -> int:
    """Smallest ``v`` whose leading eigenvalues explain more than ``share``."""
    ratio = np.cumsum(eigenvalues) / eigenvalues.sum()
    hit = np.nonzero(ratio > share)[0]
    return int(hit[0] + 1) if len(hit) else len(eigenvalues)


def kernel_eigen(sigma, basis: SplineBasis, grid: EvalGrid) -> KernelEigen:
    """Eigen-decompose ``C(x, x') = r(x)^{-1/2} B(x)^T Sigma B(x') r(x')^{-1/2}``.

    The kernel has rank at most ``dim``, so the weighted operator is reduced to
    a ``dim x dim`` problem: with ``A = W^{1/2} F Sigma^{1/2}`` (``F`` the
    rescaled basis), the nonzero spectrum is that of ``A^T A`` and each
    eigenfunction is ``F Sigma^{1/2} v / sqrt(lambda)``.
    """
    s = _sigma_matrix(sigma)
    r = rescale_fn(s, basis, grid.x)
    f = basis.design_matrix(grid.x) / np.sqrt(r)[:, None]
    fs = f @ psd_sqrt(s)
    a = np.sqrt(grid.w)[:, None] * fs
    vals, vecs = np.linalg.eigh(a.T @ a)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    if not vals[0] > 0.0:
        raise DegenerateVarianceError("covariance kernel has no positive eigenvalue")
    keep = vals > EIGEN_FLOOR * vals[0]
    vals, vecs = vals[keep], vecs[:, keep]
    phi = fs @ vecs / np.sqrt(vals)
    # fix signs so the decomposition is reproducible across LAPACK builds
    flip = np.sign(phi[np.argmax(np.abs(phi), axis=0), np.arange(phi.shape[1])])
    phi = phi * flip
    return KernelEigen(eigenvalues=vals, eigenfunctions=phi, kappa=choose_kappa(vals), grid=grid)


def sim_bridge(n: int, ks, gen: np.random.Generator, size=()) -> np.ndarray:
    """Brownian bridges sampled on the lattice ``k/n`` and restricted to ``ks``.

    A random walk with ``N(0, 1/n)`` steps gives ``W(k/n)``; the bridge is
    ``W(t) - t W(1)``. Output shape is ``size + (len(ks),)``.
    """
    size = (size,) if np.isscalar(size) else tuple(size)
    ks = np.asarray(ks, dtype=np.int64)
    if np.any(ks < 0) or np.any(ks > n):
        raise ValidationError("bridge lattice indices must lie in [0, n]")
    steps = gen.standard_normal(size + (n,)) / np.sqrt(n)
    w = np.concatenate([np.zeros(size + (1,)), np.cumsum(steps, axis=-1)], axis=-1)
    t = np.arange(n + 1) / n
    bridge = w - t * w[..., -1:]
    return bridge[..., ks]


def empirical_quantile(samples: np.ndarray, alpha: float) -> float:
    """Upper-``alpha`` order statistic: smallest value with ECDF >= 1 - alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    return float(np.quantile(samples, 1.0 - alpha, method="inverted_cdf"))


def _result(samples: np.ndarray, alpha: float, observed: float | None) -> QuantileResult:
    exceed = None if observed is None else int(np.sum(samples >= observed))
    return QuantileResult(level=alpha, value=empirical_quantile(samples, alpha), draws=len(samples), exceed_count=exceed, samples=samples)


def _check_draws(draws: int):
    if draws < MIN_DRAWS:
        raise ValidationError(f"at least {MIN_DRAWS} Monte Carlo draws are needed, got {draws}")


def simulate_test_suprema(eig: KernelEigen, n: int, ks, draws: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Simulated ``sup_t Xi(t)`` (L2 test) and ``sup_{t,x} |Upsilon(t, x)|`` (sup test)."""
    _check_draws(draws)
    kappa = eig.kappa
    lam = eig.eigenvalues[:kappa]
    load = eig.eigenfunctions[:, :kappa] * np.sqrt(lam)  # (x, kappa)
    s_sup = np.empty(draws)
    t_sup = np.empty(draws)
    for block, lo in enumerate(range(0, draws, rngmod.BLOCK)):
        hi = min(lo + rngmod.BLOCK, draws)
        gen = rngmod.stream(seed, rngmod.BRIDGE, block)
        br = sim_bridge(n, ks, gen, size=(hi - lo, kappa))  # (b, kappa, t)
        s_sup[lo:hi] = np.max(np.einsum("k,bkt->bt", lam, br**2), axis=1)
        for sub in range(0, hi - lo, _SUBBATCH):
            chunk = br[sub : sub + _SUBBATCH]
            field = np.swapaxes(chunk, 1, 2) @ load.T  # (b, t, x)
            t_sup[lo + sub : lo + sub + len(chunk)] = np.max(np.abs(field), axis=(1, 2))
    return s_sup, t_sup


def quantiles_test(eig: KernelEigen, n: int, ks, draws: int, alpha: float, seed: int, observed: tuple[float, float] | None = None) -> tuple[QuantileResult, QuantileResult]:
    """Critical values (and p-values when ``observed = (S_n, T_n)``) for both tests."""
    s_sup, t_sup = simulate_test_suprema(eig, n, ks, draws, seed)
    obs_s, obs_t = (None, None) if observed is None else observed
    return _result(s_sup, alpha, obs_s), _result(t_sup, alpha, obs_t)


def simulate_jump_suprema(sigma, basis: SplineBasis, grid: EvalGrid, draws: int, seed: int) -> np.ndarray:
    """``sup_x |B(x)^T Z| / sqrt(r(x))`` for ``Z ~ N(0, Sigma)``."""
    _check_draws(draws)
    s = _sigma_matrix(sigma)
    if not np.any(s):
        return np.zeros(draws)
    root = psd_sqrt(s)
    f = basis.design_matrix(grid.x) / np.sqrt(rescale_fn(s, basis, grid.x))[:, None]
    load = f @ root  # (x, dim)
    out = np.empty(draws)
    for block, lo in enumerate(range(0, draws, rngmod.BLOCK)):
        hi = min(lo + rngmod.BLOCK, draws)
        z = rngmod.stream(seed, rngmod.JUMP, block).standard_normal((hi - lo, basis.dim))
        out[lo:hi] = np.max(np.abs(z @ load.T), axis=1)
    return out


def quantile_jump(sigma, basis: SplineBasis, grid: EvalGrid, draws: int, alpha: float, seed: int) -> QuantileResult:
    return _result(simulate_jump_suprema(sigma, basis, grid, draws, seed), alpha, None)
