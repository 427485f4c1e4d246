"""Weighted least-squares spline fits of mean functions and BIC knot choice."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .dataset import FunctionalDataset
from .errors import SingularDesignError, ValidationError
from .splinecore import Design, SplineBasis, _check_range, design, make_grid

MAX_CONDITION = 1e12
RIDGE = 1e-8


class GramFactor:
    """Banded Cholesky factor of a weighted Gram matrix.

    If the matrix is singular or its condition number exceeds ``1e12``, a
    ridge of ``1e-8 * trace / dim`` is added once before factoring.
    """

    def __init__(self, gram: np.ndarray, bandwidth: int, label: str = "curves"):
        gram = np.asarray(gram, dtype=float)
        dim = gram.shape[0]
        self.ridge = 0.0
        if not _well_conditioned(gram):
            self.ridge = RIDGE * np.trace(gram) / dim
            gram = gram + self.ridge * np.eye(dim)
            if not _well_conditioned(gram):
                raise SingularDesignError(f"Gram matrix over {label} is singular (condition > {MAX_CONDITION:.0e})")
        self.matrix = gram
        u = bandwidth
        ab = np.zeros((u + 1, dim))
        for d in range(u + 1):
            ab[u - d, d:] = np.diagonal(gram, d)
        self._cb = cholesky_banded(ab, lower=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self._cb, False), rhs, check_finite=False)

    def sandwich(self, mid: np.ndarray) -> np.ndarray:
        """``G^{-1} mid G^{-1}`` without forming the inverse."""
        left = self.solve(mid)
        return self.solve(left.T).T


def _well_conditioned(gram: np.ndarray) -> bool:
    if not np.all(np.isfinite(gram)):
        return False
    ev = np.linalg.eigvalsh(gram)
    return ev[0] > 0 and ev[-1] / ev[0] <= MAX_CONDITION


@dataclass(frozen=True, eq=False)
class MeanFit:
    coeffs: np.ndarray
    basis: SplineBasis
    curve_range: tuple[int, int]

    def __call__(self, x) -> np.ndarray:
        return self.basis.design_matrix(x) @ self.coeffs

    evaluate = __call__


def range_factor(d: Design, start: int, stop: int) -> GramFactor:
    return GramFactor(d.gram_sum(start, stop) / (stop - start), d.basis.order - 1, label=f"curves [{start}, {stop})")


def fit_mean(data: FunctionalDataset, basis: SplineBasis, start: int = 0, stop: int | None = None) -> MeanFit:
    """Spline mean estimated from curves ``start <= i < stop`` (0-based).

    ``(0, n)`` gives the global mean, ``(0, k)`` the partial mean of the first
    ``k`` curves, ``(0, k)`` and ``(k, n)`` the two segment means around a
    break after curve ``k``.
    """
    start, stop = _check_range(data.n, start, stop)
    d = design(basis, data)
    fac = range_factor(d, start, stop)
    coeffs = fac.solve(d.moment_sum(start, stop) / (stop - start))
    return MeanFit(coeffs=coeffs, basis=basis, curve_range=(start, stop))


def segment_fits(data: FunctionalDataset, basis: SplineBasis, k: int) -> tuple[MeanFit, MeanFit]:
    if not 1 <= k < data.n:
        raise ValidationError(f"break index must satisfy 1 <= k < n={data.n}, got {k}")
    return fit_mean(data, basis, 0, k), fit_mean(data, basis, k, data.n)


def knot_bracket(n: int, mean_size: float) -> tuple[int, int]:
    """Search range for the number of interior knots."""
    total = n * mean_size
    lo = max(1, math.floor(min(0.5 * total ** (1 / 9), 0.5 * n ** (1 / 8))))
    hi = math.ceil(max(total ** (1 / 7), n ** (1 / 6)))
    return lo, max(lo, hi)


@dataclass(frozen=True)
class BicRow:
    interior_knots: int
    k_hat: int
    mse: float
    bic: float


def bic_trace(data: FunctionalDataset, order: int = 4, epsilon: float = 0.1, grid_size: int = 401) -> list[BicRow]:
    from .cusum import locate_break
    from .lrcov import residuals

    if data.n < 4:
        raise ValidationError(f"knot selection needs at least 4 curves, got {data.n}")
    lo, hi = knot_bracket(data.n, float(np.mean(data.sizes)))
    w = data.obs_weight
    # residual mean squares below rounding level count as exact fits
    floor = 1e-24 * max(float(np.sum(w * data.y**2)) / data.n, np.finfo(float).tiny)
    rows = []
    for J in range(lo, hi + 1):
        basis = SplineBasis(order, J)
        k = locate_break(data, basis, "l2", epsilon, make_grid(grid_size, basis))
        pre, post = segment_fits(data, basis, k)
        u = residuals(data, k, pre, post)
        mse = max(float(np.sum(w * u**2)) / data.n, floor)
        rows.append(BicRow(J, k, mse, math.log(mse) + (J + order) * math.log(data.n) / data.n))
    return rows


def select_knots_bic(data: FunctionalDataset, order: int = 4, epsilon: float = 0.1, grid_size: int = 401) -> int:
    rows = bic_trace(data, order, epsilon, grid_size)
    best = min(rows, key=lambda r: (r.bic, r.interior_knots))
    return best.interior_knots
