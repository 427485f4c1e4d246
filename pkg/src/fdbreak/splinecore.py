"""B-spline basis on equally spaced knots and the weighted Gram algebra.

The basis of order ``p`` (degree ``p - 1``) with ``J`` interior knots lives on
the clamped knot vector ``0 (p times), 1/(J+1), ..., J/(J+1), 1 (p times)``
and has ``J + p`` members. Sub-intervals are half-open ``[t_l, t_{l+1})``
except the last one, which is closed at 1.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dataset import FunctionalDataset
from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class SplineBasis:
    order: int
    interior_knots: int

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValidationError(f"spline order must be a positive integer, got {self.order}")
        if int(self.interior_knots) != self.interior_knots or self.interior_knots < 0:
            raise ValidationError(f"number of interior knots must be >= 0, got {self.interior_knots}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "interior_knots", int(self.interior_knots))

    @property
    def dim(self) -> int:
        return self.interior_knots + self.order

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """``t_l = l / (J + 1)`` for ``l = 0..J+1``."""
        return np.arange(self.interior_knots + 2) / (self.interior_knots + 1)

    @cached_property
    def knots(self) -> np.ndarray:
        p = self.order
        return np.concatenate([np.zeros(p - 1), self.breakpoints, np.ones(p - 1)])

    def local(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero basis values at each ``x``.

        Returns ``(start, vals)``: ``vals[i, r]`` is basis function
        ``start[i] + r`` evaluated at ``x[i]``, for ``r < order``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(~(x >= 0.0)) or np.any(~(x <= 1.0)):
            raise DomainError("B-spline evaluation points must lie in [0, 1]")
        J, p = self.interior_knots, self.order
        start = np.minimum(np.floor(x * (J + 1)).astype(np.int64), J)
        t = self.knots
        mu = start + p - 1  # t[mu] <= x < t[mu + 1]
        vals = np.zeros((len(x), p))
        vals[:, 0] = 1.0
        left = np.zeros((len(x), p))
        right = np.zeros((len(x), p))
        for j in range(1, p):
            left[:, j] = x - t[mu + 1 - j]
            right[:, j] = t[mu + j] - x
            saved = np.zeros(len(x))
            for r in range(j):
                temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
                vals[:, r] = saved + right[:, r + 1] * temp
                saved = left[:, j - r] * temp
            vals[:, j] = saved
        return start, vals

    def design_matrix(self, x) -> np.ndarray:
        """Dense ``len(x) x dim`` matrix of basis values."""
        start, vals = self.local(x)
        out = np.zeros((len(start), self.dim))
        rows = np.arange(len(start))[:, None]
        out[rows, start[:, None] + np.arange(self.order)] = vals
        return out


def eval_basis(basis: SplineBasis, x) -> np.ndarray:
    """``B(x)``: a ``dim`` vector for scalar ``x``, else one row per point."""
    if np.ndim(x) == 0:
        return basis.design_matrix([x])[0]
    return basis.design_matrix(x)


@dataclass(frozen=True, eq=False)
class Design:
    """Per-curve sufficient statistics of one dataset in one basis.

    ``curve_gram[i] = N_i^{-1} sum_j B(X_ij) B(X_ij)^T`` and
    ``curve_moment[i] = N_i^{-1} sum_j B(X_ij) Y_ij``; the ``cum_*`` arrays
    are their running sums with a leading zero, so a range ``[a, b)`` of
    curves costs one subtraction.
    """

    basis: SplineBasis
    bmat: np.ndarray
    curve_gram: np.ndarray
    curve_moment: np.ndarray
    cum_gram: np.ndarray
    cum_moment: np.ndarray

    @property
    def n(self) -> int:
        return len(self.curve_gram)

    def gram_sum(self, start: int, stop: int) -> np.ndarray:
        return self.cum_gram[stop] - self.cum_gram[start]

    def moment_sum(self, start: int, stop: int) -> np.ndarray:
        return self.cum_moment[stop] - self.cum_moment[start]


_DESIGNS: "weakref.WeakKeyDictionary[FunctionalDataset, dict]" = weakref.WeakKeyDictionary()


def design(basis: SplineBasis, data: FunctionalDataset) -> Design:
    """Build (or fetch the cached) ``Design`` for ``data`` in ``basis``."""
    per_data = _DESIGNS.setdefault(data, {})
    if basis in per_data:
        return per_data[basis]
    bmat = basis.design_matrix(data.x)
    w = data.obs_weight
    starts = data.offsets[:-1]
    # scale both factors by sqrt(w) so every outer product is exactly symmetric
    sw = bmat * np.sqrt(w)[:, None]
    outer = sw[:, :, None] * sw[:, None, :]
    curve_gram = np.add.reduceat(outer, starts, axis=0)
    curve_moment = np.add.reduceat(bmat * (w * data.y)[:, None], starts, axis=0)
    zero_g = np.zeros((1, basis.dim, basis.dim))
    zero_m = np.zeros((1, basis.dim))
    d = Design(
        basis=basis,
        bmat=bmat,
        curve_gram=curve_gram,
        curve_moment=curve_moment,
        cum_gram=np.concatenate([zero_g, np.cumsum(curve_gram, axis=0)]),
        cum_moment=np.concatenate([zero_m, np.cumsum(curve_moment, axis=0)]),
    )
    per_data[basis] = d
    return d


def _check_range(n: int, start: int, stop: int | None) -> tuple[int, int]:
    stop = n if stop is None else stop
    if not (0 <= start < stop <= n):
        raise ValidationError(f"curve range [{start}, {stop}) is empty or outside [0, {n})")
    return start, stop


def gram_weighted(basis: SplineBasis, data: FunctionalDataset, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Weighted Gram matrix over curves ``start <= i < stop`` (0-based).

    ``(stop - start)^{-1} sum_i N_i^{-1} sum_j B(X_ij) B(X_ij)^T``; banded with
    bandwidth ``order - 1``.
    """
    start, stop = _check_range(data.n, start, stop)
    return design(basis, data).gram_sum(start, stop) / (stop - start)


def moment_weighted(basis: SplineBasis, data: FunctionalDataset, start: int = 0, stop: int | None = None) -> np.ndarray:
    start, stop = _check_range(data.n, start, stop)
    return design(basis, data).moment_sum(start, stop) / (stop - start)


def simpson_weights(m: int) -> np.ndarray:
    """Composite Simpson weights for ``m`` equally spaced points on [0, 1]."""
    if m < 3 or m % 2 == 0:
        raise ValidationError(f"Simpson's rule needs an odd number of points >= 3, got {m}")
    w = np.ones(m)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * (m - 1))


def integrate_grid(values, grid) -> float:
    """Simpson approximation of the integral over [0, 1] of tabulated values."""
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    w = simpson_weights(len(grid))
    if values.shape[-1] != len(grid):
        raise ValidationError("values are not aligned with the grid")
    h = np.diff(grid)
    if abs(grid[0]) > 1e-12 or abs(grid[-1] - 1.0) > 1e-12 or np.ptp(h) > 1e-9:
        raise ValidationError("grid must be uniform on [0, 1]")
    return values @ w


@dataclass(frozen=True, eq=False)
class EvalGrid:
    """Evaluation points in ``x`` with quadrature weights ``w``.

    The uniform Simpson grid carries the weights; interior knots that fall
    between grid points are appended with weight zero so that suprema see
    them but integrals do not.
    """

    x: np.ndarray
    w: np.ndarray
    size: int

    @property
    def uniform(self) -> np.ndarray:
        return self.x[self.w > 0] if self.size > 0 else self.x


def make_grid(size: int = 401, basis: SplineBasis | None = None) -> EvalGrid:
    x = np.linspace(0.0, 1.0, size)
    w = simpson_weights(size)
    if basis is not None and basis.interior_knots > 0:
        knots = basis.breakpoints[1:-1]
        gap = np.min(np.abs(knots[:, None] - x[None, :]), axis=1)
        extra = knots[gap > 1e-12]
        if len(extra):
            x = np.concatenate([x, extra])
            w = np.concatenate([w, np.zeros(len(extra))])
            order = np.argsort(x, kind="stable")
            x, w = x[order], w[order]
    return EvalGrid(x=x, w=w, size=size)
