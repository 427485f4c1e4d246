"""Smoothed CUSUM process, its sup and L2 statistics, and the break locators.

Time runs over the lattice ``t = k/n``. Between lattice points the process
is a step function, so the lattice maximum is the exact supremum in ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import FunctionalDataset
from .errors import SingularDesignError, ValidationError
from .meanfit import GramFactor, range_factor
from .splinecore import EvalGrid, SplineBasis, design, make_grid
from .lrcov import rescale_fn


def t_lattice(n: int, epsilon: float) -> np.ndarray:
    """Curve counts ``k`` with ``ceil(eps n) <= k <= floor((1 - eps) n)``, ``k >= 1``."""
    if not 0.0 <= epsilon < 0.5:
        raise ValidationError(f"epsilon must lie in [0, 1/2), got {epsilon}")
    lo = max(1, math.ceil(round(epsilon * n, 9)))
    hi = math.floor(round((1.0 - epsilon) * n, 9))
    if lo > hi:
        raise ValidationError(f"no lattice points for n={n}, epsilon={epsilon}")
    return np.arange(lo, hi + 1)


@dataclass(frozen=True, eq=False)
class CusumField:
    """CUSUM numerator over ``(k, x)`` and the rescaling function over ``x``.

    ``numerator[a, b] = (k_a / sqrt(n)) B(x_b)^T (theta_{k_a} - theta)`` where
    ``theta_k`` fits the first ``k`` curves and ``theta`` all of them.
    """

    ks: np.ndarray
    n: int
    grid: EvalGrid
    numerator: np.ndarray
    rescale: np.ndarray

    @property
    def tgrid(self) -> np.ndarray:
        return self.ks / self.n

    def normalized(self) -> np.ndarray:
        return self.numerator / np.sqrt(self.rescale)


def cusum_field(data: FunctionalDataset, basis: SplineBasis, sigma, epsilon: float = 0.1, grid: EvalGrid | None = None) -> CusumField:
    n = data.n
    grid = make_grid(401, basis) if grid is None else grid
    ks = t_lattice(n, epsilon)
    d = design(basis, data)
    theta = range_factor(d, 0, n).solve(d.cum_moment[n] / n)
    diffs = np.empty((len(ks), basis.dim))
    for a, k in enumerate(ks):
        try:
            fac = GramFactor(d.cum_gram[k] / k, basis.order - 1, label=f"the first {k} curves")
        except SingularDesignError as err:
            raise SingularDesignError(f"partial fit at t = {k}/{n}: {err}") from err
        diffs[a] = fac.solve(d.cum_moment[k] / k) - theta
    bx = basis.design_matrix(grid.x)
    numerator = (ks / math.sqrt(n))[:, None] * (diffs @ bx.T)
    return CusumField(ks=ks, n=n, grid=grid, numerator=numerator, rescale=rescale_fn(sigma, basis, grid.x))


def stat_sup(field: CusumField) -> float:
    """Maximum over ``(t, x)`` of ``|numerator| / sqrt(rescale)``."""
    return float(np.max(np.abs(field.normalized())))


def l2_profile(field: CusumField) -> np.ndarray:
    return (field.numerator**2 / field.rescale) @ field.grid.w


def stat_l2(field: CusumField) -> float:
    """Maximum over ``t`` of the Simpson integral of ``numerator^2 / rescale``."""
    return float(np.max(l2_profile(field)))


def locator_objective(data: FunctionalDataset, basis: SplineBasis, norm: str = "l2", epsilon: float = 0.1, grid: EvalGrid | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Objective of the break locator at every admissible ``k``.

    Uses the global Gram matrix for every ``k``. The L2 variant returns the
    squared L2 norm, the sup variant the sup norm.
    """
    if norm not in ("l2", "sup"):
        raise ValidationError(f"norm must be 'l2' or 'sup', got {norm!r}")
    n = data.n
    grid = make_grid(401, basis) if grid is None else grid
    ks = t_lattice(n, epsilon)
    ks = ks[ks < n]
    if len(ks) == 0:
        raise ValidationError(f"no admissible break index for n={n}, epsilon={epsilon}")
    d = design(basis, data)
    fac = range_factor(d, 0, n)
    total = d.cum_moment[n]
    part = d.cum_moment[ks]
    share = (ks / n)[:, None] * total
    contrast = part - share
    # exact cancellation is lost to rounding; snap it back to zero so that
    # flat objectives tie and the smallest k wins
    tol = 4.0 * n * np.finfo(float).eps * (np.abs(part) + np.abs(share))
    contrast[np.abs(contrast) <= tol] = 0.0
    curves = fac.solve(contrast.T).T @ basis.design_matrix(grid.x).T
    if norm == "l2":
        return ks, curves**2 @ grid.w
    return ks, np.max(np.abs(curves), axis=1)


def locate_break(data: FunctionalDataset, basis: SplineBasis, norm: str = "l2", epsilon: float = 0.1, grid: EvalGrid | None = None) -> int:
    """Estimated number of curves before the break; ties go to the smallest."""
    ks, obj = locator_objective(data, basis, norm, epsilon, grid)
    return int(ks[int(np.argmax(obj))])
