"""Plug-in estimates of the spline-coordinate covariance used to studentize.

All matrices are expressed in spline coordinates and sandwiched between the
inverse global Gram matrix. Lag terms use flat truncation at ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import FunctionalDataset
from .errors import DegenerateVarianceError, ValidationError
from .meanfit import GramFactor, MeanFit, range_factor, segment_fits
from .splinecore import SplineBasis, design

SIGMA2_ESTIMATORS = ("general", "display", "regular")


@dataclass(frozen=True, eq=False)
class SigmaEstimate:
    v_hat: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    sigma: np.ndarray
    lag_window: int
    psd_clip_mass: float
    k_hat: int


def default_lag(n: int, rule: str = "n15") -> int:
    """``floor(n^{1/5})``, or ``floor(n^{1/5} log log n)`` for ``rule='loglog'``."""
    base = n ** 0.2
    if rule == "n15":
        return int(math.floor(base + 1e-12))
    if rule == "loglog":
        return int(math.floor(base * math.log(max(math.log(n), 1.0)) + 1e-12))
    raise ValidationError(f"unknown lag rule {rule!r}")


def residuals(data: FunctionalDataset, k_hat: int, fit_pre: MeanFit, fit_post: MeanFit) -> np.ndarray:
    """Flat residuals: curves before ``k_hat`` use ``fit_pre``, the rest ``fit_post``."""
    if not 0 < k_hat < data.n:
        raise ValidationError(f"k_hat must satisfy 0 < k_hat < n={data.n}, got {k_hat}")
    cut = data.offsets[k_hat]
    fitted = np.concatenate([fit_pre(data.x[:cut]), fit_post(data.x[cut:])])
    return data.y - fitted


def _curve_scores(data: FunctionalDataset, bmat: np.ndarray, resid: np.ndarray) -> np.ndarray:
    # g_i = N_i^{-1} sum_j B(X_ij) U_ij
    return np.add.reduceat(bmat * (data.obs_weight * resid)[:, None], data.offsets[:-1], axis=0)


def _lag_middle(h: int, data: FunctionalDataset, bmat: np.ndarray, resid: np.ndarray, scores: np.ndarray) -> np.ndarray:
    n = data.n
    if h == 0:
        sizes = data.sizes
        c = np.where(sizes > 1, sizes / np.maximum(sizes - 1, 1), 0.0)
        full = (scores * c[:, None]).T @ scores
        # remove the j == j' diagonal terms
        wd = (c / sizes**2)[data.curve_index] * resid**2
        diag = bmat.T @ (bmat * wd[:, None])
        return (full - diag) / n
    a = abs(h)
    m = scores[: n - a].T @ scores[a:] / n
    return m if h > 0 else m.T


def sigma1_lag(h: int, resid: np.ndarray, data: FunctionalDataset, basis: SplineBasis, v_hat: GramFactor | np.ndarray | None = None) -> np.ndarray:
    """Lag-``h`` cross-curve covariance in spline coordinates.

    For ``h != 0`` this pairs every observation of curve ``i`` with every
    observation of curve ``i + h``. For ``h = 0`` only distinct points within a
    curve are paired (weight ``1/{N_i (N_i - 1)}``); single-point curves drop
    out.
    """
    if abs(h) > data.n - 1:
        raise ValidationError(f"|h| must be at most n - 1 = {data.n - 1}, got {h}")
    d = design(basis, data)
    fac = _as_factor(v_hat, d, basis)
    scores = _curve_scores(data, d.bmat, resid)
    # negative lags are the exact transpose of the positive ones
    m = fac.sandwich(_lag_middle(abs(h), data, d.bmat, resid, scores))
    return m if h >= 0 else m.T


def _as_factor(v_hat, d, basis) -> GramFactor:
    if v_hat is None:
        return range_factor(d, 0, d.n)
    if isinstance(v_hat, GramFactor):
        return v_hat
    return GramFactor(v_hat, basis.order - 1, label="global range")


def project_psd(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetrize and clip negative eigenvalues; returns the clipped mass."""
    sym = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] >= 0.0:
        return sym, 0.0
    mass = float(-vals[vals < 0].sum())
    clipped = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return 0.5 * (clipped + clipped.T), mass


def sigma_total(data: FunctionalDataset, basis: SplineBasis, k_hat: int, lag: int | str = "auto", lag_rule: str = "n15", sigma2_estimator: str = "general") -> SigmaEstimate:
    """Residual-based estimate of the covariance ``Sigma = Sigma_1 + Sigma_2``.

    ``Sigma_1`` sums the lag terms of ``sigma1_lag`` over ``|h| <= L``. The
    within-point part ``Sigma_2`` depends on ``sigma2_estimator``:

    ``'general'``
        ``V^{-1} [(1/n) sum_i N_i^{-2} sum_j B B^T U_ij^2] V^{-1}``, the
        diagonal ``j = j'`` share of the per-curve score variance.
    ``'display'``
        weights ``N_i^{-1}`` and adds ``sum_{h != 0} B^T Sigma_{1,h} B`` to
        each ``U_ij^2``. Kept for comparison; it overstates the variance by
        roughly the mean curve size and is noisy near the boundary.
    ``'regular'``
        the fixed-grid estimator ``sigma2_regular``; needs ``X_ij = j/N``.

    Except under ``'display'``, ``Sigma_1`` is projected onto the PSD cone
    before ``Sigma_2`` is added; ``sigma1`` keeps the raw lag sum and
    ``psd_clip_mass`` totals both clips.
    """
    if sigma2_estimator not in SIGMA2_ESTIMATORS:
        raise ValidationError(f"unknown sigma2 estimator {sigma2_estimator!r}; expected one of {SIGMA2_ESTIMATORS}")
    n = data.n
    if n < 3:
        raise ValidationError(f"covariance estimation needs at least 3 curves, got {n}")
    L = default_lag(n, lag_rule) if lag == "auto" else int(lag)
    if not 0 <= L < n:
        raise ValidationError(f"lag window must satisfy 0 <= L < n={n}, got {L}")
    pre, post = segment_fits(data, basis, k_hat)
    resid = residuals(data, k_hat, pre, post)
    d = design(basis, data)
    fac = range_factor(d, 0, n)
    scores = _curve_scores(data, d.bmat, resid)

    lag0 = fac.sandwich(_lag_middle(0, data, d.bmat, resid, scores))
    cross = np.zeros_like(lag0)  # sum over h != 0
    for h in range(1, L + 1):
        s = fac.sandwich(_lag_middle(h, data, d.bmat, resid, scores))
        cross += s + s.T
    sigma1 = lag0 + cross

    if sigma2_estimator == "regular":
        sigma2 = sigma2_regular(data, basis, resid, L)
    else:
        if sigma2_estimator == "general":
            wts = data.obs_weight**2 * resid**2
        else:
            q = np.einsum("ij,jk,ik->i", d.bmat, cross, d.bmat)
            wts = data.obs_weight * (resid**2 + q)
        sigma2 = fac.sandwich(d.bmat.T @ (d.bmat * wts[:, None]) / n)

    if sigma2_estimator == "display":
        sigma, mass = project_psd(sigma1 + sigma2)
    else:
        # Sigma_1 is a covariance image, so PSD; its lag sum is noisy enough
        # near the boundary to go indefinite on its own
        s1, mass1 = project_psd(sigma1)
        sigma, mass2 = project_psd(s1 + sigma2)
        mass = mass1 + mass2
    return SigmaEstimate(
        v_hat=fac.matrix,
        sigma1=sigma1,
        sigma2=sigma2,
        sigma=sigma,
        lag_window=L,
        psd_clip_mass=mass,
        k_hat=k_hat,
    )


def is_regular_design(data: FunctionalDataset, tol: float = 1e-12) -> bool:
    sizes = data.sizes
    if np.any(sizes != sizes[0]):
        return False
    N = int(sizes[0])
    expected = np.tile(np.arange(1, N + 1) / N, data.n)
    return bool(np.all(np.abs(data.x - expected) <= tol))


def sigma2_regular(data: FunctionalDataset, basis: SplineBasis, resid: np.ndarray, lag: int) -> np.ndarray:
    """Within-location estimator for the fixed grid ``X_ij = j/N``.

    ``V^{-1} [(n N^2)^{-1} sum_j B(j/N) B(j/N)^T sum_{|h| <= L} sum_i U_ij U_{i+h,j}] V^{-1}``.
    The extra ``1/N`` against a plain location average is ``E(1/N)``; with
    ``L = 0`` this equals the general ``Sigma_2``.
    """
    if not is_regular_design(data):
        raise ValidationError("sigma2_regular requires N_i = N and X_ij = j/N for every curve")
    n, N = data.n, int(data.sizes[0])
    if not 0 <= lag < n:
        raise ValidationError(f"lag window must satisfy 0 <= L < n={n}, got {lag}")
    u = np.asarray(resid, float).reshape(n, N)
    acc = np.einsum("ij,ij->j", u, u)
    for h in range(1, lag + 1):
        acc = acc + 2.0 * np.einsum("ij,ij->j", u[:-h], u[h:])
    bj = basis.design_matrix(np.arange(1, N + 1) / N)
    d = design(basis, data)
    fac = range_factor(d, 0, n)
    return fac.sandwich(bj.T @ (bj * acc[:, None]) / (n * N * N))


def _sigma_matrix(sigma) -> np.ndarray:
    return sigma.sigma if isinstance(sigma, SigmaEstimate) else np.asarray(sigma, float)


def rescale_fn(sigma, basis: SplineBasis, x) -> np.ndarray:
    """``B(x)^T Sigma B(x)`` at each point, floored at ``1e-12`` of its maximum."""
    s = _sigma_matrix(sigma)
    bx = basis.design_matrix(x)
    r = np.einsum("ij,jk,ik->i", bx, s, bx)
    top = float(np.max(r)) if len(r) else 0.0
    if not top > 0.0:
        raise DegenerateVarianceError("estimated covariance is zero; the statistics are undefined")
    return np.maximum(r, 1e-12 * top)
