import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import norm

from fdbreak import rng as rngmod
from fdbreak.errors import DegenerateVarianceError, ValidationError
from fdbreak.mcquant import (
    QuantileResult,
    choose_kappa,
    empirical_quantile,
    kernel_eigen,
    psd_sqrt,
    quantile_jump,
    quantiles_test,
    sim_bridge,
    simulate_jump_suprema,
    simulate_test_suprema,
)
from fdbreak.splinecore import SplineBasis, make_grid


def random_psd(rng, dim, rank=None):
    a = rng.standard_normal((dim, rank or dim))
    return a @ a.T


def kolmogorov_quantile(alpha):
    tail = lambda x: 2 * sum((-1) ** (k - 1) * math.exp(-2 * k * k * x * x) for k in range(1, 100)) - alpha
    return brentq(tail, 0.5, 3.0)


def dense_kernel_spectrum(s, basis, grid):
    bx = basis.design_matrix(grid.x)
    c = bx @ s @ bx.T
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    sw = np.sqrt(grid.w)
    return np.sort(np.linalg.eigvalsh(sw[:, None] * c * sw[None, :]))[::-1]


def test_scalar_kernel():
    eig = kernel_eigen(np.array([[2.3]]), SplineBasis(1, 0), make_grid(101))
    np.testing.assert_allclose(eig.eigenvalues, [1.0], atol=1e-12)
    assert eig.kappa == 1
    np.testing.assert_allclose(np.abs(eig.eigenfunctions[:, 0]), 1.0, atol=1e-12)


def test_rank_one_kernel(rng):
    b = SplineBasis(4, 5)
    eig = kernel_eigen(random_psd(rng, b.dim, 1), b, make_grid(401))
    assert len(eig.eigenvalues) == 1
    assert eig.eigenvalues[0] == pytest.approx(1.0, abs=1e-10)
    assert eig.kappa == 1


@pytest.mark.parametrize("seed", range(4))
def test_reduction_matches_dense_eigenproblem(seed):
    rng = np.random.default_rng(seed)
    b = SplineBasis(4, 4)
    s = random_psd(rng, b.dim)
    g = make_grid(401)
    eig = kernel_eigen(s, b, g)
    dense = dense_kernel_spectrum(s, b, g)
    m = len(eig.eigenvalues)
    np.testing.assert_allclose(eig.eigenvalues, dense[:m], rtol=1e-9, atol=1e-12)
    assert np.all(np.abs(dense[m:]) < 1e-9)
    assert abs(eig.trace - 1.0) < 1e-3
    gram = eig.eigenfunctions.T @ (g.w[:, None] * eig.eigenfunctions)
    np.testing.assert_allclose(gram, np.eye(m), atol=1e-6)


def test_zero_sigma_is_degenerate():
    with pytest.raises(DegenerateVarianceError):
        kernel_eigen(np.zeros((5, 5)), SplineBasis(3, 2), make_grid(101))


def test_choose_kappa():
    assert choose_kappa(np.array([1.0])) == 1
    assert choose_kappa(np.array([0.5, 0.3, 0.195, 0.005])) == 3
    assert choose_kappa(np.array([0.5, 0.3, 0.19, 0.01])) == 4
    assert choose_kappa(np.array([0.995, 0.005])) == 1
    assert choose_kappa(np.array([0.99, 0.01])) == 2


def test_bridge_endpoints_and_moments():
    gen = rngmod.stream(3, 99)
    br = sim_bridge(4, [0, 1, 2, 3, 4], gen, size=100000)
    assert np.all(br[:, 0] == 0.0)
    assert np.all(br[:, -1] == 0.0)
    assert abs(br[:, 2].var() - 0.25) < 0.01
    assert abs(np.mean(br[:, 1] * br[:, 3]) - 0.0625) < 0.01


def test_bridge_rejects_outside_lattice():
    with pytest.raises(ValidationError):
        sim_bridge(10, [11], rngmod.stream(0, 1))


def test_empirical_quantile():
    s = np.arange(1.0, 101.0)
    assert empirical_quantile(s, 0.05) == 95.0
    assert empirical_quantile(s, 0.0) == 100.0
    assert empirical_quantile(s, 1.0) <= s.min()
    vals = [empirical_quantile(s[::-1], a) for a in np.linspace(0, 1, 21)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValidationError):
        empirical_quantile(s, 1.5)


def test_p_value_convention():
    assert QuantileResult(0.05, 1.0, 499, exceed_count=0).p_value == 1 / 500
    assert QuantileResult(0.05, 1.0, 499, exceed_count=499).p_value == 1.0
    assert QuantileResult(0.05, 1.0, 499).p_value is None


def test_too_few_draws():
    eig = kernel_eigen(np.array([[1.0]]), SplineBasis(1, 0), make_grid(11))
    with pytest.raises(ValidationError):
        quantiles_test(eig, 10, np.arange(1, 10), 99, 0.05, 0)


def test_kolmogorov_quantile():
    assert kolmogorov_quantile(0.05) == pytest.approx(1.3581, abs=1e-4)
    eig = kernel_eigen(np.array([[1.0]]), SplineBasis(1, 0), make_grid(11))
    n = 2000
    _, qt = quantiles_test(eig, n, np.arange(0, n + 1), 20000, 0.05, 5)
    assert abs(qt.value - kolmogorov_quantile(0.05)) < 0.03


def test_parseval_and_nonnegativity(rng):
    b = SplineBasis(4, 3)
    g = make_grid(401)
    eig = kernel_eigen(random_psd(rng, b.dim), b, g)
    k = eig.kappa
    lam = eig.eigenvalues[:k]
    br = sim_bridge(50, np.arange(5, 46), rngmod.stream(1, 2), size=(20, k))
    xi = np.einsum("k,bkt->bt", lam, br**2)
    ups = np.einsum("xk,bkt->btx", eig.eigenfunctions[:, :k] * np.sqrt(lam), br)
    assert np.all(xi >= 0)
    np.testing.assert_allclose(np.sum(ups**2 * g.w, axis=2), xi, atol=1e-6)


def test_draws_depend_only_on_block(rng):
    b = SplineBasis(4, 2)
    eig = kernel_eigen(random_psd(rng, b.dim), b, make_grid(101))
    ks = np.arange(3, 28)
    s300, t300 = simulate_test_suprema(eig, 30, ks, 300, 17)
    s600, t600 = simulate_test_suprema(eig, 30, ks, 600, 17)
    np.testing.assert_array_equal(s300, s600[:300])
    np.testing.assert_array_equal(t300, t600[:300])
    s_other, _ = simulate_test_suprema(eig, 30, ks, 300, 18)
    assert not np.array_equal(s300, s_other)


def test_observed_gives_exceed_counts(rng):
    eig = kernel_eigen(np.array([[1.0]]), SplineBasis(1, 0), make_grid(11))
    ks = np.arange(1, 20)
    qs, qt = quantiles_test(eig, 20, ks, 200, 0.05, 3, observed=(0.5, 1e9))
    assert qs.exceed_count == int(np.sum(qs.samples >= 0.5))
    assert qt.exceed_count == 0
    assert qt.p_value == 1 / 201


def test_jump_quantile_scalar_case():
    q = quantile_jump(np.array([[4.0]]), SplineBasis(1, 0), make_grid(11), 200000, 0.05, 9)
    assert abs(q.value - norm.ppf(0.975)) < 0.02


def test_jump_quantile_zero_sigma():
    q = quantile_jump(np.zeros((4, 4)), SplineBasis(4, 0), make_grid(11), 200, 0.05, 0)
    assert q.value == 0.0


def test_jump_quantile_scale_invariant(rng):
    b = SplineBasis(4, 3)
    s = random_psd(rng, b.dim)
    g = make_grid(101)
    a = simulate_jump_suprema(s, b, g, 300, 4)
    c = simulate_jump_suprema(9.0 * s, b, g, 300, 4)
    np.testing.assert_allclose(a, c, rtol=1e-10)


def test_psd_sqrt(rng):
    s = random_psd(rng, 6, 3)
    r = psd_sqrt(s)
    np.testing.assert_allclose(r @ r.T, s, atol=1e-10)
