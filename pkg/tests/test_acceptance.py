"""Acceptance criteria 1 to 10, each logging one PASS/FAIL line.

The Monte Carlo criteria use seed 1, 500 replicates and 500 simulated
suprema per quantile. The seed was fixed before any acceptance run.
"""

import json

import numpy as np
import pytest

from fdbreak import PipelineConfig, analyze, estimate_jump, run_detection
from fdbreak.cli import main
from fdbreak.cusum import cusum_field, locate_break, locator_objective, stat_l2, stat_sup
from fdbreak.lrcov import sigma_total
from fdbreak.mcquant import kernel_eigen, quantiles_test
from fdbreak.simgen import SimConfig, gen_dataset, mc_study
from fdbreak.splinecore import SplineBasis, eval_basis, make_grid

from conftest import random_dataset, record_criterion, step_dataset
from test_cusum import classical_cusum_sup
from test_splinecore import oracle_basis

SEED = 1
REPS = 500
MC_PIPE = PipelineConfig(mc_draws=500, seed=SEED)

_studies = {}


def study(scheme, jump, a):
    key = (scheme, jump, a)
    if key not in _studies:
        cfg = SimConfig(n=200, sampling_scheme=scheme, jump_type=jump, a=a, score_dist="normal", seed=SEED)
        _studies[key] = mc_study(cfg, REPS, MC_PIPE)
    return _studies[key]


@pytest.mark.slow
def test_criterion_01_size():
    s = study(1, "i", 0.0)
    ok = 0.02 <= s.rejection_rate_l2 <= 0.09 and 0.02 <= s.rejection_rate_sup <= 0.09
    detail = f"L2 {s.rejection_rate_l2:.3f}, sup {s.rejection_rate_sup:.3f}, target [0.02, 0.09]"
    assert record_criterion(1, "size, setting 1, type i, a=0", ok, detail)


@pytest.mark.slow
def test_criterion_02_power():
    s = study(1, "i", 1.0)
    ok = s.rejection_rate_l2 >= 0.95 and s.rejection_rate_sup >= 0.95
    detail = f"L2 {s.rejection_rate_l2:.3f}, sup {s.rejection_rate_sup:.3f}, target >= 0.95"
    assert record_criterion(2, "power, setting 1, type i, a=1", ok, detail)


@pytest.mark.slow
def test_criterion_03_dense_power():
    s = study(4, "iii", 1.0)
    ok = s.rejection_rate_sup >= 0.95 and s.rejection_rate_sup >= s.rejection_rate_l2 - 0.05
    detail = f"sup {s.rejection_rate_sup:.3f}, L2 {s.rejection_rate_l2:.3f}, target sup >= 0.95 and sup >= L2 - 0.05"
    assert record_criterion(3, "power, setting 4, type iii, a=1", ok, detail)


@pytest.mark.slow
def test_criterion_04_band_coverage():
    s = study(1, "i", 1.0)
    ok = 0.91 <= s.coverage <= 0.97
    assert record_criterion(4, "band coverage, setting 1, type i, a=1", ok, f"{s.coverage:.3f}, target [0.91, 0.97]")


def test_criterion_05_locator():
    data = step_dataset(20, 10, 0.0, 1.0, points=101)
    b = SplineBasis(4, 3)
    g = make_grid(401, b)
    found, brute = {}, {}
    for norm in ("l2", "sup"):
        found[norm] = locate_break(data, b, norm, 0.1, g)
        ks, obj = locator_objective(data, b, norm, 0.1, g)
        brute[norm] = int(ks[int(np.argmax(obj))])
    ok = found == brute == {"l2": 10, "sup": 10}
    assert record_criterion(5, "locator on noise-free n=20, k0=10", ok, f"module {found}, brute force {brute}")


def test_criterion_06_classical_cusum():
    b = SplineBasis(1, 0)
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        data = random_dataset(rng, int(rng.integers(10, 80)), size_range=(1, 6), shift=lambda x: 0.5 * x)
        k = locate_break(data, b, "l2", 0.1)
        t_n = stat_sup(cusum_field(data, b, sigma_total(data, b, k), 0.1))
        worst = max(worst, abs(t_n - classical_cusum_sup(data, k, 0.1)))
    assert record_criterion(6, "constant spline equals classical CUSUM", worst < 1e-10, f"max abs diff {worst:.2e} over 100 datasets")


def test_criterion_07_bridge_quantile():
    n = 5000
    eig = kernel_eigen(np.array([[1.0]]), SplineBasis(1, 0), make_grid(11))
    assert eig.kappa == 1 and eig.eigenvalues[0] == pytest.approx(1.0)
    _, qt = quantiles_test(eig, n, np.arange(0, n + 1), 200000, 0.05, SEED)
    ok = abs(qt.value - 1.358) <= 0.02
    assert record_criterion(7, "sup |bridge| 95% point", ok, f"{qt.value:.4f}, target 1.358 +- 0.02")


def test_criterion_08_spline_oracle():
    rng = np.random.default_rng(SEED)
    x = rng.uniform(0.0, 1.0, 1000)
    err = unity = 0.0
    for p in range(1, 5):
        for J in range(13):
            got = eval_basis(SplineBasis(p, J), x)
            err = max(err, float(np.max(np.abs(got - np.array([oracle_basis(p, J, v) for v in x])))))
            unity = max(unity, float(np.max(np.abs(got.sum(axis=1) - 1.0))))
    ok = err <= 1e-12 and unity <= 1e-12
    assert record_criterion(8, "basis against Cox-de Boor", ok, f"max diff {err:.1e}, partition of unity {unity:.1e}")


def test_criterion_09_invariances():
    cfg = PipelineConfig(j_n=3, mc_draws=200, seed=SEED)
    b = SplineBasis(4, 3)
    grid = make_grid(401, b)
    fails = []
    trace_dev = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        data = gen_dataset(SimConfig(n=60, a=0.5 * seed, seed=seed), 0)
        base = analyze(data, cfg)
        r = base.report
        scaled = run_detection(data.with_y(7.5 * data.y), cfg)
        for name in ("stat_l2", "stat_sup"):
            if abs(getattr(scaled, name) / getattr(r, name) - 1.0) > 1e-8:
                fails.append(f"scale {name}")
        if (scaled.k_hat_l2, scaled.k_hat_sup) != (r.k_hat_l2, r.k_hat_sup):
            fails.append("scale k_hat")

        shift = b.design_matrix(data.x) @ rng.standard_normal(b.dim)
        moved = data.with_y(data.y + shift)
        m = analyze(moved, cfg)
        if abs(m.report.stat_l2 - r.stat_l2) > 1e-9 * r.stat_l2 or abs(m.report.stat_sup - r.stat_sup) > 1e-9 * r.stat_sup:
            fails.append("shift statistics")
        if np.max(np.abs(m.sigma.sigma - base.sigma.sigma)) > 1e-9 * np.max(np.abs(base.sigma.sigma)):
            fails.append("shift sigma")
        w0 = estimate_jump(data, 30, cfg)
        w1 = estimate_jump(moved, 30, cfg)
        if np.max(np.abs((w1.upper - w1.lower) - (w0.upper - w0.lower))) > 1e-9 * np.max(w0.upper - w0.lower):
            fails.append("shift band width")

        full = cusum_field(data, b, base.sigma, 0.0, grid)
        if not np.all(full.numerator[-1] == 0.0):
            fails.append("t=1 row")
        if not (stat_l2(full) <= stat_sup(full) ** 2 and r.stat_l2 <= r.stat_sup**2):
            fails.append("S_n <= T_n^2")
        trace_dev = max(trace_dev, abs(kernel_eigen(base.sigma, b, grid).trace - 1.0))
    if trace_dev > 1e-3:
        fails.append("eigen trace")
    detail = "all hold" if not fails else "broken: " + ", ".join(fails)
    assert record_criterion(9, "invariance suite", not fails, f"{detail}; max trace deviation {trace_dev:.1e}")


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path):
    cfg = SimConfig(n=200, a=0.5, seed=SEED)
    pipe = PipelineConfig(mc_draws=200, seed=SEED)
    serial = mc_study(cfg, 6, pipe, workers=1)
    parallel = mc_study(cfg, 6, pipe, workers=3)
    same_study = serial == parallel and serial.replicates == parallel.replicates

    data = gen_dataset(cfg, 0)
    from fdbreak.cli import write_csv

    path = str(tmp_path / "d.csv")
    write_csv(data, path)
    outs = []
    for i in range(2):
        out = str(tmp_path / f"r{i}.json")
        main(["detect", "--input", path, "--seed", "42", "--mc-draws", "500", "--output", out])
        outs.append(open(out, "rb").read())
    sims = []
    for workers in ("1", "2"):
        out = str(tmp_path / f"s{workers}.csv")
        main(["simulate", "--n", "40", "--a", "1", "--reps", "3", "--workers", workers, "--mc-draws", "200", "--seed", "4", "--output", out])
        sims.append(open(out, "rb").read())
    ok = same_study and outs[0] == outs[1] and sims[0] == sims[1]
    detail = f"study across workers {same_study}, detect bytes {outs[0] == outs[1]}, simulate bytes {sims[0] == sims[1]}"
    assert json.loads(outs[0])["config"]["seed"] == 42
    assert record_criterion(10, "determinism", ok, detail)
