"""Synthetic functional time series with a mean break, and the Monte Carlo harness.

Curves follow a four-term Karhunen-Loeve model with MA(1) scores, plus unit
Gaussian measurement noise, observed at uniform random locations. The mean
jumps by ``Delta_a`` after curve ``k0``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import betaln, xlog1py, xlogy

from . import rng as rngmod
from .dataset import FunctionalDataset
from .errors import FdbreakError, ValidationError
from .inference import PipelineConfig, analyze, estimate_jump

SCHEMES = (1, 2, 3, 4)
JUMP_TYPES = ("i", "ii", "iii")
SCORE_DISTS = ("normal", "uniform", "laplace")
EIGENVALUES = 2.0 ** (1 - np.arange(1, 5))  # 1, 1/2, 1/4, 1/8
MA_COEFS = (0.8, 0.6)
WORKERS_ENV = "FDBREAK_WORKERS"


def mean_function(x):
    x = np.asarray(x, dtype=float)
    return 1.5 * np.sin(3 * np.pi * (x + 0.5)) + 2 * x**3


def _beta_pdf(x, a, b):
    # log-space for the large shape parameters used here
    return np.exp(xlogy(a - 1, x) + xlog1py(b - 1, -x) - betaln(a, b))


def jump_function(jump_type: str, a: float, x):
    """Jump profiles, each with L2 norm ``a`` on [0, 1]."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValidationError("jump functions are defined on [0, 1]")
    if a < 0:
        raise ValidationError(f"jump size must be >= 0, got {a}")
    if jump_type == "i":
        return np.full_like(x, float(a))
    if jump_type == "ii":
        return 4 * math.sqrt(5) * a * (x - 0.5) ** 2
    if jump_type == "iii":
        dens = _beta_pdf(x, 10, 1000) + _beta_pdf(x, 1000, 1000) + _beta_pdf(x, 1000, 10)
        return a * np.sqrt(dens / 3)
    raise ValidationError(f"unknown jump type {jump_type!r}; expected one of {JUMP_TYPES}")


def eigenfunctions(x) -> np.ndarray:
    """``sqrt(2) sin(2 pi x), sqrt(2) cos(2 pi x), sqrt(2) sin(4 pi x), sqrt(2) cos(4 pi x)``."""
    x = np.asarray(x, dtype=float)
    return math.sqrt(2) * np.stack(
        [np.sin(2 * np.pi * x), np.cos(2 * np.pi * x), np.sin(4 * np.pi * x), np.cos(4 * np.pi * x)], axis=-1
    )


def size_support(scheme: int, n: int) -> tuple[int, int]:
    """Inclusive range of the discrete uniform law of ``N_i``."""
    fl = lambda v: int(math.floor(v + 1e-9))
    if scheme == 1:
        return 3, 6
    if scheme == 2:
        return fl(2 * n**0.2), fl(4 * n**0.2)
    if scheme == 3:
        return fl(math.sqrt(n)), fl(2 * math.sqrt(n))
    if scheme == 4:
        return fl(n / 8), fl(n / 4)
    raise ValidationError(f"unknown sampling scheme {scheme}; expected one of {SCHEMES}")


def draw_innovations(dist: str, gen: np.random.Generator, size) -> np.ndarray:
    """Unit-variance, mean-zero innovations."""
    if dist == "normal":
        return gen.standard_normal(size)
    if dist == "uniform":
        return gen.uniform(-math.sqrt(3), math.sqrt(3), size)
    if dist == "laplace":
        return gen.laplace(0.0, 1 / math.sqrt(2), size)
    raise ValidationError(f"unknown score distribution {dist!r}; expected one of {SCORE_DISTS}")


@dataclass(frozen=True)
class SimConfig:
    n: int = 200
    sampling_scheme: int = 1
    jump_type: str = "i"
    a: float = 0.0
    score_dist: str = "normal"
    k0: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 4:
            raise ValidationError(f"n must be at least 4, got {self.n}")
        if self.sampling_scheme not in SCHEMES:
            raise ValidationError(f"unknown sampling scheme {self.sampling_scheme}")
        if self.jump_type not in JUMP_TYPES:
            raise ValidationError(f"unknown jump type {self.jump_type!r}")
        if self.score_dist not in SCORE_DISTS:
            raise ValidationError(f"unknown score distribution {self.score_dist!r}")
        if self.a < 0:
            raise ValidationError(f"a must be >= 0, got {self.a}")
        if self.k0 is None:
            object.__setattr__(self, "k0", self.n // 2)
        if not 1 <= self.k0 < self.n:
            raise ValidationError(f"k0 must satisfy 1 <= k0 < n, got {self.k0}")


def gen_dataset(cfg: SimConfig, replicate: int = 0) -> FunctionalDataset:
    gen = rngmod.stream(cfg.seed, rngmod.DATA, replicate)
    n = cfg.n
    lo, hi = size_support(cfg.sampling_scheme, n)
    sizes = gen.integers(lo, hi + 1, size=n)
    # zeta_0 .. zeta_n; xi_t = 0.8 zeta_t + 0.6 zeta_{t-1} is stationary from t = 1
    zeta = draw_innovations(cfg.score_dist, gen, (n + 1, 4))
    scores = MA_COEFS[0] * zeta[1:] + MA_COEFS[1] * zeta[:-1]
    total = int(sizes.sum())
    x = gen.uniform(0.0, 1.0, total)
    noise = gen.standard_normal(total)
    curve = np.repeat(np.arange(n), sizes)
    process = np.einsum("ik,k,ik->i", eigenfunctions(x), np.sqrt(EIGENVALUES), scores[curve])
    mean = mean_function(x) + np.where(curve >= cfg.k0, jump_function(cfg.jump_type, cfg.a, x), 0.0)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return FunctionalDataset(x, mean + process + noise, offsets)


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    j_n: int
    reject_l2: bool
    reject_sup: bool
    p_l2: float
    p_sup: float
    k_hat_l2: int
    k_hat_sup: int
    covered: bool


@dataclass(frozen=True)
class McSummary:
    rejection_rate_l2: float
    rejection_rate_sup: float
    coverage: float
    mae_l2: float
    mae_sup: float
    reps: int
    replicates: tuple[ReplicateResult, ...] = ()

    def to_dict(self, with_replicates: bool = False) -> dict:
        d = asdict(self)
        if not with_replicates:
            d.pop("replicates")
        return d


def run_replicate(cfg: SimConfig, index: int, pipeline: PipelineConfig) -> ReplicateResult:
    data = gen_dataset(cfg, index)
    pipe = replace(pipeline, seed=rngmod.derive_seed(cfg.seed, rngmod.REPLICATE, index))
    try:
        an = analyze(data, pipe)
        band = estimate_jump(data, config=pipe, analysis=an)
    except FdbreakError as err:
        raise RuntimeError(f"replicate {index} failed: {err}") from err
    rep = an.report
    # the band targets m_pre - m_post, i.e. minus the jump
    target = -jump_function(cfg.jump_type, cfg.a, band.xgrid)
    return ReplicateResult(
        index=index,
        j_n=rep.j_n,
        reject_l2=rep.reject_l2,
        reject_sup=rep.reject_sup,
        p_l2=rep.p_l2,
        p_sup=rep.p_sup,
        k_hat_l2=rep.k_hat_l2,
        k_hat_sup=rep.k_hat_sup,
        covered=band.covers(target),
    )


def _run_one(args):
    from threadpoolctl import threadpool_limits

    cfg, index, pipeline = args
    with threadpool_limits(1):
        return run_replicate(cfg, index, pipeline)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def mc_study(
    cfg: SimConfig,
    reps: int,
    pipeline_config: PipelineConfig | None = None,
    alpha: float | None = None,
    workers: int | None = None,
) -> McSummary:
    """Run the full pipeline on ``reps`` simulated datasets and aggregate.

    Replicate ``r`` draws its data and its Monte Carlo critical values from
    streams keyed by ``(cfg.seed, r)``, so the summary does not depend on
    ``workers``. Any replicate failure aborts the study.
    """
    if reps < 1:
        raise ValidationError(f"reps must be >= 1, got {reps}")
    pipe = pipeline_config or PipelineConfig()
    if alpha is not None:
        pipe = replace(pipe, alpha=alpha)
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(cfg, r, pipe) for r in range(reps)]
    if workers == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs, chunksize=max(1, reps // (4 * workers))))
    results.sort(key=lambda r: r.index)
    return summarize(results, cfg.k0)


def summarize(results: list[ReplicateResult], k0: int) -> McSummary:
    reps = len(results)
    return McSummary(
        rejection_rate_l2=sum(r.reject_l2 for r in results) / reps,
        rejection_rate_sup=sum(r.reject_sup for r in results) / reps,
        coverage=sum(r.covered for r in results) / reps,
        mae_l2=float(np.mean([abs(r.k_hat_l2 - k0) for r in results])),
        mae_sup=float(np.mean([abs(r.k_hat_sup - k0) for r in results])),
        reps=reps,
        replicates=tuple(results),
    )


CSV_HEADER = ("setting", "jump_type", "dist", "a", "n", "stat", "value")


def summary_rows(cfg: SimConfig, summary: McSummary) -> list[tuple]:
    """One row per statistic, laid out like the size/power and coverage tables."""
    base = (cfg.sampling_scheme, cfg.jump_type, cfg.score_dist, cfg.a, cfg.n)
    stats = [
        ("rejection_l2", summary.rejection_rate_l2),
        ("rejection_sup", summary.rejection_rate_sup),
        ("coverage", summary.coverage),
        ("mae_l2", summary.mae_l2),
        ("mae_sup", summary.mae_sup),
    ]
    return [base + (name, value) for name, value in stats]
