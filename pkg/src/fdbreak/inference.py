"""End-to-end pipeline: test for a break, locate it, and band the jump."""

from __future__ import annotations

import contextlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cusum import CusumField, cusum_field, locate_break, stat_l2, stat_sup, t_lattice
from .dataset import FunctionalDataset
from .errors import FdbreakError, ValidationError
from .lrcov import SIGMA2_ESTIMATORS, SigmaEstimate, rescale_fn, sigma_total
from .mcquant import KernelEigen, QuantileResult, kernel_eigen, quantile_jump, quantiles_test
from .meanfit import segment_fits, select_knots_bic
from .splinecore import EvalGrid, SplineBasis, make_grid, simpson_weights

WIDTH_RULES = ("theorem4", "paper42")


@dataclass(frozen=True)
class PipelineConfig:
    """Tuning of the detection pipeline.

    ``j_n`` is a fixed number of interior knots or ``"bic"``; ``lag`` is a fixed
    lag window or ``"auto"`` (``lag_rule`` picks ``floor(n^{1/5})`` or the
    ``loglog`` variant). ``mc_draws`` is the number of simulated suprema.
    """

    p: int = 4
    j_n: int | str = "bic"
    epsilon: float = 0.1
    alpha: float = 0.05
    mc_draws: int = 2000
    lag: int | str = "auto"
    lag_rule: str = "n15"
    xgrid_size: int = 401
    width_rule: str = "theorem4"
    sigma2_estimator: str = "general"
    seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.p, (int, np.integer)) and self.p >= 1):
            raise ValidationError(f"p must be a positive integer, got {self.p!r}")
        if self.j_n != "bic" and not (isinstance(self.j_n, (int, np.integer)) and self.j_n >= 0):
            raise ValidationError(f"j_n must be 'bic' or a non-negative integer, got {self.j_n!r}")
        if not 0.0 < self.epsilon < 0.5:
            raise ValidationError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (isinstance(self.mc_draws, (int, np.integer)) and self.mc_draws >= 100):
            raise ValidationError(f"mc_draws must be an integer >= 100, got {self.mc_draws!r}")
        if self.lag != "auto" and not (isinstance(self.lag, (int, np.integer)) and self.lag >= 0):
            raise ValidationError(f"lag must be 'auto' or a non-negative integer, got {self.lag!r}")
        if self.lag_rule not in ("n15", "loglog"):
            raise ValidationError(f"lag_rule must be 'n15' or 'loglog', got {self.lag_rule!r}")
        simpson_weights(self.xgrid_size)
        if self.width_rule not in WIDTH_RULES:
            raise ValidationError(f"width_rule must be one of {WIDTH_RULES}, got {self.width_rule!r}")
        if self.sigma2_estimator not in SIGMA2_ESTIMATORS:
            raise ValidationError(f"sigma2_estimator must be one of {SIGMA2_ESTIMATORS}, got {self.sigma2_estimator!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except FdbreakError as err:
        if err.stage is None:
            err.stage = name
            if err.args:
                err.args = (f"[{name}] {err.args[0]}",) + err.args[1:]
        raise


@dataclass(frozen=True)
class DetectionReport:
    n: int
    j_n: int
    epsilon: float
    alpha: float
    mc_draws: int
    stat_sup: float
    stat_l2: float
    q_sup: float
    q_l2: float
    p_sup: float
    p_l2: float
    reject_sup: bool
    reject_l2: bool
    k_hat_l2: int
    k_hat_sup: int
    break_significant: bool
    kappa: int
    sigma_diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class JumpBand:
    """Jump estimate ``m_pre - m_post`` with a simultaneous band on ``xgrid``.

    The estimate is pre-break minus post-break mean, so a rise of ``c`` after
    the break shows up as ``-c``.
    """

    k_hat: int
    tau_hat: float
    j_n: int
    xgrid: np.ndarray
    delta_hat: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    width_rule: str
    quantile: float

    def covers(self, target: np.ndarray) -> bool:
        return bool(np.all((self.lower <= target) & (target <= self.upper)))

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "tau_hat": self.tau_hat,
            "j_n": self.j_n,
            "alpha": self.alpha,
            "width_rule": self.width_rule,
            "quantile": self.quantile,
            "xgrid": self.xgrid.tolist(),
            "delta_hat": self.delta_hat.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Analysis:
    """Everything the detection run computed, for reuse by ``estimate_jump``."""

    report: DetectionReport
    basis: SplineBasis
    grid: EvalGrid
    sigma: SigmaEstimate
    field: CusumField
    eigen: KernelEigen
    q_l2: QuantileResult
    q_sup: QuantileResult


def resolve_knots(data: FunctionalDataset, config: PipelineConfig) -> int:
    if config.j_n == "bic":
        with _stage("knot selection"):
            return select_knots_bic(data, config.p, config.epsilon, config.xgrid_size)
    return int(config.j_n)


def _check_data(data: FunctionalDataset, config: PipelineConfig):
    min_n = 4 if config.j_n == "bic" else 3
    if data.n < min_n:
        raise ValidationError(f"the pipeline needs at least {min_n} curves, got n={data.n}")
    if len(t_lattice(data.n, config.epsilon)) == 0:
        raise ValidationError("epsilon leaves no admissible break index")


def analyze(data: FunctionalDataset, config: PipelineConfig = PipelineConfig()) -> Analysis:
    _check_data(data, config)
    j_n = resolve_knots(data, config)
    basis = SplineBasis(config.p, j_n)
    grid = make_grid(config.xgrid_size, basis)
    with _stage("break location"):
        k_l2 = locate_break(data, basis, "l2", config.epsilon, grid)
        k_sup = locate_break(data, basis, "sup", config.epsilon, grid)
    with _stage("covariance estimation"):
        sigma = sigma_total(data, basis, k_l2, config.lag, config.lag_rule, config.sigma2_estimator)
    with _stage("statistics"):
        fld = cusum_field(data, basis, sigma, config.epsilon, grid)
        s_n, t_n = stat_l2(fld), stat_sup(fld)
    with _stage("critical values"):
        eig = kernel_eigen(sigma, basis, grid)
        q_s, q_t = quantiles_test(eig, data.n, fld.ks, config.mc_draws, config.alpha, config.seed, observed=(s_n, t_n))
    reject_l2, reject_sup = s_n > q_s.value, t_n > q_t.value
    report = DetectionReport(
        n=data.n,
        j_n=j_n,
        epsilon=config.epsilon,
        alpha=config.alpha,
        mc_draws=config.mc_draws,
        stat_sup=t_n,
        stat_l2=s_n,
        q_sup=q_t.value,
        q_l2=q_s.value,
        p_sup=q_t.p_value,
        p_l2=q_s.p_value,
        reject_sup=bool(reject_sup),
        reject_l2=bool(reject_l2),
        k_hat_l2=k_l2,
        k_hat_sup=k_sup,
        break_significant=bool(reject_l2 or reject_sup),
        kappa=eig.kappa,
        sigma_diagnostics={"lag_window": sigma.lag_window, "psd_clip_mass": sigma.psd_clip_mass},
    )
    return Analysis(report, basis, grid, sigma, fld, eig, q_s, q_t)


def run_detection(data: FunctionalDataset, config: PipelineConfig = PipelineConfig()) -> DetectionReport:
    return analyze(data, config).report


def estimate_jump(
    data: FunctionalDataset,
    k_hat: int | None = None,
    config: PipelineConfig = PipelineConfig(),
    analysis: Analysis | None = None,
) -> JumpBand:
    """Estimate the jump after curve ``k_hat`` and its simultaneous band.

    Without ``k_hat`` the L2 locator is used. Passing the ``analysis`` of a
    detection run on the same data reuses its knots and, when the break index
    agrees, its covariance estimate.
    """
    if analysis is None and k_hat is None:
        analysis = analyze(data, config)
    if analysis is not None:
        basis, grid = analysis.basis, analysis.grid
        k_hat = analysis.report.k_hat_l2 if k_hat is None else k_hat
        j_n = basis.interior_knots
    else:
        _check_data(data, config)
        j_n = resolve_knots(data, config)
        basis = SplineBasis(config.p, j_n)
        grid = make_grid(config.xgrid_size, basis)
    n = data.n
    if not 2 <= k_hat <= n - 2:
        raise ValidationError(f"each segment needs at least 2 curves; got k_hat={k_hat} for n={n}")
    with _stage("covariance estimation"):
        if analysis is not None and analysis.sigma.k_hat == k_hat:
            sigma = analysis.sigma
        else:
            sigma = sigma_total(data, basis, k_hat, config.lag, config.lag_rule, config.sigma2_estimator)
    with _stage("jump estimation"):
        pre, post = segment_fits(data, basis, k_hat)
        x = np.linspace(0.0, 1.0, config.xgrid_size)
        delta = pre(x) - post(x)
        q = quantile_jump(sigma, basis, grid, config.mc_draws, config.alpha, config.seed)
        tau = k_hat / n
        if config.width_rule == "theorem4":
            scale = 1.0 / math.sqrt(n * tau * (1.0 - tau))
        else:
            scale = 1.0 / math.sqrt(n)
        half = scale * np.sqrt(rescale_fn(sigma, basis, x)) * q.value
    return JumpBand(
        k_hat=int(k_hat),
        tau_hat=tau,
        j_n=j_n,
        xgrid=x,
        delta_hat=delta,
        lower=delta - half,
        upper=delta + half,
        alpha=config.alpha,
        width_rule=config.width_rule,
        quantile=q.value,
    )
