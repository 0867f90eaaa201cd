"""
Bayesian switchpoint module for the activity-shift toolkit.

This module infers a single change in a user's Poisson posting rate:
daily counts follow Poisson(lambda1) before the switch day and
Poisson(lambda2) from it on, both rates with Exponential(alpha) priors and
a uniform prior over the interior days. The exact solver enumerates switch
days using Gamma-Poisson conjugacy; the MCMC solver samples the rates by
HMC with the switch day marginalized out. Posteriors turn into
probability-weighted jumps and can be checked with a posterior-predictive
p-value.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp, softmax, xlogy
from scipy.stats import gamma as gamma_distribution

from ..exceptions import DegenerateInputError, ValidationError, WindowTooShortError
from . import hmc
from .segmented import Jump, JumpSeries, aggregate_jumps
from .timeline import AnalysisWindow, DailySeries, total_and_mean_rate

logger = logging.getLogger(__name__)

ALPHA_EPSILON = 1e-3
PVALUE_STATISTICS = ("total", "deviance")


@dataclass(frozen=True)
class PriorConfig:
    """Exponential prior rate alpha shared by both Poisson rates."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValidationError(f"Prior rate alpha must be positive, got {self.alpha}")

    @classmethod
    def from_series(cls, series: DailySeries, epsilon: float = ALPHA_EPSILON) -> "PriorConfig":
        """Prior whose mean rate equals the series' mean daily count."""
        return cls(1.0 / (float(series.counts.mean()) + epsilon))


@dataclass(frozen=True, eq=False)
class SwitchpointPosterior:
    """
    Posterior of a single-switch model.

    `tau_pmf[t - 1]` is the probability that day index t (1..n-1) is the
    first day of the second rate.
    """

    window: AnalysisWindow
    tau_pmf: np.ndarray
    lambda1_mode: float
    lambda2_mode: float
    alpha: float
    solver: str = "exact"
    lambda1_samples: Optional[np.ndarray] = None
    lambda2_samples: Optional[np.ndarray] = None
    tau_samples: Optional[np.ndarray] = None
    width_samples: Optional[np.ndarray] = None
    width_median: Optional[float] = None
    diagnostics: Dict[str, Dict[str, float]] = field(default_factory=dict)
    p_value: Optional[float] = None

    def __post_init__(self):
        pmf = np.asarray(self.tau_pmf, dtype=float)
        if pmf.shape != (self.window.n_days - 1,):
            raise ValidationError("tau_pmf needs one entry per interior day")
        if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-9:
            raise ValidationError("tau_pmf must be a probability distribution")
        if self.lambda1_mode < 0 or self.lambda2_mode < 0:
            raise ValidationError("Rate modes must be non-negative")
        pmf.setflags(write=False)
        object.__setattr__(self, "tau_pmf", pmf)

    @property
    def map_index(self) -> int:
        """Day index (1..n-1) with the largest posterior mass."""
        return int(np.argmax(self.tau_pmf)) + 1

    @property
    def map_day(self) -> date:
        return self.window.day(self.map_index)

    @property
    def has_samples(self) -> bool:
        return self.lambda1_samples is not None and self.tau_samples is not None

    def credible_days(self, level: float = 0.95) -> List[date]:
        """Smallest set of days holding at least `level` of the mass, in date order."""
        order = np.argsort(-self.tau_pmf, kind="stable")
        cumulative = np.cumsum(self.tau_pmf[order])
        size = int(np.searchsorted(cumulative, level - 1e-12)) + 1
        return sorted(self.window.day(int(i) + 1) for i in order[:size])


def _side_statistics(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Count sums and lengths of both sides for every interior switch day."""
    n = counts.size
    cumulative = np.cumsum(counts)
    days = np.arange(1, n)
    s1 = cumulative[:-1].astype(float)
    s2 = float(cumulative[-1]) - s1
    return s1, days.astype(float), s2, (n - days).astype(float)


def _log_marginal(total: np.ndarray, length: np.ndarray, alpha: float) -> np.ndarray:
    """Log marginal likelihood of one side with the rate integrated out (shared factorials dropped)."""
    return math.log(alpha) + gammaln(total + 1.0) - (total + 1.0) * np.log(length + alpha)


def _mixture_mode(shapes: np.ndarray, rates: np.ndarray, weights: np.ndarray) -> float:
    """Mode of a weighted mixture of Gamma(shape, rate) densities."""
    keep = weights > weights.max() * 1e-10
    shapes, rates, log_w = shapes[keep], rates[keep], np.log(weights[keep])

    def log_density(x):
        x = np.atleast_1d(x)
        return logsumexp(log_w[None, :] + gamma_distribution.logpdf(
            x[:, None], shapes[None, :], scale=1.0 / rates[None, :]), axis=1)

    candidates = (shapes - 1.0) / rates
    values = np.concatenate([log_density(chunk) for chunk in np.array_split(candidates, max(1, candidates.size // 256))])
    best = int(np.argmax(values))
    x0, spread = float(candidates[best]), float(math.sqrt(shapes[best]) / rates[best])
    if spread <= 0:
        return x0
    result = minimize_scalar(lambda x: -float(log_density(x)[0]),
                             bounds=(max(0.0, x0 - 3 * spread), x0 + 3 * spread), method="bounded",
                             options={"xatol": 1e-10 * max(1.0, x0)})
    if result.success and -result.fun > values[best]:
        return max(float(result.x), 0.0)
    return x0


def _rate_modes(counts: np.ndarray, pmf: np.ndarray, alpha: float) -> Tuple[float, float]:
    s1, d1, s2, d2 = _side_statistics(counts)
    return (_mixture_mode(s1 + 1.0, d1 + alpha, pmf),
            _mixture_mode(s2 + 1.0, d2 + alpha, pmf))


def _check_length(series: DailySeries) -> None:
    if series.n < 3:
        raise WindowTooShortError(f"Switchpoint inference needs at least 3 days, got {series.n}")


def exact_posterior(series: DailySeries, prior: Optional[PriorConfig] = None) -> SwitchpointPosterior:
    """
    Exact posterior by enumerating every interior switch day.

    For each candidate day both rates integrate out in closed form
    (Exponential(alpha) is Gamma(1, alpha)), so the switch-day posterior is
    the normalized product of the two sides' marginal likelihoods. Rate
    modes are the modes of the marginal rate posteriors, the Gamma mixtures
    weighted by the switch-day posterior.

    Args:
        series: Daily counts (at least 3 days)
        prior: Prior configuration (default: mean-matched alpha)

    Returns:
        SwitchpointPosterior

    Raises:
        WindowTooShortError: If the series has fewer than 3 days
    """
    _check_length(series)
    prior = prior or PriorConfig.from_series(series)
    s1, d1, s2, d2 = _side_statistics(series.counts)
    log_evidence = _log_marginal(s1, d1, prior.alpha) + _log_marginal(s2, d2, prior.alpha)
    pmf = softmax(log_evidence)
    lambda1, lambda2 = _rate_modes(series.counts, pmf, prior.alpha)
    return SwitchpointPosterior(series.window, pmf, lambda1, lambda2, prior.alpha, solver="exact")


def _switch_log_density(series: DailySeries, alpha: float):
    """Log posterior of (log lambda1, log lambda2) with the switch day summed out."""
    s1, d1, s2, d2 = _side_statistics(series.counts)

    def log_density(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        if np.any(np.abs(theta) > 50):
            return -math.inf, np.zeros(2)
        lam1, lam2 = np.exp(theta)
        per_day = s1 * theta[0] - d1 * lam1 + s2 * theta[1] - d2 * lam2
        total = logsumexp(per_day)
        weights = np.exp(per_day - total)
        logp = total - alpha * (lam1 + lam2) + theta[0] + theta[1]
        grad = np.array([
            weights @ (s1 - d1 * lam1) - alpha * lam1 + 1.0,
            weights @ (s2 - d2 * lam2) - alpha * lam2 + 1.0,
        ])
        return float(logp), grad

    def conditional(theta: np.ndarray) -> np.ndarray:
        lam1, lam2 = np.exp(theta)
        return softmax(s1 * theta[0] - d1 * lam1 + s2 * theta[1] - d2 * lam2)

    return log_density, conditional


def mcmc_posterior(series: DailySeries,
                   prior: Optional[PriorConfig] = None,
                   chains: int = 4,
                   draws: int = 2000,
                   seed: Optional[int] = None,
                   warmup: int = 1000,
                   check: bool = True) -> SwitchpointPosterior:
    """
    Sampled posterior by Hamiltonian Monte Carlo.

    The rates are sampled on the log scale with the switch day marginalized
    inside the likelihood; each draw then takes a switch day from its exact
    conditional, and `tau_pmf` is the average of those conditionals.

    Args:
        series: Daily counts (at least 3 days)
        prior: Prior configuration (default: mean-matched alpha)
        chains: Number of chains (at least 2)
        draws: Draws per chain after warm-up (at least 1000)
        seed: Seed; identical seeds give identical posteriors
        warmup: Warm-up iterations per chain
        check: Raise on failed diagnostics

    Raises:
        ConvergenceError: If split-R-hat > 1.05 or ESS < 400 for a rate
    """
    _check_length(series)
    prior = prior or PriorConfig.from_series(series)
    log_density, conditional = _switch_log_density(series, prior.alpha)
    start = math.log((float(series.counts.sum()) + 1.0) / (series.n + prior.alpha))

    def initial(rng: np.random.Generator) -> np.ndarray:
        return start + 0.1 * rng.standard_normal(2)

    theta, generators = hmc.run_chains(log_density, initial, 2, chains, warmup, draws, seed)
    conditionals = np.empty((chains, draws, series.n - 1))
    tau = np.empty((chains, draws), dtype=np.int64)
    for c, rng in enumerate(generators):
        for i in range(draws):
            probabilities = conditional(theta[c, i])
            conditionals[c, i] = probabilities
            tau[c, i] = int(np.searchsorted(np.cumsum(probabilities), rng.uniform() * probabilities.sum())) + 1
    tau = np.minimum(tau, series.n - 1)
    pmf = conditionals.mean(axis=(0, 1))
    pmf = pmf / pmf.sum()
    lambdas = np.exp(theta)
    diagnostics = hmc.diagnose({"lambda1": lambdas[:, :, 0], "lambda2": lambdas[:, :, 1]})
    logger.debug(f"Switchpoint MCMC diagnostics: {diagnostics}")
    if check:
        hmc.check_convergence(diagnostics, ["lambda1", "lambda2"])
    lambda1, lambda2 = _rate_modes(series.counts, pmf, prior.alpha)
    return SwitchpointPosterior(
        series.window, pmf, lambda1, lambda2, prior.alpha, solver="mcmc",
        lambda1_samples=lambdas[:, :, 0].ravel(),
        lambda2_samples=lambdas[:, :, 1].ravel(),
        tau_samples=tau.ravel(),
        diagnostics=diagnostics,
    )


def switch_jump(posterior: SwitchpointPosterior, m: float, user_id: str, floor: float = 1e-4) -> List[Jump]:
    """
    Probability-weighted relative jump on every candidate day.

    Magnitude on day t is P(tau = t) * (lambda2_mode - lambda1_mode) / m;
    days with probability below `floor` are left out.

    Raises:
        DegenerateInputError: If m <= 0
    """
    if m <= 0:
        raise DegenerateInputError(f"Mean rate of {user_id} must be positive, got {m}")
    if floor < 0:
        raise ValidationError(f"Jump floor must be >= 0, got {floor}")
    delta = (posterior.lambda2_mode - posterior.lambda1_mode) / m
    return [
        Jump(user_id, posterior.window.day(int(t) + 1), float(posterior.tau_pmf[t]) * delta)
        for t in np.flatnonzero(posterior.tau_pmf >= floor)
    ]


def aggregate_switch_jumps(jumps, window: AnalysisWindow) -> JumpSeries:
    """Daily positive/negative sums of probability-weighted jumps."""
    return aggregate_jumps(jumps, window)


def _poisson_deviance(counts: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Row-wise Poisson deviance of `counts` against `mean` (broadcast)."""
    mean = np.maximum(mean, 1e-12)
    return 2.0 * np.sum(xlogy(counts, counts) - xlogy(counts, mean) - counts + mean, axis=-1)


def _posterior_draws(posterior: SwitchpointPosterior, series: DailySeries, alpha: float,
                     size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(tau, lambda1, lambda2) draws: resampled MCMC output, or exact conditional draws."""
    if posterior.has_samples:
        index = rng.integers(0, posterior.tau_samples.size, size=size)
        return (posterior.tau_samples[index], posterior.lambda1_samples[index],
                posterior.lambda2_samples[index])
    tau = rng.choice(np.arange(1, series.n), size=size, p=posterior.tau_pmf)
    s1, d1, s2, d2 = _side_statistics(series.counts)
    lambda1 = rng.gamma(s1[tau - 1] + 1.0, 1.0 / (d1[tau - 1] + alpha))
    lambda2 = rng.gamma(s2[tau - 1] + 1.0, 1.0 / (d2[tau - 1] + alpha))
    return tau, lambda1, lambda2


def posterior_predictive_pvalue(posterior: SwitchpointPosterior,
                                series: DailySeries,
                                prior: Optional[PriorConfig] = None,
                                replicates: int = 1000,
                                seed: Optional[int] = None,
                                statistic: str = "total") -> float:
    """
    Fraction of posterior-predictive replicates at least as extreme as the data.

    Each replicate draws (tau, lambda1, lambda2) from the posterior and a
    series from those parameters, then compares the replicate's statistic
    with the observed one.

    Statistics:
        total: sum of daily counts
        deviance: Poisson deviance against the drawn rates, for the
            replicate and for the observed series alike

    Raises:
        ValidationError: If replicates < 100 or the statistic is unknown
    """
    if replicates < 100:
        raise ValidationError(f"Posterior-predictive check needs at least 100 replicates, got {replicates}")
    if statistic not in PVALUE_STATISTICS:
        raise ValidationError(f"Unknown statistic '{statistic}', expected one of {PVALUE_STATISTICS}")
    alpha = prior.alpha if prior is not None else posterior.alpha
    rng = np.random.default_rng(seed)
    tau, lambda1, lambda2 = _posterior_draws(posterior, series, alpha, replicates, rng)
    days = np.arange(series.n)
    means = np.where(days[None, :] < tau[:, None], lambda1[:, None], lambda2[:, None])
    replicated = rng.poisson(means)
    observed = series.counts.astype(float)
    if statistic == "deviance":
        t_rep = _poisson_deviance(replicated, means)
        t_obs = _poisson_deviance(observed[None, :], means)
    else:
        t_rep = replicated.sum(axis=1).astype(float)
        t_obs = np.full(replicates, observed.sum())
    return float(np.mean(t_rep >= t_obs))


class BayesSwitchpoint:
    """
    Bayesian switchpoint module.

    Binds solver choice, chain settings, seed and jump floor of a RunConfig.
    """

    def __init__(self, analyzer):
        """
        Initialize the BayesSwitchpoint module.

        Args:
            analyzer: ActivityAnalyzer instance
        """
        self.analyzer = analyzer
        self.analyzer.bayes = self

    def prior(self, series: DailySeries) -> PriorConfig:
        alpha = self.analyzer.config.alpha
        return PriorConfig(alpha) if alpha is not None else PriorConfig.from_series(series)

    def posterior(self, series: DailySeries, seed: Optional[int] = None) -> SwitchpointPosterior:
        """Posterior with the configured solver, and its p-value when replicates are configured."""
        config = self.analyzer.config
        prior = self.prior(series)
        seed = config.seed if seed is None else seed
        if config.solver_bayes == "mcmc":
            posterior = mcmc_posterior(series, prior, config.chains, config.draws, seed, config.warmup)
        else:
            posterior = exact_posterior(series, prior)
        if config.pvalue_replicates:
            p_value = posterior_predictive_pvalue(posterior, series, prior, config.pvalue_replicates, seed,
                                                  config.pvalue_statistic)
            posterior = replace(posterior, p_value=p_value)
        return posterior

    def sigmoidal(self, series: DailySeries, seed: Optional[int] = None) -> SwitchpointPosterior:
        from .switch_models import fit_sigmoidal

        config = self.analyzer.config
        return fit_sigmoidal(series, self.prior(series), config.width_prior_days, config.chains, config.draws,
                             config.seed if seed is None else seed, config.warmup)

    def multistate(self, series: DailySeries):
        """Multistate fit with the level count capped to what the window can hold."""
        from .switch_models import fit_multistate

        config = self.analyzer.config
        levels_max = min(config.levels_max, series.n // config.min_segment_len)
        if levels_max < config.levels_max:
            logger.debug(f"Window of {series.n} days holds at most {levels_max} levels")
        return fit_multistate(series, self.prior(series), max(levels_max, 1), config.min_segment_len)

    def jumps(self, series: DailySeries, user_id: str,
              seed: Optional[int] = None) -> Tuple[SwitchpointPosterior, List[Jump]]:
        posterior = self.posterior(series, seed)
        _, m = total_and_mean_rate(series)
        return posterior, switch_jump(posterior, m, user_id, self.analyzer.config.jump_floor)
