"""
Extended switch models: a smooth (sigmoidal) transition between two rates,
and a multistate model with several rate levels chosen by BIC.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit, gammaln, logsumexp, softmax, xlogy

from ..exceptions import ValidationError, WindowTooShortError
from . import hmc
from .segmented import optimal_partition
from .switchpoint import PriorConfig, SwitchpointPosterior, _rate_modes, _side_statistics, exact_posterior
from .timeline import DailySeries

logger = logging.getLogger(__name__)


SIGMOID_CUTOFF = 30.0


def _sigmoid_log_density(series: DailySeries, alpha: float, width_prior_days: float):
    """
    Log posterior over z = (log lambda1, log lambda2, log w) with the switch summed out.

    The switch centre runs over the day boundaries t - 1/2 (t = 1..n-1,
    uniform prior) and day i has rate
    lambda1 + (lambda2 - lambda1) * sigmoid((i - t + 1/2) / w), w in days.
    Each centre's log likelihood is the hard-switch one plus a correction
    over the days where the sigmoid is not yet 0 or 1.

    Returns:
        (log_density, conditional): log density with gradient, and the
        switch-day distribution given z
    """
    n = series.n
    y = series.counts.astype(float)
    s1, d1, s2, d2 = _side_statistics(series.counts)
    # cell (t, k) holds day t + k, for offsets k in [-n, n)
    offsets = np.arange(-n, n)
    days = np.arange(1, n)[:, None] + offsets[None, :]
    inside = (days >= 0) & (days < n)
    counts = np.where(inside, y[np.clip(days, 0, n - 1)], 0.0)
    inside = inside.astype(float)
    width_center = math.log(width_prior_days)

    def per_switch(z: np.ndarray, with_grad: bool):
        lam1, lam2, width = math.exp(z[0]), math.exp(z[1]), math.exp(z[2])
        half = min(n, int(math.ceil(SIGMOID_CUTOFF * width)) + 1)
        columns = slice(n - half, n + half)
        c, m = counts[:, columns], inside[:, columns]
        centred = offsets[columns] + 0.5
        after = (centred > 0).astype(float)
        scaled = centred / width
        s = expit(scaled)
        rate = lam1 + (lam2 - lam1) * s
        hard = np.where(after > 0, lam2, lam1)
        loglik = (s1 * z[0] - d1 * lam1 + s2 * z[1] - d2 * lam2
                  + c @ (np.log(rate) - np.log(hard)) - m @ (rate - hard))
        if not with_grad:
            return loglik, None
        d_rate = -(lam2 - lam1) * s * (1.0 - s) * scaled
        grads = np.stack([
            s1 - d1 * lam1 + c @ (lam1 * (1.0 - s) / rate - (1.0 - after)) - m @ (lam1 * ((1.0 - s) - (1.0 - after))),
            s2 - d2 * lam2 + c @ (lam2 * s / rate - after) - m @ (lam2 * (s - after)),
            c @ (d_rate / rate) - m @ d_rate,
        ])
        return loglik, grads

    def log_density(z: np.ndarray) -> Tuple[float, np.ndarray]:
        if np.any(np.abs(z) > 50):
            return -math.inf, np.zeros(3)
        loglik, grads = per_switch(z, True)
        total = logsumexp(loglik)
        weights = np.exp(loglik - total)
        lam1, lam2 = math.exp(z[0]), math.exp(z[1])
        logp = total - alpha * (lam1 + lam2) + z[0] + z[1] - 0.5 * (z[2] - width_center) ** 2
        grad = grads @ weights + np.array([1.0 - alpha * lam1, 1.0 - alpha * lam2, -(z[2] - width_center)])
        return float(logp), grad

    def conditional(z: np.ndarray) -> np.ndarray:
        return softmax(per_switch(z, False)[0])

    return log_density, conditional


def fit_sigmoidal(series: DailySeries,
                  prior: Optional[PriorConfig] = None,
                  width_prior_days: float = 0.05,
                  chains: int = 4,
                  draws: int = 2000,
                  seed: Optional[int] = None,
                  warmup: int = 1000,
                  check: bool = True) -> SwitchpointPosterior:
    """
    Posterior of a smooth switch between two rates.

    The rate on day i is lambda1 + (lambda2 - lambda1) * sigmoid((i - tau) / w)
    with tau on the day boundaries t - 1/2 and log w ~ Normal(log(width_prior_days), 1), w in days.
    The rates and the width are sampled by HMC with tau summed out; as w
    shrinks the model becomes the hard switch. Chains start at the exact
    hard-switch rate modes.

    Returns:
        SwitchpointPosterior whose tau_pmf is the average switch-day
        conditional over the draws and whose width samples are in days

    Raises:
        ConvergenceError: If split-R-hat > 1.05 or ESS < 400 for a rate
    """
    if width_prior_days <= 0:
        raise ValidationError(f"Width prior must be positive, got {width_prior_days}")
    hard = exact_posterior(series, prior)
    alpha = hard.alpha
    n = series.n
    log_density, conditional = _sigmoid_log_density(series, alpha, width_prior_days)
    start = np.array([
        math.log(max(hard.lambda1_mode, 1e-3)),
        math.log(max(hard.lambda2_mode, 1e-3)),
        math.log(width_prior_days),
    ])

    def initial(rng: np.random.Generator) -> np.ndarray:
        return start + 0.05 * rng.standard_normal(3)

    z, generators = hmc.run_chains(log_density, initial, 3, chains, warmup, draws, seed)
    conditionals = np.empty((chains, draws, n - 1))
    tau = np.empty((chains, draws), dtype=np.int64)
    for c, rng in enumerate(generators):
        for i in range(draws):
            probabilities = conditional(z[c, i])
            conditionals[c, i] = probabilities
            tau[c, i] = int(np.searchsorted(np.cumsum(probabilities), rng.uniform() * probabilities.sum())) + 1
    tau = np.minimum(tau, n - 1)
    pmf = conditionals.mean(axis=(0, 1))
    pmf = pmf / pmf.sum()
    lambdas = np.exp(z[:, :, :2])
    widths = np.exp(z[:, :, 2])
    diagnostics = hmc.diagnose({
        "lambda1": lambdas[:, :, 0],
        "lambda2": lambdas[:, :, 1],
        "width": widths,
    })
    logger.debug(f"Sigmoidal MCMC diagnostics: {diagnostics}")
    if check:
        hmc.check_convergence(diagnostics, ["lambda1", "lambda2"])
    lambda1, lambda2 = _rate_modes(series.counts, pmf, alpha)
    return SwitchpointPosterior(
        series.window, pmf, lambda1, lambda2, alpha, solver="sigmoidal",
        lambda1_samples=lambdas[:, :, 0].ravel(),
        lambda2_samples=lambdas[:, :, 1].ravel(),
        tau_samples=tau.ravel(),
        width_samples=widths.ravel(),
        width_median=float(np.median(widths)),
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class MultistateFit:
    """MAP multistate fit with `levels` rates separated by `switch_days`."""

    levels: int
    switch_days: Tuple[int, ...]
    level_rates: Tuple[float, ...]
    bic: float
    log_likelihood: float
    bic_by_levels: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.level_rates) != len(self.switch_days) + 1 or self.levels != len(self.level_rates):
            raise ValidationError("A multistate fit needs one more rate than switch days")
        if any(a >= b for a, b in zip(self.switch_days, self.switch_days[1:])):
            raise ValidationError("Switch days must be strictly increasing")


def _segment_score_matrix(counts: np.ndarray, alpha: float, min_len: int) -> np.ndarray:
    """Negative log posterior of every segment [i, j) at its MAP rate S / (d + alpha)."""
    n = counts.size
    cs = np.concatenate(([0.0], np.cumsum(counts, dtype=float)))
    length = (np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None]).astype(float)
    total = cs[None, :] - cs[:, None]
    admissible = length >= min_len
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(admissible, total / (length + alpha), 0.0)
        score = xlogy(total, rate) - (length + alpha) * rate + math.log(alpha)
    return np.where(admissible, -score, np.inf)


def _log_likelihood(counts: np.ndarray, edges, rates) -> float:
    value = -float(np.sum(gammaln(counts + 1.0)))
    for (a, b), rate in zip(zip(edges, edges[1:]), rates):
        total = float(counts[a:b].sum())
        value += float(xlogy(total, rate)) - (b - a) * rate
    return value


def fit_multistate(series: DailySeries,
                   prior: Optional[PriorConfig] = None,
                   levels_max: int = 4,
                   min_segment_len: int = 7) -> MultistateFit:
    """
    MAP multistate Poisson fit with the number of levels chosen by BIC.

    For each L = 1..levels_max the L - 1 ordered switch days maximize the
    posterior (exponential rate priors, uniform ordered switch days) by
    dynamic programming; BIC = -2 logLik + (2L - 1) ln n at that MAP.

    Raises:
        WindowTooShortError: If the window cannot hold levels_max segments
    """
    if levels_max < 1:
        raise ValidationError(f"levels_max must be >= 1, got {levels_max}")
    if series.n < levels_max * min_segment_len:
        raise WindowTooShortError(
            f"{series.n} days cannot hold {levels_max} levels of at least {min_segment_len} days"
        )
    prior = prior or PriorConfig.from_series(series)
    counts = series.counts.astype(float)
    cost = _segment_score_matrix(counts, prior.alpha, min_segment_len)
    best = None
    scores = {}
    for levels in range(1, levels_max + 1):
        _, switches = optimal_partition(cost, levels - 1, min_segment_len)
        edges = [0, *switches, series.n]
        rates = tuple(float(counts[a:b].sum()) / (b - a + prior.alpha) for a, b in zip(edges, edges[1:]))
        log_likelihood = _log_likelihood(counts, edges, rates)
        bic = -2.0 * log_likelihood + (2 * levels - 1) * math.log(series.n)
        scores[levels] = bic
        if best is None or bic < best[3]:
            best = (levels, switches, rates, bic, log_likelihood)
    logger.debug(f"Multistate BIC by level count: {scores}")
    levels, switches, rates, bic, log_likelihood = best
    return MultistateFit(levels, switches, rates, bic, log_likelihood, scores)
